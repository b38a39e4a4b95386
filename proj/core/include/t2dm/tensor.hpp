#pragma once

#include <cassert>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace t2dm::nn {

// Dense row-major tensor, rank <= 4. Most ops view it as 2D (rows x cols);
// convolution ops view it as C x H x W.
template <class T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        data.assign(static_cast<size_t>(count(shape)), T(0));
    }
    Tensor(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        assert(static_cast<size_t>(count(shape)) == data.size());
    }

    static int64_t count(const std::vector<int>& s) {
        int64_t n = 1;
        for (int d : s) n *= d;
        return n;
    }

    int64_t size() const { return static_cast<int64_t>(data.size()); }
    int rows() const { return shape.empty() ? 0 : shape[0]; }
    int cols() const {
        if (shape.size() < 2) return shape.size() == 1 ? 1 : 0;
        int64_t c = 1;
        for (size_t i = 1; i < shape.size(); ++i) c *= shape[i];
        return static_cast<int>(c);
    }

    T& at2(int r, int c) { return data[static_cast<size_t>(r) * cols() + c]; }
    T at2(int r, int c) const { return data[static_cast<size_t>(r) * cols() + c]; }

    template <class U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int> s, T v) {
        Tensor t(std::move(s));
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }
};

template <class T>
bool same_shape(const Tensor<T>& a, const Tensor<T>& b) {
    return a.shape == b.shape;
}

// --- deterministic initializers -------------------------------------------

// Truncated normal (resample outside 2 std), the projection default.
template <class T>
void init_trunc_normal(Tensor<T>& t, std::mt19937_64& rng, double stddev = 0.02) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& v : t.data) {
        double x;
        do {
            x = dist(rng);
        } while (std::abs(x) > 2.0 * stddev);
        v = static_cast<T>(x);
    }
}

// Uniform +-1/sqrt(fan_in), the recurrent-layer default.
template <class T>
void init_uniform_fan_in(Tensor<T>& t, std::mt19937_64& rng, int fan_in) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : t.data) v = static_cast<T>(dist(rng));
}

// Kaiming normal with fan-out, the conv default.
template <class T>
void init_kaiming_fan_out(Tensor<T>& t, std::mt19937_64& rng, int fan_out) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_out));
    for (auto& v : t.data) v = static_cast<T>(dist(rng));
}

}  // namespace t2dm::nn
