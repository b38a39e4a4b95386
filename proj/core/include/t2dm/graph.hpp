#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "t2dm/errors.hpp"
#include "t2dm/tensor.hpp"

namespace t2dm::nn {

// A named trainable tensor. Gradients accumulate across graphs until the
// optimizer consumes them.
template <class T>
struct Param {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    bool frozen = false;

    void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), T(0)); }
};

template <class T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using EMap = Eigen::Map<EMat<T>>;
template <class T>
using ECMap = Eigen::Map<const EMat<T>>;

template <class T>
ECMap<T> as_mat(const Tensor<T>& t, int rows, int cols) {
    return ECMap<T>(t.data.data(), rows, cols);
}
template <class T>
EMap<T> as_mat(Tensor<T>& t, int rows, int cols) {
    return EMap<T>(t.data.data(), rows, cols);
}

// Reverse-mode tape. A graph is built per forward pass and discarded after
// backward; parameter leaves scatter their gradients into Param::grad.
template <class T>
class Graph {
public:
    struct Node {
        Tensor<T> val;
        Tensor<T> grad;
        std::function<void()> back;  // reads this->grad, accumulates into parents
        Param<T>* bound = nullptr;
    };
    using Var = Node*;

    Var input(Tensor<T> v) {
        nodes_.push_back(Node{std::move(v), {}, nullptr, nullptr});
        return &nodes_.back();
    }

    Var leaf(Param<T>& p) {
        nodes_.push_back(Node{p.value, {}, nullptr, p.frozen ? nullptr : &p});
        return &nodes_.back();
    }

    size_t node_count() const { return nodes_.size(); }

    // Seeds the output gradient and sweeps the tape in reverse creation
    // order. `seed` fills the whole grad tensor (a scalar loss has size 1).
    void backward(Var out, T seed = T(1)) {
        for (auto& n : nodes_) n.grad = Tensor<T>::zeros(n.val.shape);
        std::fill(out->grad.data.begin(), out->grad.data.end(), seed);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
            if (it->back) it->back();
        for (auto& n : nodes_) {
            if (!n.bound) continue;
            for (size_t i = 0; i < n.grad.data.size(); ++i)
                n.bound->grad.data[i] += n.grad.data[i];
        }
    }

    // ---- ops ---------------------------------------------------------------

    Var matmul(Var a, Var b) {
        int m = a->val.rows(), k = a->val.cols(), n = b->val.cols();
        if (b->val.rows() != k) throw DataError("matmul: inner dimension mismatch");
        Tensor<T> out({m, n});
        as_mat(out, m, n).noalias() = as_mat(a->val, m, k) * as_mat(b->val, k, n);
        Var o = input(std::move(out));
        o->back = [o, a, b, m, k, n] {
            as_mat(a->grad, m, k).noalias() +=
                as_mat<T>(o->grad, m, n) * as_mat(b->val, k, n).transpose();
            as_mat(b->grad, k, n).noalias() +=
                as_mat(a->val, m, k).transpose() * as_mat<T>(o->grad, m, n);
        };
        return o;
    }

    Var add(Var a, Var b) {
        if (!same_shape(a->val, b->val)) throw DataError("add: shape mismatch");
        Tensor<T> out = a->val;
        for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b->val.data[i];
        Var o = input(std::move(out));
        o->back = [o, a, b] {
            for (size_t i = 0; i < o->grad.data.size(); ++i) {
                a->grad.data[i] += o->grad.data[i];
                b->grad.data[i] += o->grad.data[i];
            }
        };
        return o;
    }

    // Adds a length-n vector to every row of a [m x n] matrix.
    Var add_rowvec(Var a, Var v) {
        int m = a->val.rows(), n = a->val.cols();
        if (v->val.size() != n) throw DataError("add_rowvec: width mismatch");
        Tensor<T> out = a->val;
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < n; ++c) out.data[static_cast<size_t>(r) * n + c] += v->val.data[c];
        Var o = input(std::move(out));
        o->back = [o, a, v, m, n] {
            for (size_t i = 0; i < o->grad.data.size(); ++i) a->grad.data[i] += o->grad.data[i];
            for (int r = 0; r < m; ++r)
                for (int c = 0; c < n; ++c)
                    v->grad.data[c] += o->grad.data[static_cast<size_t>(r) * n + c];
        };
        return o;
    }

    Var mul(Var a, Var b) {
        if (!same_shape(a->val, b->val)) throw DataError("mul: shape mismatch");
        Tensor<T> out = a->val;
        for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b->val.data[i];
        Var o = input(std::move(out));
        o->back = [o, a, b] {
            for (size_t i = 0; i < o->grad.data.size(); ++i) {
                a->grad.data[i] += o->grad.data[i] * b->val.data[i];
                b->grad.data[i] += o->grad.data[i] * a->val.data[i];
            }
        };
        return o;
    }

    Var scale(Var a, T s) {
        Tensor<T> out = a->val;
        for (auto& x : out.data) x *= s;
        Var o = input(std::move(out));
        o->back = [o, a, s] {
            for (size_t i = 0; i < o->grad.data.size(); ++i) a->grad.data[i] += s * o->grad.data[i];
        };
        return o;
    }

    Var transpose(Var a) {
        int m = a->val.rows(), n = a->val.cols();
        Tensor<T> out({n, m});
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < n; ++c) out.at2(c, r) = a->val.at2(r, c);
        Var o = input(std::move(out));
        o->back = [o, a, m, n] {
            for (int r = 0; r < m; ++r)
                for (int c = 0; c < n; ++c) a->grad.at2(r, c) += o->grad.at2(c, r);
        };
        return o;
    }

    Var slice_rows(Var a, int r0, int r1) {
        int n = a->val.cols();
        Tensor<T> out({r1 - r0, n});
        std::copy(a->val.data.begin() + static_cast<size_t>(r0) * n,
                  a->val.data.begin() + static_cast<size_t>(r1) * n, out.data.begin());
        Var o = input(std::move(out));
        o->back = [o, a, r0, n] {
            for (size_t i = 0; i < o->grad.data.size(); ++i)
                a->grad.data[static_cast<size_t>(r0) * n + i] += o->grad.data[i];
        };
        return o;
    }

    Var slice_cols(Var a, int c0, int c1) {
        int m = a->val.rows(), n = a->val.cols(), w = c1 - c0;
        Tensor<T> out({m, w});
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < w; ++c) out.at2(r, c) = a->val.at2(r, c0 + c);
        Var o = input(std::move(out));
        o->back = [o, a, c0, m, w] {
            for (int r = 0; r < m; ++r)
                for (int c = 0; c < w; ++c) a->grad.at2(r, c0 + c) += o->grad.at2(r, c);
        };
        return o;
    }

    Var concat_rows(std::vector<Var> parts) {
        int n = parts.front()->val.cols(), m = 0;
        for (Var p : parts) {
            if (p->val.cols() != n) throw DataError("concat_rows: width mismatch");
            m += p->val.rows();
        }
        Tensor<T> out({m, n});
        size_t off = 0;
        for (Var p : parts) {
            std::copy(p->val.data.begin(), p->val.data.end(), out.data.begin() + off);
            off += p->val.data.size();
        }
        Var o = input(std::move(out));
        o->back = [o, parts] {
            size_t off = 0;
            for (Var p : parts) {
                for (size_t i = 0; i < p->grad.data.size(); ++i)
                    p->grad.data[i] += o->grad.data[off + i];
                off += p->grad.data.size();
            }
        };
        return o;
    }

    // Concatenates [1 x k] row vectors into one [1 x sum k].
    Var concat_cols(std::vector<Var> parts) {
        int total = 0;
        for (Var p : parts) total += static_cast<int>(p->val.size());
        Tensor<T> out({1, total});
        size_t off = 0;
        for (Var p : parts) {
            std::copy(p->val.data.begin(), p->val.data.end(), out.data.begin() + off);
            off += p->val.data.size();
        }
        Var o = input(std::move(out));
        o->back = [o, parts] {
            size_t off = 0;
            for (Var p : parts) {
                for (size_t i = 0; i < p->grad.data.size(); ++i)
                    p->grad.data[i] += o->grad.data[off + i];
                off += p->grad.data.size();
            }
        };
        return o;
    }

    // Row-wise softmax with an optional additive key mask: mask[j] == 0 adds
    // -1e30 to column j before the softmax. Throws if every key is masked.
    Var softmax_rows(Var a, const std::vector<uint8_t>* key_mask = nullptr) {
        int m = a->val.rows(), n = a->val.cols();
        if (key_mask) {
            if (static_cast<int>(key_mask->size()) != n)
                throw DataError("softmax_rows: mask length mismatch");
            bool any = false;
            for (uint8_t b : *key_mask) any = any || b;
            if (!any) throw DataError("softmax_rows: all keys masked");
        }
        Tensor<T> out({m, n});
        for (int r = 0; r < m; ++r) {
            T mx = -std::numeric_limits<T>::infinity();
            for (int c = 0; c < n; ++c) {
                T v = a->val.at2(r, c);
                if (key_mask && !(*key_mask)[c]) continue;
                mx = std::max(mx, v);
            }
            T sum = 0;
            for (int c = 0; c < n; ++c) {
                T e = (key_mask && !(*key_mask)[c]) ? T(0) : std::exp(a->val.at2(r, c) - mx);
                out.at2(r, c) = e;
                sum += e;
            }
            for (int c = 0; c < n; ++c) out.at2(r, c) /= sum;
        }
        Var o = input(std::move(out));
        o->back = [o, a, m, n] {
            for (int r = 0; r < m; ++r) {
                T dot = 0;
                for (int c = 0; c < n; ++c) dot += o->grad.at2(r, c) * o->val.at2(r, c);
                for (int c = 0; c < n; ++c)
                    a->grad.at2(r, c) += o->val.at2(r, c) * (o->grad.at2(r, c) - dot);
            }
        };
        return o;
    }

    // Per-row layer normalization with learned gain/bias.
    Var layernorm(Var x, Var gamma, Var beta, T eps) {
        int m = x->val.rows(), n = x->val.cols();
        Tensor<T> out({m, n});
        auto xhat = std::make_shared<Tensor<T>>(std::vector<int>{m, n});
        auto inv_std = std::make_shared<std::vector<T>>(m);
        for (int r = 0; r < m; ++r) {
            T mean = 0;
            for (int c = 0; c < n; ++c) mean += x->val.at2(r, c);
            mean /= n;
            T var = 0;
            for (int c = 0; c < n; ++c) {
                T d = x->val.at2(r, c) - mean;
                var += d * d;
            }
            var /= n;
            T is = T(1) / std::sqrt(var + eps);
            (*inv_std)[r] = is;
            for (int c = 0; c < n; ++c) {
                T h = (x->val.at2(r, c) - mean) * is;
                xhat->at2(r, c) = h;
                out.at2(r, c) = h * gamma->val.data[c] + beta->val.data[c];
            }
        }
        Var o = input(std::move(out));
        o->back = [o, x, gamma, beta, xhat, inv_std, m, n] {
            for (int r = 0; r < m; ++r) {
                T sum_dh = 0, sum_dh_h = 0;
                for (int c = 0; c < n; ++c) {
                    T dy = o->grad.at2(r, c);
                    T dh = dy * gamma->val.data[c];
                    sum_dh += dh;
                    sum_dh_h += dh * xhat->at2(r, c);
                    gamma->grad.data[c] += dy * xhat->at2(r, c);
                    beta->grad.data[c] += dy;
                }
                for (int c = 0; c < n; ++c) {
                    T dh = o->grad.at2(r, c) * gamma->val.data[c];
                    x->grad.at2(r, c) +=
                        (*inv_std)[r] * (dh - sum_dh / n - xhat->at2(r, c) * sum_dh_h / n);
                }
            }
        };
        return o;
    }

    Var sigmoid(Var a) {
        Tensor<T> out = a->val;
        for (auto& v : out.data) v = T(1) / (T(1) + std::exp(-v));
        Var o = input(std::move(out));
        o->back = [o, a] {
            for (size_t i = 0; i < o->grad.data.size(); ++i) {
                T y = o->val.data[i];
                a->grad.data[i] += o->grad.data[i] * y * (T(1) - y);
            }
        };
        return o;
    }

    Var tanh_op(Var a) {
        Tensor<T> out = a->val;
        for (auto& v : out.data) v = std::tanh(v);
        Var o = input(std::move(out));
        o->back = [o, a] {
            for (size_t i = 0; i < o->grad.data.size(); ++i) {
                T y = o->val.data[i];
                a->grad.data[i] += o->grad.data[i] * (T(1) - y * y);
            }
        };
        return o;
    }

    Var relu(Var a) {
        Tensor<T> out = a->val;
        for (auto& v : out.data) v = v > T(0) ? v : T(0);
        Var o = input(std::move(out));
        o->back = [o, a] {
            for (size_t i = 0; i < o->grad.data.size(); ++i)
                if (a->val.data[i] > T(0)) a->grad.data[i] += o->grad.data[i];
        };
        return o;
    }

    // Exact GELU: x * Phi(x).
    Var gelu(Var a) {
        Tensor<T> out = a->val;
        for (auto& v : out.data)
            v = v * T(0.5) * (T(1) + std::erf(v / std::sqrt(T(2))));
        Var o = input(std::move(out));
        o->back = [o, a] {
            const T inv_sqrt2 = T(1) / std::sqrt(T(2));
            const T inv_sqrt2pi = T(1) / std::sqrt(T(2) * T(M_PI));
            for (size_t i = 0; i < o->grad.data.size(); ++i) {
                T x = a->val.data[i];
                T phi = T(0.5) * (T(1) + std::erf(x * inv_sqrt2));
                T pdf = inv_sqrt2pi * std::exp(-x * x / T(2));
                a->grad.data[i] += o->grad.data[i] * (phi + x * pdf);
            }
        };
        return o;
    }

    Var mean_all(Var a) {
        int64_t n = a->val.size();
        Tensor<T> out({1, 1});
        T s = 0;
        for (T v : a->val.data) s += v;
        out.data[0] = s / static_cast<T>(n);
        Var o = input(std::move(out));
        o->back = [o, a, n] {
            T g = o->grad.data[0] / static_cast<T>(n);
            for (auto& v : a->grad.data) v += g;
        };
        return o;
    }

    // Binary cross-entropy over a batch of probabilities (clamped to
    // [eps, 1-eps], eps = 1e-7).
    Var bce_loss(Var probs, const std::vector<T>& labels) {
        const T eps = static_cast<T>(1e-7);
        int64_t b = probs->val.size();
        if (b == 0 || static_cast<int64_t>(labels.size()) != b)
            throw DataError("bce_loss: empty batch or label length mismatch");
        auto clamped = std::make_shared<std::vector<T>>(b);
        Tensor<T> out({1, 1});
        T acc = 0;
        for (int64_t i = 0; i < b; ++i) {
            T p = std::min(std::max(probs->val.data[i], eps), T(1) - eps);
            (*clamped)[i] = p;
            acc += labels[i] * std::log(p) + (T(1) - labels[i]) * std::log(T(1) - p);
        }
        out.data[0] = -acc / static_cast<T>(b);
        Var o = input(std::move(out));
        o->back = [o, probs, labels, clamped, b] {
            T g = o->grad.data[0] / static_cast<T>(b);
            for (int64_t i = 0; i < b; ++i) {
                T p = (*clamped)[i];
                probs->grad.data[i] += g * (p - labels[i]) / (p * (T(1) - p));
            }
        };
        return o;
    }

    // Numerically stable BCE on a single logit.
    Var bce_with_logit(Var logit, T y) {
        T l = logit->val.data[0];
        Tensor<T> out({1, 1});
        out.data[0] = std::max(l, T(0)) - l * y + std::log1p(std::exp(-std::abs(l)));
        Var o = input(std::move(out));
        o->back = [o, logit, y] {
            T l = logit->val.data[0];
            T s = T(1) / (T(1) + std::exp(-l));
            logit->grad.data[0] += o->grad.data[0] * (s - y);
        };
        return o;
    }

    // conv2d on a single image: x [C,H,W], w [O,C,kh,kw], bias [O].
    Var conv2d(Var x, Var w, Var bias, int stride, int pad) {
        const int C = x->val.shape[0], H = x->val.shape[1], W = x->val.shape[2];
        const int O = w->val.shape[0], kh = w->val.shape[2], kw = w->val.shape[3];
        if (w->val.shape[1] != C) throw DataError("conv2d: channel mismatch");
        const int OH = (H + 2 * pad - kh) / stride + 1;
        const int OW = (W + 2 * pad - kw) / stride + 1;
        const int K = C * kh * kw, P = OH * OW;

        // im2col: K x P
        auto col = std::make_shared<Tensor<T>>(std::vector<int>{K, P});
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < kh; ++i)
                for (int j = 0; j < kw; ++j) {
                    int krow = (c * kh + i) * kw + j;
                    for (int oy = 0; oy < OH; ++oy) {
                        int iy = oy * stride + i - pad;
                        for (int ox = 0; ox < OW; ++ox) {
                            int ix = ox * stride + j - pad;
                            T v = (iy >= 0 && iy < H && ix >= 0 && ix < W)
                                      ? x->val.data[(static_cast<size_t>(c) * H + iy) * W + ix]
                                      : T(0);
                            col->data[static_cast<size_t>(krow) * P + oy * OW + ox] = v;
                        }
                    }
                }

        Tensor<T> out({O, OH, OW});
        as_mat(out, O, P).noalias() = as_mat(w->val, O, K) * as_mat(*col, K, P);
        for (int o_ = 0; o_ < O; ++o_)
            for (int p = 0; p < P; ++p) out.data[static_cast<size_t>(o_) * P + p] += bias->val.data[o_];

        Var o = input(std::move(out));
        o->back = [o, x, w, bias, col, C, H, W, O, kh, kw, OH, OW, stride, pad, K, P] {
            // dW and db
            as_mat(w->grad, O, K).noalias() +=
                as_mat<T>(o->grad, O, P) * as_mat(*col, K, P).transpose();
            for (int oc = 0; oc < O; ++oc) {
                T s = 0;
                for (int p = 0; p < P; ++p) s += o->grad.data[static_cast<size_t>(oc) * P + p];
                bias->grad.data[oc] += s;
            }
            // dX via col2im of W^T dY
            EMat<T> dcol = as_mat(w->val, O, K).transpose() * as_mat<T>(o->grad, O, P);
            for (int c = 0; c < C; ++c)
                for (int i = 0; i < kh; ++i)
                    for (int j = 0; j < kw; ++j) {
                        int krow = (c * kh + i) * kw + j;
                        for (int oy = 0; oy < OH; ++oy) {
                            int iy = oy * stride + i - pad;
                            if (iy < 0 || iy >= H) continue;
                            for (int ox = 0; ox < OW; ++ox) {
                                int ix = ox * stride + j - pad;
                                if (ix < 0 || ix >= W) continue;
                                x->grad.data[(static_cast<size_t>(c) * H + iy) * W + ix] +=
                                    dcol(krow, oy * OW + ox);
                            }
                        }
                    }
        };
        return o;
    }

    // Per-channel scale and shift on a [C,H,W] tensor.
    Var channel_affine(Var x, Var gamma, Var beta) {
        const int C = x->val.shape[0];
        const int plane = static_cast<int>(x->val.size() / C);
        Tensor<T> out = x->val;
        for (int c = 0; c < C; ++c)
            for (int p = 0; p < plane; ++p) {
                auto& v = out.data[static_cast<size_t>(c) * plane + p];
                v = v * gamma->val.data[c] + beta->val.data[c];
            }
        Var o = input(std::move(out));
        o->back = [o, x, gamma, beta, C, plane] {
            for (int c = 0; c < C; ++c) {
                T dg = 0, db = 0;
                for (int p = 0; p < plane; ++p) {
                    size_t k = static_cast<size_t>(c) * plane + p;
                    dg += o->grad.data[k] * x->val.data[k];
                    db += o->grad.data[k];
                    x->grad.data[k] += o->grad.data[k] * gamma->val.data[c];
                }
                gamma->grad.data[c] += dg;
                beta->grad.data[c] += db;
            }
        };
        return o;
    }

    // [C,H,W] -> [1,C] mean over the spatial plane.
    Var global_avg_pool(Var x) {
        const int C = x->val.shape[0];
        const int plane = static_cast<int>(x->val.size() / C);
        Tensor<T> out({1, C});
        for (int c = 0; c < C; ++c) {
            T s = 0;
            for (int p = 0; p < plane; ++p) s += x->val.data[static_cast<size_t>(c) * plane + p];
            out.data[c] = s / static_cast<T>(plane);
        }
        Var o = input(std::move(out));
        o->back = [o, x, C, plane] {
            for (int c = 0; c < C; ++c) {
                T g = o->grad.data[c] / static_cast<T>(plane);
                for (int p = 0; p < plane; ++p) x->grad.data[static_cast<size_t>(c) * plane + p] += g;
            }
        };
        return o;
    }

    Var reshape(Var a, std::vector<int> shape) {
        if (Tensor<T>::count(shape) != a->val.size()) throw DataError("reshape: element count");
        Tensor<T> out(shape, a->val.data);
        Var o = input(std::move(out));
        o->back = [o, a] {
            for (size_t i = 0; i < o->grad.data.size(); ++i) a->grad.data[i] += o->grad.data[i];
        };
        return o;
    }

private:
    std::deque<Node> nodes_;
};

}  // namespace t2dm::nn
