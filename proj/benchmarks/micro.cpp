#include <random>

#include <benchmark/benchmark.h>

#include "t2dm/ecg.hpp"
#include "t2dm/models.hpp"
#include "t2dm/nn.hpp"

using namespace t2dm;

static void BM_Bandpass(benchmark::State& state) {
    std::mt19937_64 rng(1);
    std::normal_distribution<float> d(0, 1);
    std::vector<float> samples(5000 * kEcgLeads);
    for (auto& v : samples) v = d(rng);
    FilterCoeffs coeffs = design_butterworth(5, 0.5, 150.0, 500.0);
    for (auto _ : state) {
        auto out = apply_bandpass(samples, 5000, coeffs);
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_Bandpass);

static void BM_EcgReduce(benchmark::State& state) {
    std::mt19937_64 rng(2);
    std::normal_distribution<float> d(0, 1);
    std::vector<float> samples(5000 * kEcgLeads);
    for (auto& v : samples) v = d(rng);
    for (auto _ : state) {
        auto out = reduce_ecg(samples, 5000);
        benchmark::DoNotOptimize(out.values.data());
    }
}
BENCHMARK(BM_EcgReduce);

static void BM_AttentionForward(benchmark::State& state) {
    std::mt19937_64 rng(3);
    nn::ParamStore<float> ps;
    auto attn = nn::MultiHeadSelfAttention<float>::create(ps, "attn", 64, 4, rng);
    nn::Tensor<float> x = nn::Tensor<float>::zeros({static_cast<int>(state.range(0)), 64});
    std::normal_distribution<float> d(0, 1);
    for (auto& v : x.data) v = d(rng);
    std::vector<uint8_t> mask(x.shape[0], 1);
    for (auto _ : state) {
        nn::Graph<float> g;
        auto y = attn.forward(g, g.input(x), mask);
        benchmark::DoNotOptimize(y->val.data.data());
    }
}
BENCHMARK(BM_AttentionForward)->Arg(64)->Arg(263);

static void BM_ViltScore(benchmark::State& state) {
    ViltModelF model(ViltConfig::toy(), 4);
    std::mt19937_64 rng(5);
    std::normal_distribution<float> d(0, 1);
    ModelInput in;
    in.has_ecg = true;
    in.ehr = nn::Tensor<float>::zeros({96, kEhrFeatureCount});
    in.ecg = nn::Tensor<float>::zeros({kEcgReducedRows, kEcgLeads});
    in.image = nn::Tensor<float>::zeros({3, 64, 64});
    for (auto* t : {&in.ehr, &in.ecg, &in.image})
        for (auto& v : t->data) v = d(rng);
    for (auto _ : state) benchmark::DoNotOptimize(model.score(in));
}
BENCHMARK(BM_ViltScore);

BENCHMARK_MAIN();
