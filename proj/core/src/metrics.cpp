#include "t2dm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "t2dm/errors.hpp"

namespace t2dm {

namespace {

void check_inputs(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.empty() || scores.size() != labels.size())
        throw DataError("metrics: empty input or score/label length mismatch");
    for (double s : scores)
        if (!std::isfinite(s)) throw DataError("metrics: non-finite score");
}

}  // namespace

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_inputs(scores, labels);
    const size_t n = scores.size();
    size_t pos = 0;
    for (int y : labels) pos += (y != 0);
    if (pos == 0 || pos == n) throw DataError("auroc: undefined, only one class present");

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // Midranks over tie groups, then the rank-sum statistic.
    std::vector<double> rank(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        double mid = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (size_t k = i; k <= j; ++k) rank[order[k]] = mid;
        i = j + 1;
    }
    double rank_sum_pos = 0;
    for (size_t k = 0; k < n; ++k)
        if (labels[k] != 0) rank_sum_pos += rank[k];
    double np = static_cast<double>(pos), nn = static_cast<double>(n - pos);
    return (rank_sum_pos - np * (np + 1) / 2.0) / (np * nn);
}

double auprc(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_inputs(scores, labels);
    const size_t n = scores.size();
    size_t pos = 0;
    for (int y : labels) pos += (y != 0);
    if (pos == 0) throw DataError("auprc: undefined, no positive labels");

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    double tp = 0, ap = 0;
    for (size_t r = 0; r < n; ++r) {
        if (labels[order[r]] != 0) {
            tp += 1;
            ap += tp / static_cast<double>(r + 1);
        }
    }
    return ap / static_cast<double>(pos);
}

double accuracy(const std::vector<double>& scores, const std::vector<int>& labels,
                double threshold) {
    check_inputs(scores, labels);
    size_t correct = 0;
    for (size_t i = 0; i < scores.size(); ++i)
        correct += ((scores[i] >= threshold) == (labels[i] != 0));
    return static_cast<double>(correct) / static_cast<double>(scores.size());
}

BootstrapCi bootstrap_ci(const std::vector<double>& scores, const std::vector<int>& labels,
                         double (*metric)(const std::vector<double>&, const std::vector<int>&),
                         int iterations, uint64_t seed) {
    check_inputs(scores, labels);
    BootstrapCi out;
    out.point = metric(scores, labels);
    out.iterations = iterations;

    const size_t n = scores.size();
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<size_t> pick(0, n - 1);
    std::vector<double> stats;
    stats.reserve(iterations);
    std::vector<double> rs(n);
    std::vector<int> rl(n);
    for (int it = 0; it < iterations; ++it) {
        for (;;) {
            for (size_t i = 0; i < n; ++i) {
                size_t j = pick(rng);
                rs[i] = scores[j];
                rl[i] = labels[j];
            }
            try {
                stats.push_back(metric(rs, rl));
                break;
            } catch (const DataError&) {
                ++out.redrawn;  // degenerate resample, draw again
            }
        }
    }
    std::sort(stats.begin(), stats.end());
    // Nearest-rank percentiles at 2.5% and 97.5%.
    auto pct = [&](double q) {
        double idx = q * (stats.size() - 1);
        size_t lo = static_cast<size_t>(std::floor(idx));
        size_t hi = static_cast<size_t>(std::ceil(idx));
        double frac = idx - lo;
        return stats[lo] * (1 - frac) + stats[hi] * frac;
    };
    out.lo = pct(0.025);
    out.hi = pct(0.975);
    return out;
}

MetricsReport evaluate_scores(const std::vector<double>& scores, const std::vector<int>& labels,
                              int bootstrap_iterations, uint64_t seed) {
    MetricsReport r;
    r.n = scores.size();
    r.auroc = bootstrap_ci(scores, labels, &auroc, bootstrap_iterations, seed);
    r.auprc = bootstrap_ci(scores, labels, &auprc, bootstrap_iterations, seed + 1);
    auto acc = [](const std::vector<double>& s, const std::vector<int>& l) {
        return accuracy(s, l, 0.5);
    };
    r.accuracy = bootstrap_ci(scores, labels, +acc, bootstrap_iterations, seed + 2);
    return r;
}

}  // namespace t2dm
