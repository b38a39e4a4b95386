#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace t2dm {

// Mann-Whitney AUROC with midranks (exact under ties). Throws DataError when
// only one class is present.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

// Average precision: sum over positive hits of precision at that rank,
// divided by the positive count. Ties broken by descending score then
// original index (stable). Throws DataError when no positives exist.
double auprc(const std::vector<double>& scores, const std::vector<int>& labels);

// Fraction correct at threshold 0.5.
double accuracy(const std::vector<double>& scores, const std::vector<int>& labels,
                double threshold = 0.5);

struct BootstrapCi {
    double point = 0;
    double lo = 0, hi = 0;
    int iterations = 0;
    int redrawn = 0;  // resamples rejected for being single-class
};

// Percentile bootstrap (2.5 / 97.5) over paired resamples of (score, label).
// Single-class resamples are redrawn and counted. Deterministic per seed.
BootstrapCi bootstrap_ci(const std::vector<double>& scores, const std::vector<int>& labels,
                         double (*metric)(const std::vector<double>&, const std::vector<int>&),
                         int iterations = 1000, uint64_t seed = 0);

struct MetricsReport {
    BootstrapCi auroc, auprc, accuracy;
    size_t n = 0;
};

MetricsReport evaluate_scores(const std::vector<double>& scores, const std::vector<int>& labels,
                              int bootstrap_iterations = 1000, uint64_t seed = 0);

}  // namespace t2dm
