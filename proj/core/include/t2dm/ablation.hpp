#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "t2dm/metrics.hpp"
#include "t2dm/models.hpp"

namespace t2dm {

// Test-time robustness probes: inputs are perturbed copies, the trained model
// is never modified (except for the retrain-style probes driven by the CLI).

enum class NoiseFamily { kGaussian, kPoisson, kUniform, kSaltPepper };
enum class NoiseTarget { kEhr, kEcg, kImage };

std::string noise_family_name(NoiseFamily f);
std::string noise_target_name(NoiseTarget t);

struct NoiseSpec {
    NoiseFamily family = NoiseFamily::kGaussian;
    NoiseTarget target = NoiseTarget::kEhr;
    double amplitude = 0.1;
};

// Copy-on-perturb. Tabular targets are perturbed additively in standardized
// space; the image is perturbed in [0,1] space then re-normalized, except
// salt-and-pepper which flips a fraction `amplitude` of normalized pixels to
// the channel extremes.
ModelInput perturb_input(const ModelInput& in, const NoiseSpec& spec, uint64_t seed,
                         const double norm_mean[3], const double norm_std[3]);

// Replaces round(ratio * n) seed-chosen images with all-black (pre-normalization
// zero) rasters. Returns the perturbed copy of the whole set.
std::vector<ModelInput> mask_cxr_fraction(const std::vector<ModelInput>& inputs, double ratio,
                                          uint64_t seed, const double norm_mean[3],
                                          const double norm_std[3]);

using Scorer = std::function<double(const ModelInput&)>;

struct AblationRow {
    std::string kind;    // baseline | noise | missing_cxr | no_pretrain
    std::string family;  // noise family, empty otherwise
    std::string target;  // ehr | ecg | image, empty otherwise
    double amplitude = 0;  // noise amplitude or missing ratio
    BootstrapCi auroc, auprc;
    size_t n = 0;
};

struct AblationOptions {
    std::vector<double> amplitudes = {0.1, 0.5, 0.7};
    std::vector<double> missing_ratios = {0.3, 0.5, 0.7};
    bool include_ecg = true;
    int bootstrap_iterations = 1000;
    uint64_t seed = 0;
    double norm_mean[3] = {0.5, 0.5, 0.5};
    double norm_std[3] = {0.5, 0.5, 0.5};
};

AblationRow evaluate_cell(const Scorer& score, const std::vector<ModelInput>& inputs,
                          const AblationOptions& opt);

// Baseline + every (family x target x amplitude) cell.
std::vector<AblationRow> run_noise_ablation(const Scorer& score,
                                            const std::vector<ModelInput>& test,
                                            const AblationOptions& opt);
// Baseline + each missing-CXR ratio.
std::vector<AblationRow> run_missing_cxr_ablation(const Scorer& score,
                                                  const std::vector<ModelInput>& test,
                                                  const AblationOptions& opt);

void write_ablation_csv(const std::vector<AblationRow>& rows,
                        const std::filesystem::path& file);

}  // namespace t2dm
