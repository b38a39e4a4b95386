#include "t2dm/ablation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "t2dm/errors.hpp"

namespace t2dm {

std::string noise_family_name(NoiseFamily f) {
    switch (f) {
        case NoiseFamily::kGaussian: return "gaussian";
        case NoiseFamily::kPoisson: return "poisson";
        case NoiseFamily::kUniform: return "uniform";
        case NoiseFamily::kSaltPepper: return "salt_pepper";
    }
    return "?";
}

std::string noise_target_name(NoiseTarget t) {
    switch (t) {
        case NoiseTarget::kEhr: return "ehr";
        case NoiseTarget::kEcg: return "ecg";
        case NoiseTarget::kImage: return "image";
    }
    return "?";
}

namespace {

// Zero-mean additive draw scaled by the amplitude. Poisson uses
// a * (Pois(1) - 1) so its mean is zero as well.
template <class Rng>
float noise_draw(NoiseFamily f, double a, Rng& rng) {
    switch (f) {
        case NoiseFamily::kGaussian: {
            std::normal_distribution<double> d(0, 1);
            return static_cast<float>(a * d(rng));
        }
        case NoiseFamily::kUniform: {
            std::uniform_real_distribution<double> d(-a, a);
            return static_cast<float>(d(rng));
        }
        case NoiseFamily::kPoisson: {
            std::poisson_distribution<int> d(1.0);
            return static_cast<float>(a * (d(rng) - 1));
        }
        case NoiseFamily::kSaltPepper:
            throw ConfigError("salt_pepper is image-only");
    }
    return 0;
}

}  // namespace

ModelInput perturb_input(const ModelInput& in, const NoiseSpec& spec, uint64_t seed,
                         const double norm_mean[3], const double norm_std[3]) {
    ModelInput out = in;
    std::mt19937_64 rng(seed);
    switch (spec.target) {
        case NoiseTarget::kEhr:
            for (auto& v : out.ehr.data) v += noise_draw(spec.family, spec.amplitude, rng);
            break;
        case NoiseTarget::kEcg:
            if (!in.has_ecg) throw DataError("perturb_input: sample has no waveform channel");
            for (auto& v : out.ecg.data) v += noise_draw(spec.family, spec.amplitude, rng);
            break;
        case NoiseTarget::kImage: {
            const int side = out.image.shape[1];
            const size_t plane = static_cast<size_t>(side) * side;
            if (spec.family == NoiseFamily::kSaltPepper) {
                std::uniform_real_distribution<double> u(0, 1);
                std::bernoulli_distribution coin(0.5);
                for (size_t p = 0; p < plane; ++p) {
                    if (u(rng) >= spec.amplitude) continue;
                    float raw = coin(rng) ? 1.f : 0.f;
                    for (int c = 0; c < 3; ++c)
                        out.image.data[c * plane + p] =
                            static_cast<float>((raw - norm_mean[c]) / norm_std[c]);
                }
            } else {
                // Perturb in [0,1] space, clamp, re-normalize.
                for (int c = 0; c < 3; ++c)
                    for (size_t p = 0; p < plane; ++p) {
                        float& v = out.image.data[c * plane + p];
                        double raw = v * norm_std[c] + norm_mean[c];
                        raw += noise_draw(spec.family, spec.amplitude, rng);
                        raw = std::clamp(raw, 0.0, 1.0);
                        v = static_cast<float>((raw - norm_mean[c]) / norm_std[c]);
                    }
            }
            break;
        }
    }
    return out;
}

std::vector<ModelInput> mask_cxr_fraction(const std::vector<ModelInput>& inputs, double ratio,
                                          uint64_t seed, const double norm_mean[3],
                                          const double norm_std[3]) {
    if (ratio < 0 || ratio > 1) throw ConfigError("mask_cxr_fraction: ratio outside [0,1]");
    std::vector<ModelInput> out = inputs;
    size_t k = static_cast<size_t>(std::llround(ratio * static_cast<double>(inputs.size())));
    std::vector<size_t> idx(inputs.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (size_t i = 0; i < k; ++i) {
        ModelInput& s = out[idx[i]];
        const int side = s.image.shape[1];
        const size_t plane = static_cast<size_t>(side) * side;
        for (int c = 0; c < 3; ++c) {
            float v = static_cast<float>((0.0 - norm_mean[c]) / norm_std[c]);
            std::fill(s.image.data.begin() + c * plane, s.image.data.begin() + (c + 1) * plane, v);
        }
    }
    return out;
}

AblationRow evaluate_cell(const Scorer& score, const std::vector<ModelInput>& inputs,
                          const AblationOptions& opt) {
    std::vector<double> scores;
    std::vector<int> labels;
    scores.reserve(inputs.size());
    for (const ModelInput& s : inputs) {
        scores.push_back(score(s));
        labels.push_back(s.y > 0.5f ? 1 : 0);
    }
    AblationRow row;
    row.n = inputs.size();
    row.auroc = bootstrap_ci(scores, labels, &auroc, opt.bootstrap_iterations, opt.seed);
    row.auprc = bootstrap_ci(scores, labels, &auprc, opt.bootstrap_iterations, opt.seed + 1);
    return row;
}

std::vector<AblationRow> run_noise_ablation(const Scorer& score,
                                            const std::vector<ModelInput>& test,
                                            const AblationOptions& opt) {
    std::vector<AblationRow> rows;
    AblationRow base = evaluate_cell(score, test, opt);
    base.kind = "baseline";
    rows.push_back(base);

    struct Cell {
        NoiseFamily family;
        NoiseTarget target;
    };
    std::vector<Cell> cells;
    for (NoiseFamily f : {NoiseFamily::kGaussian, NoiseFamily::kPoisson, NoiseFamily::kUniform}) {
        cells.push_back({f, NoiseTarget::kEhr});
        if (opt.include_ecg) cells.push_back({f, NoiseTarget::kEcg});
    }
    for (NoiseFamily f :
         {NoiseFamily::kGaussian, NoiseFamily::kPoisson, NoiseFamily::kSaltPepper})
        cells.push_back({f, NoiseTarget::kImage});

    uint64_t cell_id = 0;
    for (const Cell& c : cells)
        for (double a : opt.amplitudes) {
            ++cell_id;
            std::vector<ModelInput> perturbed;
            perturbed.reserve(test.size());
            for (size_t i = 0; i < test.size(); ++i)
                perturbed.push_back(perturb_input(test[i], {c.family, c.target, a},
                                                  opt.seed * 7919 + cell_id * 104729 + i,
                                                  opt.norm_mean, opt.norm_std));
            AblationRow row = evaluate_cell(score, perturbed, opt);
            row.kind = "noise";
            row.family = noise_family_name(c.family);
            row.target = noise_target_name(c.target);
            row.amplitude = a;
            rows.push_back(row);
        }
    return rows;
}

std::vector<AblationRow> run_missing_cxr_ablation(const Scorer& score,
                                                  const std::vector<ModelInput>& test,
                                                  const AblationOptions& opt) {
    std::vector<AblationRow> rows;
    AblationRow base = evaluate_cell(score, test, opt);
    base.kind = "baseline";
    rows.push_back(base);
    // One seed for every ratio: the masked subsets are nested, so the
    // degradation is monotone in the ratio by construction of the probe.
    for (double r : opt.missing_ratios) {
        auto masked = mask_cxr_fraction(test, r, opt.seed, opt.norm_mean, opt.norm_std);
        AblationRow row = evaluate_cell(score, masked, opt);
        row.kind = "missing_cxr";
        row.target = "image";
        row.amplitude = r;
        rows.push_back(row);
    }
    return rows;
}

void write_ablation_csv(const std::vector<AblationRow>& rows,
                        const std::filesystem::path& file) {
    std::ofstream out(file);
    out << "kind,family,target,amplitude,n,auroc,auroc_lo,auroc_hi,auprc,auprc_lo,auprc_hi\n";
    for (const auto& r : rows)
        out << r.kind << ',' << r.family << ',' << r.target << ',' << r.amplitude << ',' << r.n
            << ',' << r.auroc.point << ',' << r.auroc.lo << ',' << r.auroc.hi << ','
            << r.auprc.point << ',' << r.auprc.lo << ',' << r.auprc.hi << '\n';
}

}  // namespace t2dm
