#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "t2dm/models.hpp"
#include "t2dm/nn.hpp"

namespace t2dm {

struct OptimizerConfig {
    enum class Kind { kAdam, kAdamW };
    Kind kind = Kind::kAdam;
    double lr = 1e-4;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double weight_decay = 0;  // decoupled; AdamW only
};

struct LrSchedule {
    enum class Kind { kConstant, kWarmupLinearDecay, kPlateau };
    Kind kind = Kind::kConstant;
    double warmup_frac = 0.1;     // warmup+decay: fraction of total steps
    double plateau_factor = 0.5;  // plateau: multiplier on stall
    int plateau_patience = 5;     // plateau: epochs without val-loss improvement
};

struct TrainConfig {
    std::string model = "vilt";        // vilt | resnet-lstm
    std::string strategy = "standard"; // standard | early (resnet-lstm only)
    int batch_size = 256;
    int max_epochs = 20;
    int patience = 2;  // early stopping on val AUROC, in epochs
    int validations_per_epoch = 2;
    OptimizerConfig optimizer;
    LrSchedule schedule;
    uint64_t seed = 0;

    static TrainConfig vilt_defaults();
    static TrainConfig resnet_lstm_defaults();
};

struct EpochRecord {
    int epoch = 0;
    int validation = 0;  // index of the validation event within the epoch
    double train_loss = 0;
    double val_loss = 0;
    double val_auroc = 0;
    double lr = 0;
    double seconds = 0;
};

struct RunHistory {
    std::vector<EpochRecord> records;
    void write_csv(const std::filesystem::path& file) const;
};

struct TrainOutcome {
    RunHistory history;
    double best_val_auroc = 0;
    int best_epoch = -1;
    bool stopped_early = false;
    long steps = 0;
    long skipped_steps = 0;  // non-finite gradient, update rejected
    std::filesystem::path best_weights;  // stem of saved checkpoint
};

// Model-agnostic handle: the trainer only needs the registry and a
// single-sample logit builder. When `loss` is set it replaces the default
// BCE-on-logit objective (the logit is still used for validation scoring).
struct ModelHandle {
    nn::ParamStore<float>* params = nullptr;
    std::function<nn::Var<float>(nn::Graph<float>&, const ModelInput&)> forward_logit;
    std::function<nn::Var<float>(nn::Graph<float>&, const ModelInput&)> loss;
};

// Mini-batch training with per-sample graphs, gradient averaging, early
// stopping on validation AUROC, and best-checkpoint restore. Writes
// config.json, history.csv and best.{json,bin} under run_dir.
TrainOutcome fit(const ModelHandle& model, const std::vector<ModelInput>& train,
                 const std::vector<ModelInput>& val, const TrainConfig& cfg,
                 const std::filesystem::path& run_dir);

// Strategy dispatch for the joint model: "standard" trains end to end;
// "early" pre-trains each encoder through its auxiliary head, then freezes
// the encoders and trains only the final classifier.
TrainOutcome train_resnet_lstm(ResnetLstmModelF& model, const std::vector<ModelInput>& train,
                               const std::vector<ModelInput>& val, const TrainConfig& cfg,
                               const std::filesystem::path& run_dir);

TrainOutcome train_vilt(ViltModelF& model, const std::vector<ModelInput>& train,
                        const std::vector<ModelInput>& val, const TrainConfig& cfg,
                        const std::filesystem::path& run_dir);

// Mean BCE and scores over a set (no graph retained).
double evaluate_loss(const ModelHandle& model, const std::vector<ModelInput>& samples);
std::vector<double> collect_scores(const ModelHandle& model,
                                   const std::vector<ModelInput>& samples);

}  // namespace t2dm
