#include "t2dm/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "json.hpp"

#include "t2dm/metrics.hpp"
#include "t2dm/weights.hpp"

namespace t2dm {

TrainConfig TrainConfig::vilt_defaults() {
    TrainConfig c;
    c.model = "vilt";
    c.batch_size = 256;
    c.max_epochs = 20;
    c.patience = 2;
    c.optimizer.kind = OptimizerConfig::Kind::kAdamW;
    c.optimizer.lr = 1e-4;
    c.optimizer.weight_decay = 0.01;
    c.schedule.kind = LrSchedule::Kind::kWarmupLinearDecay;
    return c;
}

TrainConfig TrainConfig::resnet_lstm_defaults() {
    TrainConfig c;
    c.model = "resnet-lstm";
    c.batch_size = 64;
    c.max_epochs = 50;
    c.patience = 5;
    c.optimizer.kind = OptimizerConfig::Kind::kAdam;
    c.optimizer.lr = 1e-4;
    c.schedule.kind = LrSchedule::Kind::kPlateau;
    return c;
}

void RunHistory::write_csv(const std::filesystem::path& file) const {
    std::ofstream out(file);
    out << "epoch,validation,train_loss,val_loss,val_auroc,lr,seconds\n";
    for (const auto& r : records)
        out << r.epoch << ',' << r.validation << ',' << r.train_loss << ',' << r.val_loss << ','
            << r.val_auroc << ',' << r.lr << ',' << r.seconds << '\n';
}

namespace {

// Adam / AdamW with bias correction; decoupled weight decay. Frozen
// parameters are skipped. Returns false (and applies nothing) when any
// gradient is non-finite.
class Optimizer {
public:
    Optimizer(nn::ParamStore<float>& ps, const OptimizerConfig& cfg) : ps_(ps), cfg_(cfg) {
        for (nn::Param<float>* p : ps.all()) {
            m_[p->name].assign(p->value.data.size(), 0.f);
            v_[p->name].assign(p->value.data.size(), 0.f);
        }
    }

    bool step(double lr) {
        for (nn::Param<float>* p : ps_.all()) {
            if (p->frozen) continue;
            for (float g : p->grad.data)
                if (!std::isfinite(g)) return false;
        }
        ++t_;
        double bc1 = 1 - std::pow(cfg_.beta1, t_);
        double bc2 = 1 - std::pow(cfg_.beta2, t_);
        for (nn::Param<float>* p : ps_.all()) {
            if (p->frozen) continue;
            auto& m = m_[p->name];
            auto& v = v_[p->name];
            for (size_t i = 0; i < p->value.data.size(); ++i) {
                double g = p->grad.data[i];
                m[i] = static_cast<float>(cfg_.beta1 * m[i] + (1 - cfg_.beta1) * g);
                v[i] = static_cast<float>(cfg_.beta2 * v[i] + (1 - cfg_.beta2) * g * g);
                double mhat = m[i] / bc1, vhat = v[i] / bc2;
                double upd = lr * mhat / (std::sqrt(vhat) + cfg_.eps);
                if (cfg_.kind == OptimizerConfig::Kind::kAdamW && cfg_.weight_decay > 0)
                    upd += lr * cfg_.weight_decay * p->value.data[i];
                p->value.data[i] -= static_cast<float>(upd);
            }
        }
        return true;
    }

private:
    nn::ParamStore<float>& ps_;
    OptimizerConfig cfg_;
    long t_ = 0;
    std::map<std::string, std::vector<float>> m_, v_;
};

nlohmann::json config_json(const TrainConfig& c) {
    return {
        {"model", c.model},
        {"strategy", c.strategy},
        {"batch_size", c.batch_size},
        {"max_epochs", c.max_epochs},
        {"patience", c.patience},
        {"validations_per_epoch", c.validations_per_epoch},
        {"seed", c.seed},
        {"optimizer",
         {{"kind", c.optimizer.kind == OptimizerConfig::Kind::kAdamW ? "adamw" : "adam"},
          {"lr", c.optimizer.lr},
          {"beta1", c.optimizer.beta1},
          {"beta2", c.optimizer.beta2},
          {"eps", c.optimizer.eps},
          {"weight_decay", c.optimizer.weight_decay}}},
        {"schedule",
         {{"kind", c.schedule.kind == LrSchedule::Kind::kWarmupLinearDecay
                       ? "warmup_linear_decay"
                       : (c.schedule.kind == LrSchedule::Kind::kPlateau ? "plateau" : "constant")},
          {"warmup_frac", c.schedule.warmup_frac},
          {"plateau_factor", c.schedule.plateau_factor},
          {"plateau_patience", c.schedule.plateau_patience}}},
    };
}

}  // namespace

namespace {

nn::Var<float> sample_loss(const ModelHandle& model, nn::Graph<float>& g, const ModelInput& s) {
    if (model.loss) return model.loss(g, s);
    return g.bce_with_logit(model.forward_logit(g, s), s.y);
}

}  // namespace

double evaluate_loss(const ModelHandle& model, const std::vector<ModelInput>& samples) {
    if (samples.empty()) throw DataError("evaluate_loss: empty set");
    double acc = 0;
    for (const ModelInput& s : samples) {
        nn::Graph<float> g;
        acc += sample_loss(model, g, s)->val.data[0];
    }
    return acc / static_cast<double>(samples.size());
}

std::vector<double> collect_scores(const ModelHandle& model,
                                   const std::vector<ModelInput>& samples) {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const ModelInput& s : samples) {
        nn::Graph<float> g;
        float l = model.forward_logit(g, s)->val.data[0];
        out.push_back(1.0 / (1.0 + std::exp(-static_cast<double>(l))));
    }
    return out;
}

TrainOutcome fit(const ModelHandle& model, const std::vector<ModelInput>& train,
                 const std::vector<ModelInput>& val, const TrainConfig& cfg,
                 const std::filesystem::path& run_dir) {
    if (train.empty() || val.empty()) throw DataError("fit: empty train or val set");
    std::filesystem::create_directories(run_dir);
    {
        std::ofstream out(run_dir / "config.json");
        out << config_json(cfg).dump(2) << '\n';
    }

    nn::ParamStore<float>& ps = *model.params;
    Optimizer opt(ps, cfg.optimizer);

    const int nb = static_cast<int>((train.size() + cfg.batch_size - 1) / cfg.batch_size);
    const long total_steps = static_cast<long>(nb) * cfg.max_epochs;
    const long warmup_steps =
        std::max<long>(1, static_cast<long>(cfg.schedule.warmup_frac * total_steps));

    double lr_scale = 1.0;  // plateau schedule multiplier
    auto lr_at = [&](long step) {
        double base = cfg.optimizer.lr;
        switch (cfg.schedule.kind) {
            case LrSchedule::Kind::kWarmupLinearDecay:
                if (step < warmup_steps) return base * (step + 1) / warmup_steps;
                return base * static_cast<double>(total_steps - step) /
                       static_cast<double>(total_steps - warmup_steps);
            case LrSchedule::Kind::kPlateau:
                return base * lr_scale;
            default:
                return base;
        }
    };

    std::vector<int> labels;
    for (const ModelInput& s : val) labels.push_back(s.y > 0.5f ? 1 : 0);

    TrainOutcome out;
    double best_auroc = -1;
    std::map<std::string, std::vector<float>> best_values;
    double best_plateau_loss = std::numeric_limits<double>::infinity();
    int plateau_stall = 0;
    int epochs_since_best = 0;

    std::vector<size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    auto validate = [&](int epoch, int vidx, double train_loss, double seconds, double lr) {
        double vloss = evaluate_loss(model, val);
        if (!std::isfinite(vloss)) throw DivergenceError("validation loss is non-finite");
        double vauroc = auroc(collect_scores(model, val), labels);
        out.history.records.push_back({epoch, vidx, train_loss, vloss, vauroc, lr, seconds});
        if (vauroc > best_auroc) {
            best_auroc = vauroc;
            out.best_epoch = epoch;
            epochs_since_best = 0;
            best_values.clear();
            for (nn::Param<float>* p : ps.all()) best_values[p->name] = p->value.data;
        }
        return vloss;
    };

    for (int epoch = 0; epoch < cfg.max_epochs && !out.stopped_early; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        std::mt19937_64 rng(cfg.seed * 1000003ULL + static_cast<uint64_t>(epoch));
        std::shuffle(order.begin(), order.end(), rng);

        // Validation also fires mid-epoch; with v validations per epoch the
        // extra v-1 happen after batches nb*k/v.
        std::vector<int> val_after;
        for (int k = 1; k < cfg.validations_per_epoch; ++k)
            val_after.push_back(nb * k / cfg.validations_per_epoch);

        double epoch_loss = 0;
        long seen = 0;
        int vidx = 0;
        double epoch_end_vloss = 0;
        for (int b = 0; b < nb; ++b) {
            size_t lo = static_cast<size_t>(b) * cfg.batch_size;
            size_t hi = std::min(train.size(), lo + cfg.batch_size);
            float inv_b = 1.0f / static_cast<float>(hi - lo);
            ps.zero_grads();
            double batch_loss = 0;
            for (size_t i = lo; i < hi; ++i) {
                const ModelInput& s = train[order[i]];
                nn::Graph<float> g;
                nn::Var<float> loss = sample_loss(model, g, s);
                double lv = loss->val.data[0];
                if (!std::isfinite(lv)) throw DivergenceError("training loss is non-finite");
                batch_loss += lv;
                g.backward(loss, inv_b);
            }
            batch_loss *= inv_b;
            epoch_loss += batch_loss * (hi - lo);
            seen += static_cast<long>(hi - lo);

            double lr = lr_at(out.steps);
            if (opt.step(lr))
                ++out.steps;
            else
                ++out.skipped_steps;

            if (std::find(val_after.begin(), val_after.end(), b + 1) != val_after.end()) {
                auto t = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0);
                validate(epoch, vidx++, epoch_loss / seen, t.count(), lr);
            }
        }
        auto t = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0);
        epoch_end_vloss =
            validate(epoch, vidx, epoch_loss / seen, t.count(), lr_at(out.steps - 1));

        // Plateau schedule tracks end-of-epoch validation loss.
        if (cfg.schedule.kind == LrSchedule::Kind::kPlateau) {
            if (epoch_end_vloss < best_plateau_loss - 1e-6) {
                best_plateau_loss = epoch_end_vloss;
                plateau_stall = 0;
            } else if (++plateau_stall >= cfg.schedule.plateau_patience) {
                lr_scale *= cfg.schedule.plateau_factor;
                plateau_stall = 0;
            }
        }

        if (++epochs_since_best > cfg.patience) out.stopped_early = true;
    }

    // Restore and persist the best checkpoint.
    for (nn::Param<float>* p : ps.all())
        if (auto it = best_values.find(p->name); it != best_values.end()) p->value.data = it->second;
    out.best_val_auroc = best_auroc;
    out.best_weights = run_dir / "best";
    save_weights(ps, out.best_weights);
    out.history.write_csv(run_dir / "history.csv");
    return out;
}

TrainOutcome train_vilt(ViltModelF& model, const std::vector<ModelInput>& train,
                        const std::vector<ModelInput>& val, const TrainConfig& cfg,
                        const std::filesystem::path& run_dir) {
    ModelHandle h{&model.params(),
                  [&model](nn::Graph<float>& g, const ModelInput& s) {
                      return model.forward_logit(g, s);
                  }};
    return fit(h, train, val, cfg, run_dir);
}

TrainOutcome train_resnet_lstm(ResnetLstmModelF& model, const std::vector<ModelInput>& train,
                               const std::vector<ModelInput>& val, const TrainConfig& cfg,
                               const std::filesystem::path& run_dir) {
    ModelHandle joint{&model.params(),
                      [&model](nn::Graph<float>& g, const ModelInput& s) {
                          return model.forward_logit(g, s);
                      }};
    if (cfg.strategy == "standard") return fit(joint, train, val, cfg, run_dir);
    if (cfg.strategy != "early")
        throw ConfigError("unknown training strategy: " + cfg.strategy);

    // Stage 1: every encoder learns through its own auxiliary head; the loss
    // is the mean of the per-head BCEs, so gradients stay per-encoder. The
    // mean head logit serves as the validation score.
    ModelHandle stage1;
    stage1.params = &model.params();
    stage1.forward_logit = [&model](nn::Graph<float>& g, const ModelInput& s) {
        auto a = model.forward_aux(g, s);
        std::vector<nn::Var<float>> all = {a.ehr, a.cxr};
        if (a.ecg) all.push_back(a.ecg);
        return g.mean_all(g.concat_cols(all));
    };
    stage1.loss = [&model](nn::Graph<float>& g, const ModelInput& s) {
        auto a = model.forward_aux(g, s);
        std::vector<nn::Var<float>> losses = {g.bce_with_logit(a.ehr, s.y),
                                              g.bce_with_logit(a.cxr, s.y)};
        if (a.ecg) losses.push_back(g.bce_with_logit(a.ecg, s.y));
        return g.mean_all(g.concat_cols(losses));
    };
    TrainConfig s1 = cfg;
    s1.strategy = "standard";
    TrainOutcome o1 = fit(stage1, train, val, s1, run_dir / "stage1");

    // Stage 2: encoders frozen bit-for-bit, only the fusion classifier moves.
    model.set_encoders_frozen(true);
    TrainConfig s2 = cfg;
    s2.strategy = "standard";
    s2.seed = cfg.seed + 1;
    TrainOutcome o2 = fit(joint, train, val, s2, run_dir / "stage2");
    model.set_encoders_frozen(false);

    // Final artifacts mirror the single-stage layout.
    std::filesystem::create_directories(run_dir);
    save_weights(model.params(), run_dir / "best");
    o2.best_weights = run_dir / "best";
    o2.history.write_csv(run_dir / "history.csv");
    (void)o1;
    return o2;
}

}  // namespace t2dm
