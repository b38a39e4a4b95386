// Command-line front end: fixture generation, dataset builds, training,
// evaluation and ablations over a persisted dataset directory.

#include <fstream>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "json.hpp"

#include "t2dm/ablation.hpp"
#include "t2dm/dataset.hpp"
#include "t2dm/errors.hpp"
#include "t2dm/fixture.hpp"
#include "t2dm/metrics.hpp"
#include "t2dm/models.hpp"
#include "t2dm/report.hpp"
#include "t2dm/train.hpp"
#include "t2dm/weights.hpp"

using nlohmann::json;

namespace {

using namespace t2dm;

std::vector<ModelInput> inputs_for(const Dataset& ds, Split split) {
    std::vector<ModelInput> out;
    for (const Sample* s : ds.split(split)) out.push_back(make_model_input(ds, *s));
    return out;
}

json vilt_json(const ViltConfig& c) {
    return {{"d_h", c.d_h},       {"layers", c.layers},   {"heads", c.heads},
            {"mlp_ratio", c.mlp_ratio}, {"patch", c.patch}, {"image_side", c.image_side},
            {"include_ecg", c.include_ecg}, {"ehr_rows", c.ehr_rows}};
}
ViltConfig vilt_from_json(const json& j) {
    ViltConfig c;
    c.d_h = j.at("d_h");
    c.layers = j.at("layers");
    c.heads = j.at("heads");
    c.mlp_ratio = j.at("mlp_ratio");
    c.patch = j.at("patch");
    c.image_side = j.at("image_side");
    c.include_ecg = j.at("include_ecg");
    c.ehr_rows = j.at("ehr_rows");
    return c;
}

json resnet_json(const ResnetLstmConfig& c) {
    return {{"lstm_hidden", c.lstm_hidden},
            {"include_ecg", c.include_ecg},
            {"cnn",
             {{"stem_channels", c.cnn.stem_channels},
              {"stage_widths", c.cnn.stage_widths},
              {"blocks_per_stage", c.cnn.blocks_per_stage},
              {"expansion", c.cnn.expansion}}}};
}
ResnetLstmConfig resnet_from_json(const json& j) {
    ResnetLstmConfig c;
    c.lstm_hidden = j.at("lstm_hidden");
    c.include_ecg = j.at("include_ecg");
    c.cnn.stem_channels = j.at("cnn").at("stem_channels");
    c.cnn.stage_widths = j.at("cnn").at("stage_widths").get<std::vector<int>>();
    c.cnn.blocks_per_stage = j.at("cnn").at("blocks_per_stage").get<std::vector<int>>();
    c.cnn.expansion = j.at("cnn").at("expansion");
    return c;
}

// A trained run directory holds model.json + best.{json,bin}; this restores
// both model kinds behind one scoring interface.
struct LoadedModel {
    std::string type;
    std::unique_ptr<ViltModelF> vilt;
    std::unique_ptr<ResnetLstmModelF> resnet;

    double score(const ModelInput& in) const {
        return type == "vilt" ? static_cast<double>(vilt->score(in))
                              : static_cast<double>(resnet->score(in));
    }
    nn::ParamStore<float>& params() { return type == "vilt" ? vilt->params() : resnet->params(); }
};

LoadedModel load_run(const std::filesystem::path& run_dir) {
    std::ifstream mf(run_dir / "model.json");
    if (!mf) throw ConfigError("missing " + (run_dir / "model.json").string());
    json j = json::parse(mf);
    LoadedModel m;
    m.type = j.at("type");
    uint64_t seed = j.value("seed", 0);
    if (m.type == "vilt")
        m.vilt = std::make_unique<ViltModelF>(vilt_from_json(j.at("vilt")), seed);
    else if (m.type == "resnet-lstm")
        m.resnet = std::make_unique<ResnetLstmModelF>(resnet_from_json(j.at("resnet")), seed);
    else
        throw ConfigError("unknown model type in model.json: " + m.type);
    load_weights(m.params(), run_dir / "best");
    return m;
}

Split split_arg(const std::string& s) { return split_from_string(s); }

int run(int argc, char** argv) {
    CLI::App app{"multimodal ICU screening pipeline"};
    app.require_subcommand(1);

    // ---- genfixture
    auto* gen = app.add_subcommand("genfixture", "generate a synthetic raw corpus");
    FixtureConfig fc;
    std::string gen_out;
    bool null_cohort = false;
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--patients", fc.patients);
    gen->add_option("--prevalence", fc.prevalence);
    gen->add_option("--seed", fc.seed);
    gen->add_option("--ehr-signal", fc.ehr_signal_bpm);
    gen->add_option("--cxr-signal", fc.cxr_signal);
    gen->add_option("--ecg-signal", fc.ecg_signal);
    gen->add_flag("--null", null_cohort, "no class-conditional signal anywhere");
    gen->add_flag("--no-edge-cases", [&fc](int64_t) { fc.planted_edge_cases = false; },
                  "skip the planted structural oddities");

    // ---- build
    auto* build = app.add_subcommand("build", "build a dataset from a raw corpus");
    BuildOptions bo;
    std::string variant = "ecg", impute = "zero", features_file;
    build->add_option("--raw", bo.raw_dir, "raw corpus directory")->required();
    build->add_option("--out", bo.out_dir, "dataset output directory")->required();
    build->add_option("--variant", variant)->check(CLI::IsMember({"ecg", "no-ecg"}));
    build->add_option("--rate", bo.ehr.rate_min, "bin width, minutes");
    build->add_option("--duration", bo.ehr.duration_h, "observation window, hours");
    build->add_option("--impute", impute)->check(CLI::IsMember({"zero", "mean", "previous", "next"}));
    build->add_option("--seed", bo.seed);
    build->add_option("--train-frac", bo.r_train);
    build->add_option("--val-frac", bo.r_val);
    build->add_option("--test-frac", bo.r_test);
    build->add_flag("--split-by-patient", bo.split_by_patient);
    build->add_option("--features", features_file, "feature range/aggregator overrides");
    build->add_option("--stage1-side", bo.cxr.target_short_side);
    build->add_option("--image-side", bo.cxr.model_side);
    build->add_option("--filter-order", bo.filter_order);
    build->add_flag("--filtfilt", bo.filter_forward_backward, "forward-backward filtering");

    // ---- train
    auto* train = app.add_subcommand("train", "train a model on a dataset");
    std::string data_dir, model_kind = "vilt", strategy = "standard", run_dir;
    uint64_t train_seed = 0;
    int dh = 64, layers = 2, heads = 4, patch = 8, lstm_hidden = 64;
    bool full_scale = false;
    int epochs = -1, batch = -1, patience = -1;
    double lr = -1;
    train->add_option("--data", data_dir)->required();
    train->add_option("--out", run_dir, "run directory")->required();
    train->add_option("--model", model_kind)->check(CLI::IsMember({"vilt", "resnet-lstm"}));
    train->add_option("--strategy", strategy)->check(CLI::IsMember({"standard", "early"}));
    train->add_option("--seed", train_seed);
    train->add_option("--d-h", dh);
    train->add_option("--layers", layers);
    train->add_option("--heads", heads);
    train->add_option("--patch", patch);
    train->add_option("--lstm-hidden", lstm_hidden);
    train->add_flag("--full-scale", full_scale, "published-scale architecture");
    train->add_option("--epochs", epochs);
    train->add_option("--batch", batch);
    train->add_option("--patience", patience);
    train->add_option("--lr", lr);

    // ---- eval
    auto* eval = app.add_subcommand("eval", "evaluate a trained run on one split");
    std::string eval_data, eval_run, eval_split = "test", eval_out;
    uint64_t eval_seed = 0;
    int boots = 1000;
    eval->add_option("--data", eval_data)->required();
    eval->add_option("--run", eval_run)->required();
    eval->add_option("--split", eval_split)->check(CLI::IsMember({"train", "val", "test"}));
    eval->add_option("--out", eval_out, "metrics CSV path");
    eval->add_option("--bootstrap", boots);
    eval->add_option("--seed", eval_seed);

    // ---- ablate
    auto* ablate = app.add_subcommand("ablate", "test-time robustness probes");
    std::string ab_data, ab_run, ab_kind = "all", ab_out;
    uint64_t ab_seed = 0;
    int ab_boots = 1000;
    ablate->add_option("--data", ab_data)->required();
    ablate->add_option("--run", ab_run)->required();
    ablate->add_option("--kind", ab_kind)->check(CLI::IsMember({"noise", "missing", "all"}));
    ablate->add_option("--out", ab_out, "ablation CSV path");
    ablate->add_option("--bootstrap", ab_boots);
    ablate->add_option("--seed", ab_seed);

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed()) {
        if (null_cohort) {
            fc.ehr_signal_bpm = 0;
            fc.cxr_signal = 0;
            fc.ecg_signal = 0;
            fc.fh_rate_neg = fc.fh_rate_pos = 0.2;
        }
        FixtureSummary s = generate_cohort(fc, gen_out);
        std::cout << "patients " << s.patients << ", positives " << s.positives
                  << ", expected samples " << s.expected_samples << '\n';
        return 0;
    }

    if (build->parsed()) {
        bo.include_ecg = (variant == "ecg");
        bo.ehr.impute = impute_from_string(impute);
        if (!features_file.empty()) bo.features_config = features_file;
        BuildReport rep;
        Dataset ds = build_dataset(bo, &rep);
        std::cout << "episodes " << rep.episodes_extracted << ", samples " << rep.final_samples
                  << " (train " << rep.n_train << ", val " << rep.n_val << ", test " << rep.n_test
                  << ")\n"
                  << "dropped: no_events " << rep.dropped_no_events << ", no_cxr "
                  << rep.dropped_no_cxr << ", no_ecg " << rep.dropped_no_ecg << ", bad_image "
                  << rep.dropped_bad_image << '\n'
                  << "events: mapped " << rep.cleaning.mapped << ", unmapped "
                  << rep.cleaning.unmapped_label << ", out_of_range " << rep.cleaning.out_of_range
                  << ", out_of_window " << rep.cleaning.out_of_window << '\n'
                  << "input issues: " << rep.issues.size() << '\n';
        return 0;
    }

    if (train->parsed()) {
        Dataset ds = load_dataset(data_dir);
        auto tr = inputs_for(ds, Split::kTrain);
        auto va = inputs_for(ds, Split::kVal);
        std::cout << "loaded " << tr.size() << " train / " << va.size() << " val samples\n";

        TrainConfig cfg = model_kind == "vilt" ? TrainConfig::vilt_defaults()
                                               : TrainConfig::resnet_lstm_defaults();
        cfg.strategy = strategy;
        cfg.seed = train_seed;
        if (epochs > 0) cfg.max_epochs = epochs;
        if (batch > 0) cfg.batch_size = batch;
        if (patience >= 0) cfg.patience = patience;
        if (lr > 0) cfg.optimizer.lr = lr;

        json mj;
        TrainOutcome out;
        if (model_kind == "vilt") {
            ViltConfig vc = full_scale ? ViltConfig::full_scale() : ViltConfig::toy();
            if (!full_scale) {
                vc.d_h = dh;
                vc.layers = layers;
                vc.heads = heads;
                vc.patch = patch;
            }
            vc.include_ecg = ds.variant == "ecg";
            vc.ehr_rows = ds.ehr_opt.duration_h * 60 / ds.ehr_opt.rate_min;
            vc.image_side = ds.cxr_opt.model_side;
            ViltModelF model(vc, train_seed);
            out = train_vilt(model, tr, va, cfg, run_dir);
            mj = {{"type", "vilt"}, {"seed", train_seed}, {"vilt", vilt_json(vc)}};
        } else {
            ResnetLstmConfig rc;
            rc.cnn = full_scale ? nn::ResidualCnnConfig::full_scale()
                                : nn::ResidualCnnConfig::toy();
            rc.lstm_hidden = full_scale ? 256 : lstm_hidden;
            rc.include_ecg = ds.variant == "ecg";
            ResnetLstmModelF model(rc, train_seed);
            out = train_resnet_lstm(model, tr, va, cfg, run_dir);
            mj = {{"type", "resnet-lstm"}, {"seed", train_seed}, {"resnet", resnet_json(rc)}};
        }
        std::ofstream(std::filesystem::path(run_dir) / "model.json") << mj.dump(2) << '\n';
        std::cout << "best val auroc " << out.best_val_auroc << " (epoch " << out.best_epoch
                  << (out.stopped_early ? ", early stop" : "") << "), steps " << out.steps
                  << ", skipped " << out.skipped_steps << '\n';
        return 0;
    }

    if (eval->parsed()) {
        Dataset ds = load_dataset(eval_data);
        LoadedModel m = load_run(eval_run);
        auto samples = inputs_for(ds, split_arg(eval_split));
        std::vector<double> scores;
        std::vector<int> labels;
        for (const ModelInput& s : samples) {
            scores.push_back(m.score(s));
            labels.push_back(s.y > 0.5f ? 1 : 0);
        }
        MetricsReport rep = evaluate_scores(scores, labels, boots, eval_seed);
        std::cout << render_metrics(eval_split, rep);
        if (!eval_out.empty()) write_metrics_csv(rep, eval_out);
        return 0;
    }

    if (ablate->parsed()) {
        Dataset ds = load_dataset(ab_data);
        LoadedModel m = load_run(ab_run);
        auto test = inputs_for(ds, Split::kTest);
        AblationOptions opt;
        opt.include_ecg = ds.variant == "ecg";
        opt.bootstrap_iterations = ab_boots;
        opt.seed = ab_seed;
        for (int c = 0; c < 3; ++c) {
            opt.norm_mean[c] = ds.cxr_opt.norm_mean[c];
            opt.norm_std[c] = ds.cxr_opt.norm_std[c];
        }
        Scorer scorer = [&m](const ModelInput& s) { return m.score(s); };
        std::vector<AblationRow> rows;
        if (ab_kind != "missing")
            for (auto& r : run_noise_ablation(scorer, test, opt)) rows.push_back(r);
        if (ab_kind != "noise")
            for (auto& r : run_missing_cxr_ablation(scorer, test, opt)) rows.push_back(r);
        std::cout << render_ablation(rows);
        if (!ab_out.empty()) write_ablation_csv(rows, ab_out);
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const t2dm::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const t2dm::DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << '\n';
        return 3;
    } catch (const t2dm::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
