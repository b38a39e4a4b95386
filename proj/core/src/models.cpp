#include "t2dm/models.hpp"

#include <cmath>
#include <random>

namespace t2dm {

ModelInput make_model_input(const Dataset& ds, const Sample& s) {
    ModelInput in;
    in.id = s.id;
    in.y = static_cast<float>(s.y);
    in.has_ecg = s.has_ecg;
    in.ehr = nn::Tensor<float>({s.ehr.rows, kEhrFeatureCount}, s.ehr.values);
    if (s.has_ecg && !s.ecg.values.empty())
        in.ecg = nn::Tensor<float>({kEcgReducedRows, kEcgLeads}, s.ecg.values);
    in.ehr_mask.assign(s.ehr_mask.begin(), s.ehr_mask.end());
    in.ecg_mask.assign(s.ecg_mask.begin(), s.ecg_mask.end());

    CxrImage img = load_model_input(ds.root / s.image_png, ds.cxr_opt);
    in.image = nn::Tensor<float>({3, img.side, img.side},
                                 normalize_cxr(img, ds.cxr_opt.norm_mean, ds.cxr_opt.norm_std));
    return in;
}

// ---- ViLT-style early fusion ------------------------------------------------

template <class T>
ViltModel<T>::ViltModel(const ViltConfig& cfg, uint64_t seed) : cfg_(cfg) {
    if (cfg.image_side % cfg.patch != 0)
        throw ConfigError("vilt: image_side must be a multiple of patch");
    std::mt19937_64 rng(seed);
    const int d = cfg.d_h;

    auto add_modality = [&](const std::string& m, int feat, int tokens) {
        auto& proj = ps_.add(m + ".proj", {feat, d});
        nn::init_trunc_normal(proj.value, rng);
        auto& cls = ps_.add(m + ".cls", {1, d});
        nn::init_trunc_normal(cls.value, rng);
        auto& type = ps_.add(m + ".type", {1, d});
        nn::init_trunc_normal(type.value, rng);
        if (cfg.learned_positions) {
            auto& pos = ps_.add(m + ".pos", {tokens, d});
            nn::init_trunc_normal(pos.value, rng);
        }
    };
    add_modality("ehr", cfg.ehr_features, cfg.ehr_rows + 1);
    add_modality("cxr", 3 * cfg.patch * cfg.patch, cfg.image_tokens() + 1);
    if (cfg.include_ecg) add_modality("ecg", cfg.ecg_leads, cfg.ecg_rows + 1);

    if (!cfg.learned_positions) {
        fixed_pos_ehr_ = nn::sinusoidal_positions<T>(cfg.ehr_rows + 1, d);
        fixed_pos_cxr_ = nn::sinusoidal_positions<T>(cfg.image_tokens() + 1, d);
        if (cfg.include_ecg) fixed_pos_ecg_ = nn::sinusoidal_positions<T>(cfg.ecg_rows + 1, d);
    }

    nn::TransformerBlockConfig bc;
    bc.dim = d;
    bc.heads = cfg.heads;
    bc.mlp_ratio = cfg.mlp_ratio;
    bc.layernorm_eps = cfg.layernorm_eps;
    for (int l = 0; l < cfg.layers; ++l)
        blocks_.push_back(
            nn::TransformerBlock<T>::create(ps_, "blk" + std::to_string(l), bc, rng));

    auto& fg = ps_.add("final_ln.g", {1, d});
    ps_.add("final_ln.b", {1, d});
    std::fill(fg.value.data.begin(), fg.value.data.end(), T(1));
    head_ = nn::Linear<T>::create(ps_, "head", d, 1, rng);
}

template <class T>
nn::Var<T> ViltModel<T>::embed_tabular_stream(nn::Graph<T>& g, const nn::Tensor<T>& x,
                                              const std::string& modality) const {
    auto& self = const_cast<ViltModel<T>&>(*this);
    nn::Var<T> rows = g.matmul(g.input(x), g.leaf(self.ps_.get(modality + ".proj")));
    nn::Var<T> tokens = g.concat_rows({g.leaf(self.ps_.get(modality + ".cls")), rows});
    if (cfg_.learned_positions) {
        tokens = g.add(tokens, g.leaf(self.ps_.get(modality + ".pos")));
    } else {
        const nn::Tensor<T>& table = modality == "ehr" ? fixed_pos_ehr_ : fixed_pos_ecg_;
        tokens = g.add(tokens, g.input(table));
    }
    return g.add_rowvec(tokens, g.leaf(self.ps_.get(modality + ".type")));
}

template <class T>
nn::Var<T> ViltModel<T>::embed_cxr(nn::Graph<T>& g, const nn::Tensor<T>& image) const {
    auto& self = const_cast<ViltModel<T>&>(*this);
    const int p = cfg_.patch, side = cfg_.image_side;
    if (image.shape != std::vector<int>{3, side, side})
        throw DataError("vilt: image shape does not match configured side");
    const int per_side = side / p, n = per_side * per_side;
    // Flatten each p x p patch channel-major into one row.
    nn::Tensor<T> patches({n, 3 * p * p});
    for (int py = 0; py < per_side; ++py)
        for (int px = 0; px < per_side; ++px) {
            int row = py * per_side + px;
            int k = 0;
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < p; ++y)
                    for (int x = 0; x < p; ++x)
                        patches.at2(row, k++) = image.data[(static_cast<size_t>(c) * side +
                                                            py * p + y) *
                                                               side +
                                                           px * p + x];
        }
    nn::Var<T> rows = g.matmul(g.input(std::move(patches)), g.leaf(self.ps_.get("cxr.proj")));
    nn::Var<T> tokens = g.concat_rows({g.leaf(self.ps_.get("cxr.cls")), rows});
    if (cfg_.learned_positions)
        tokens = g.add(tokens, g.leaf(self.ps_.get("cxr.pos")));
    else
        tokens = g.add(tokens, g.input(fixed_pos_cxr_));
    return g.add_rowvec(tokens, g.leaf(self.ps_.get("cxr.type")));
}

template <class T>
nn::Var<T> ViltModel<T>::forward_logit(nn::Graph<T>& g, const ModelInput& in) const {
    if (cfg_.include_ecg != in.has_ecg)
        throw DataError("vilt: sample modality set does not match model variant (" +
                        std::string(cfg_.include_ecg ? "ecg" : "no-ecg") + " expected)");
    if (in.ehr.rows() != cfg_.ehr_rows)
        throw DataError("vilt: EHR row count does not match configured duration/rate");

    auto& self = const_cast<ViltModel<T>&>(*this);
    std::vector<nn::Var<T>> streams;
    streams.push_back(embed_tabular_stream(g, in.ehr.template cast<T>(), "ehr"));
    streams.push_back(embed_cxr(g, in.image.template cast<T>()));
    if (cfg_.include_ecg)
        streams.push_back(embed_tabular_stream(g, in.ecg.template cast<T>(), "ecg"));
    nn::Var<T> x = g.concat_rows(streams);

    // All tokens attend everywhere; carried masks are metadata only.
    std::vector<uint8_t> key_mask(static_cast<size_t>(cfg_.total_tokens()), 1);
    for (const auto& blk : blocks_) x = blk.forward(g, x, key_mask);

    x = g.layernorm(x, g.leaf(self.ps_.get("final_ln.g")), g.leaf(self.ps_.get("final_ln.b")),
                    static_cast<T>(cfg_.layernorm_eps));
    nn::Var<T> pooled = g.slice_rows(x, cfg_.pool_token, cfg_.pool_token + 1);
    return head_.forward(g, pooled);
}

template <class T>
T ViltModel<T>::score(const ModelInput& in) const {
    nn::Graph<T> g;
    T l = forward_logit(g, in)->val.data[0];
    return T(1) / (T(1) + std::exp(-l));
}

template <class T>
void ViltModel<T>::reinit_image_encoder(uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (const char* n : {"cxr.proj", "cxr.cls", "cxr.type"})
        nn::init_trunc_normal(ps_.get(n).value, rng);
    if (cfg_.learned_positions) nn::init_trunc_normal(ps_.get("cxr.pos").value, rng);
}

// ---- ResNet-LSTM joint fusion -----------------------------------------------

template <class T>
ResnetLstmModel<T>::ResnetLstmModel(const ResnetLstmConfig& cfg, uint64_t seed) : cfg_(cfg) {
    std::mt19937_64 rng(seed);
    ehr_lstm_ = nn::Lstm<T>::create(ps_, "ehr_lstm", cfg.ehr_features, cfg.lstm_hidden, rng);
    cnn_ = nn::ResidualCnn<T>::create(ps_, "cnn", cfg.cnn, rng);
    if (cfg.include_ecg)
        ecg_lstm_ = nn::Lstm<T>::create(ps_, "ecg_lstm", cfg.ecg_leads, cfg.lstm_hidden, rng);
    aux_ehr_ = nn::Linear<T>::create(ps_, "aux_ehr", cfg.lstm_hidden, 1, rng);
    aux_cxr_ = nn::Linear<T>::create(ps_, "aux_cxr", cfg.cnn.feature_dim(), 1, rng);
    if (cfg.include_ecg)
        aux_ecg_ = nn::Linear<T>::create(ps_, "aux_ecg", cfg.lstm_hidden, 1, rng);
    final_fc_ = nn::Linear<T>::create(ps_, "final", cfg.concat_dim(), 1, rng);
}

template <class T>
nn::Var<T> ResnetLstmModel<T>::forward_logit(nn::Graph<T>& g, const ModelInput& in) const {
    if (cfg_.include_ecg != in.has_ecg)
        throw DataError("resnet-lstm: sample modality set does not match model variant");
    nn::Var<T> e = ehr_lstm_.forward(g, g.input(in.ehr.template cast<T>())).final_hidden;
    nn::Var<T> c = cnn_.forward(g, g.input(in.image.template cast<T>()));
    std::vector<nn::Var<T>> feats = {e, c};
    if (cfg_.include_ecg)
        feats.push_back(ecg_lstm_.forward(g, g.input(in.ecg.template cast<T>())).final_hidden);
    return final_fc_.forward(g, g.concat_cols(feats));
}

template <class T>
typename ResnetLstmModel<T>::AuxLogits ResnetLstmModel<T>::forward_aux(
    nn::Graph<T>& g, const ModelInput& in) const {
    if (cfg_.include_ecg != in.has_ecg)
        throw DataError("resnet-lstm: sample modality set does not match model variant");
    AuxLogits out;
    out.ehr = aux_ehr_.forward(
        g, ehr_lstm_.forward(g, g.input(in.ehr.template cast<T>())).final_hidden);
    out.cxr = aux_cxr_.forward(g, cnn_.forward(g, g.input(in.image.template cast<T>())));
    if (cfg_.include_ecg)
        out.ecg = aux_ecg_.forward(
            g, ecg_lstm_.forward(g, g.input(in.ecg.template cast<T>())).final_hidden);
    return out;
}

template <class T>
T ResnetLstmModel<T>::score(const ModelInput& in) const {
    nn::Graph<T> g;
    T l = forward_logit(g, in)->val.data[0];
    return T(1) / (T(1) + std::exp(-l));
}

template <class T>
bool ResnetLstmModel<T>::encoder_param(const std::string& name) const {
    return name.rfind("ehr_lstm.", 0) == 0 || name.rfind("ecg_lstm.", 0) == 0 ||
           name.rfind("cnn.", 0) == 0;
}

template <class T>
void ResnetLstmModel<T>::set_encoders_frozen(bool frozen) {
    for (nn::Param<T>* p : ps_.all())
        if (encoder_param(p->name)) p->frozen = frozen;
}

template <class T>
void ResnetLstmModel<T>::reinit_image_encoder(uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (nn::Param<T>* p : ps_.all()) {
        if (p->name.rfind("cnn.", 0) != 0) continue;
        // Re-run the layer's init rule: affine gains back to 1, shifts and
        // biases to 0, conv weights re-drawn.
        auto ends_with = [&](const char* suf) {
            std::string s(suf);
            return p->name.size() >= s.size() &&
                   p->name.compare(p->name.size() - s.size(), s.size(), s) == 0;
        };
        if (ends_with(".g"))
            std::fill(p->value.data.begin(), p->value.data.end(), T(1));
        else if (ends_with(".beta") || ends_with(".b"))
            std::fill(p->value.data.begin(), p->value.data.end(), T(0));
        else if (ends_with(".w")) {
            int fan_out = p->value.shape[0] * p->value.shape[2] * p->value.shape[3];
            nn::init_kaiming_fan_out(p->value, rng, fan_out);
        }
    }
}

template class ViltModel<float>;
template class ViltModel<double>;
template class ResnetLstmModel<float>;
template class ResnetLstmModel<double>;

}  // namespace t2dm
