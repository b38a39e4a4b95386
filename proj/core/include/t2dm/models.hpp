#pragma once

#include <optional>
#include <string>

#include "t2dm/dataset.hpp"
#include "t2dm/nn.hpp"

namespace t2dm {

// One sample converted to model-space tensors: standardized E/G, normalized
// image, masks carried as metadata.
struct ModelInput {
    nn::Tensor<float> ehr;    // rows x 11
    nn::Tensor<float> ecg;    // 100 x 12, empty when absent
    nn::Tensor<float> image;  // [3, s, s], channel-normalized
    std::vector<uint8_t> ehr_mask, ecg_mask;
    bool has_ecg = false;
    float y = 0;
    std::string id;
};

// Decodes the sample's stage-1 raster, applies the model-input transform and
// normalization from the dataset's CXR options.
ModelInput make_model_input(const Dataset& ds, const Sample& s);

struct ViltConfig {
    int d_h = 64;
    int layers = 2;
    int heads = 4;
    int mlp_ratio = 4;
    int patch = 8;
    int image_side = 64;
    bool include_ecg = true;
    int ehr_rows = 96;
    int ehr_features = kEhrFeatureCount;
    int ecg_rows = kEcgReducedRows;
    int ecg_leads = kEcgLeads;
    double layernorm_eps = 1e-5;
    bool learned_positions = false;  // fixed sinusoidal by default
    int pool_token = 0;              // first token of the concatenated sequence

    int image_tokens() const {
        int per_side = image_side / patch;
        return per_side * per_side;
    }
    int total_tokens() const {
        return (ehr_rows + 1) + (image_tokens() + 1) + (include_ecg ? ecg_rows + 1 : 0);
    }

    static ViltConfig toy() { return {}; }
    static ViltConfig full_scale() {
        ViltConfig c;
        c.d_h = 768;
        c.layers = 12;
        c.heads = 12;
        c.patch = 32;
        c.image_side = 384;
        return c;
    }
};

// Early fusion: per-modality token embeddings concatenated into a single
// transformer encoder; a binary head reads the pooled token.
template <class T>
class ViltModel {
public:
    ViltModel(const ViltConfig& cfg, uint64_t seed);

    const ViltConfig& config() const { return cfg_; }
    nn::ParamStore<T>& params() { return ps_; }

    // tokens [(rows+1) x d_h] for a tabular stream (EHR or ECG).
    nn::Var<T> embed_tabular_stream(nn::Graph<T>& g, const nn::Tensor<T>& x,
                                    const std::string& modality) const;
    nn::Var<T> embed_cxr(nn::Graph<T>& g, const nn::Tensor<T>& image) const;

    // Raw classifier logit; score = sigmoid(logit).
    nn::Var<T> forward_logit(nn::Graph<T>& g, const ModelInput& in) const;
    T score(const ModelInput& in) const;

    void reinit_image_encoder(uint64_t seed);

private:
    ViltConfig cfg_;
    nn::ParamStore<T> ps_;
    nn::Tensor<T> fixed_pos_ehr_, fixed_pos_ecg_, fixed_pos_cxr_;
    std::vector<nn::TransformerBlock<T>> blocks_;
    nn::Linear<T> head_;
};

struct ResnetLstmConfig {
    int lstm_hidden = 256;
    nn::ResidualCnnConfig cnn = nn::ResidualCnnConfig::toy();
    bool include_ecg = true;
    int ehr_features = kEhrFeatureCount;
    int ecg_leads = kEcgLeads;

    int concat_dim() const {
        return lstm_hidden + cnn.feature_dim() + (include_ecg ? lstm_hidden : 0);
    }
};

// Joint fusion: modality encoders (LSTM / LSTM / residual CNN) concatenated
// before a final fully connected classifier. The per-encoder auxiliary heads
// are used only by the early-training strategy's pre-training stage.
template <class T>
class ResnetLstmModel {
public:
    ResnetLstmModel(const ResnetLstmConfig& cfg, uint64_t seed);

    const ResnetLstmConfig& config() const { return cfg_; }
    nn::ParamStore<T>& params() { return ps_; }

    nn::Var<T> forward_logit(nn::Graph<T>& g, const ModelInput& in) const;
    // Per-encoder auxiliary logits (ehr, cxr, ecg?) for encoder pre-training.
    struct AuxLogits {
        nn::Var<T> ehr = nullptr, cxr = nullptr, ecg = nullptr;
    };
    AuxLogits forward_aux(nn::Graph<T>& g, const ModelInput& in) const;
    T score(const ModelInput& in) const;

    // Freeze/unfreeze the three encoders (early strategy stage 2 contract).
    void set_encoders_frozen(bool frozen);
    bool encoder_param(const std::string& name) const;

    void reinit_image_encoder(uint64_t seed);

private:
    ResnetLstmConfig cfg_;
    nn::ParamStore<T> ps_;
    nn::Lstm<T> ehr_lstm_, ecg_lstm_;
    nn::ResidualCnn<T> cnn_;
    nn::Linear<T> aux_ehr_, aux_ecg_, aux_cxr_, final_fc_;
};

using ViltModelF = ViltModel<float>;
using ResnetLstmModelF = ResnetLstmModel<float>;

}  // namespace t2dm
