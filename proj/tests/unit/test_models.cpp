#include <random>

#include "doctest.h"

#include "t2dm/models.hpp"
#include "t2dm/weights.hpp"

using namespace t2dm;

namespace {

ModelInput random_input(std::mt19937_64& rng, bool has_ecg, int ehr_rows = 96, int side = 64) {
    ModelInput in;
    in.has_ecg = has_ecg;
    std::normal_distribution<float> d(0, 1);
    in.ehr = nn::Tensor<float>::zeros({ehr_rows, kEhrFeatureCount});
    for (auto& v : in.ehr.data) v = d(rng);
    if (has_ecg) {
        in.ecg = nn::Tensor<float>::zeros({kEcgReducedRows, kEcgLeads});
        for (auto& v : in.ecg.data) v = d(rng);
    }
    in.image = nn::Tensor<float>::zeros({3, side, side});
    for (auto& v : in.image.data) v = d(rng);
    in.y = rng() % 2;
    return in;
}

}  // namespace

TEST_CASE("early-fusion token arithmetic") {
    ViltConfig cfg;  // toy: 96+1 EHR, 64+1 image, 100+1 ECG tokens
    CHECK(cfg.image_tokens() == 64);
    CHECK(cfg.total_tokens() == 97 + 65 + 101);
    cfg.include_ecg = false;
    CHECK(cfg.total_tokens() == 97 + 65);
    ViltConfig full = ViltConfig::full_scale();
    CHECK(full.image_tokens() == 144);
    CHECK(full.d_h == 768);
}

TEST_CASE("early-fusion forward produces a scalar logit and a (0,1) score") {
    std::mt19937_64 rng(1);
    ViltModelF model(ViltConfig::toy(), 7);
    ModelInput in = random_input(rng, true);
    nn::Graph<float> g;
    auto logit = model.forward_logit(g, in);
    CHECK(logit->val.shape == std::vector<int>{1, 1});
    float s = model.score(in);
    CHECK(s > 0);
    CHECK(s < 1);
    // same input, same score
    CHECK(model.score(in) == s);
}

TEST_CASE("variant mismatch is rejected by both models") {
    std::mt19937_64 rng(2);
    ViltConfig vc = ViltConfig::toy();
    vc.include_ecg = true;
    ViltModelF vilt(vc, 0);
    ModelInput no_ecg = random_input(rng, false);
    CHECK_THROWS_AS(vilt.score(no_ecg), DataError);

    ResnetLstmConfig rc;
    rc.lstm_hidden = 8;
    rc.include_ecg = false;
    ResnetLstmModelF joint(rc, 0);
    ModelInput with_ecg = random_input(rng, true);
    CHECK_THROWS_AS(joint.score(with_ecg), DataError);
}

TEST_CASE("joint model: concat dimension and auxiliary heads") {
    ResnetLstmConfig cfg;
    cfg.lstm_hidden = 16;
    CHECK(cfg.concat_dim() == 16 + cfg.cnn.feature_dim() + 16);
    CHECK(nn::ResidualCnnConfig::full_scale().feature_dim() == 2048);

    std::mt19937_64 rng(3);
    ResnetLstmModelF model(cfg, 4);
    ModelInput in = random_input(rng, true, 24, 32);
    nn::Graph<float> g;
    auto aux = model.forward_aux(g, in);
    CHECK(aux.ehr->val.size() == 1);
    CHECK(aux.cxr->val.size() == 1);
    CHECK(aux.ecg->val.size() == 1);
}

TEST_CASE("encoder freeze flags exactly the encoder parameters") {
    ResnetLstmConfig cfg;
    cfg.lstm_hidden = 8;
    ResnetLstmModelF model(cfg, 0);
    model.set_encoders_frozen(true);
    for (auto* p : model.params().all()) {
        if (model.encoder_param(p->name)) CHECK(p->frozen);
        else CHECK_FALSE(p->frozen);
    }
    model.set_encoders_frozen(false);
    for (auto* p : model.params().all()) CHECK_FALSE(p->frozen);
}

TEST_CASE("weights save/load round-trips scores exactly and validates names") {
    std::mt19937_64 rng(5);
    ViltConfig cfg = ViltConfig::toy();
    cfg.layers = 1;
    ViltModelF a(cfg, 11);
    ModelInput in = random_input(rng, true);
    float before = a.score(in);

    auto stem = std::filesystem::temp_directory_path() / "t2dm_unit_weights";
    save_weights(a.params(), stem);

    ViltModelF b(cfg, 999);  // different init
    CHECK(b.score(in) != before);
    load_weights(b.params(), stem);
    CHECK(b.score(in) == before);

    // mismatched registry is rejected
    ViltConfig other = cfg;
    other.d_h = 32;
    other.heads = 4;
    ViltModelF c(other, 0);
    CHECK_THROWS_AS(load_weights(c.params(), stem), DataError);
}

TEST_CASE("image-encoder reinit changes only image-path parameters") {
    ViltModelF m(ViltConfig::toy(), 3);
    auto ehr_before = m.params().get("ehr.proj").value.data;
    auto cxr_before = m.params().get("cxr.proj").value.data;
    m.reinit_image_encoder(77);
    CHECK(m.params().get("ehr.proj").value.data == ehr_before);
    CHECK(m.params().get("cxr.proj").value.data != cxr_before);
}
