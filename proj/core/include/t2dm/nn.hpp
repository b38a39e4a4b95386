#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "t2dm/graph.hpp"

namespace t2dm::nn {

// Owns every trainable tensor of a model; the optimizer walks this registry.
template <class T>
class ParamStore {
public:
    Param<T>& add(const std::string& name, std::vector<int> shape) {
        if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
        auto p = std::make_unique<Param<T>>();
        p->name = name;
        p->value = Tensor<T>::zeros(shape);
        p->grad = Tensor<T>::zeros(shape);
        index_[name] = params_.size();
        params_.push_back(std::move(p));
        return *params_.back();
    }

    Param<T>& get(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
        return *params_[it->second];
    }
    bool has(const std::string& name) const { return index_.count(name) > 0; }

    std::vector<Param<T>*> all() {
        std::vector<Param<T>*> out;
        for (auto& p : params_) out.push_back(p.get());
        return out;
    }
    size_t size() const { return params_.size(); }

    void zero_grads() {
        for (auto& p : params_) p->zero_grad();
    }

private:
    std::vector<std::unique_ptr<Param<T>>> params_;
    std::map<std::string, size_t> index_;
};

template <class T>
using Var = typename Graph<T>::Var;

// y = x W + b
template <class T>
struct Linear {
    Param<T>* w = nullptr;
    Param<T>* b = nullptr;

    static Linear create(ParamStore<T>& ps, const std::string& name, int in, int out,
                         std::mt19937_64& rng) {
        Linear l;
        l.w = &ps.add(name + ".w", {in, out});
        l.b = &ps.add(name + ".b", {1, out});
        init_trunc_normal(l.w->value, rng);
        return l;
    }

    Var<T> forward(Graph<T>& g, Var<T> x) const {
        return g.add_rowvec(g.matmul(x, g.leaf(*w)), g.leaf(*b));
    }
};

// Multi-head self-attention over one [L x d] sequence. key_mask marks tokens
// admissible as attention targets; masked tokens contribute no weight.
template <class T>
struct MultiHeadSelfAttention {
    int dim = 0, heads = 0;
    Linear<T> wq, wk, wv, wo;

    static MultiHeadSelfAttention create(ParamStore<T>& ps, const std::string& name, int dim,
                                         int heads, std::mt19937_64& rng) {
        if (dim % heads != 0) throw ConfigError("mhsa: dim must be divisible by heads");
        MultiHeadSelfAttention m;
        m.dim = dim;
        m.heads = heads;
        m.wq = Linear<T>::create(ps, name + ".q", dim, dim, rng);
        m.wk = Linear<T>::create(ps, name + ".k", dim, dim, rng);
        m.wv = Linear<T>::create(ps, name + ".v", dim, dim, rng);
        m.wo = Linear<T>::create(ps, name + ".o", dim, dim, rng);
        return m;
    }

    Var<T> forward(Graph<T>& g, Var<T> x, const std::vector<uint8_t>& key_mask) const {
        const int dk = dim / heads;
        const T inv_sqrt_dk = T(1) / std::sqrt(static_cast<T>(dk));
        Var<T> q = wq.forward(g, x), k = wk.forward(g, x), v = wv.forward(g, x);
        std::vector<Var<T>> head_outs;
        for (int h = 0; h < heads; ++h) {
            Var<T> qh = g.slice_cols(q, h * dk, (h + 1) * dk);
            Var<T> kh = g.slice_cols(k, h * dk, (h + 1) * dk);
            Var<T> vh = g.slice_cols(v, h * dk, (h + 1) * dk);
            Var<T> scores = g.scale(g.matmul(qh, g.transpose(kh)), inv_sqrt_dk);
            Var<T> attn = g.softmax_rows(scores, &key_mask);
            head_outs.push_back(g.matmul(attn, vh));
        }
        // Recombine heads along the feature axis.
        Var<T> cat = head_outs.size() == 1 ? head_outs[0] : concat_features(g, head_outs);
        return wo.forward(g, cat);
    }

private:
    static Var<T> concat_features(Graph<T>& g, const std::vector<Var<T>>& parts) {
        // concat along columns: transpose -> concat_rows -> transpose
        std::vector<Var<T>> t;
        t.reserve(parts.size());
        for (Var<T> p : parts) t.push_back(g.transpose(p));
        return g.transpose(g.concat_rows(t));
    }
};

struct TransformerBlockConfig {
    int dim = 64;
    int heads = 4;
    int mlp_ratio = 4;
    double layernorm_eps = 1e-5;
};

// Pre-norm residual block: x + MHSA(LN(x)), then + MLP(LN(.)) with GELU.
template <class T>
struct TransformerBlock {
    TransformerBlockConfig cfg;
    MultiHeadSelfAttention<T> attn;
    Linear<T> fc1, fc2;
    Param<T>*ln1_g = nullptr, *ln1_b = nullptr, *ln2_g = nullptr, *ln2_b = nullptr;

    static TransformerBlock create(ParamStore<T>& ps, const std::string& name,
                                   const TransformerBlockConfig& cfg, std::mt19937_64& rng) {
        TransformerBlock b;
        b.cfg = cfg;
        b.attn = MultiHeadSelfAttention<T>::create(ps, name + ".attn", cfg.dim, cfg.heads, rng);
        b.fc1 = Linear<T>::create(ps, name + ".mlp.fc1", cfg.dim, cfg.dim * cfg.mlp_ratio, rng);
        b.fc2 = Linear<T>::create(ps, name + ".mlp.fc2", cfg.dim * cfg.mlp_ratio, cfg.dim, rng);
        b.ln1_g = &ps.add(name + ".ln1.g", {1, cfg.dim});
        b.ln1_b = &ps.add(name + ".ln1.b", {1, cfg.dim});
        b.ln2_g = &ps.add(name + ".ln2.g", {1, cfg.dim});
        b.ln2_b = &ps.add(name + ".ln2.b", {1, cfg.dim});
        std::fill(b.ln1_g->value.data.begin(), b.ln1_g->value.data.end(), T(1));
        std::fill(b.ln2_g->value.data.begin(), b.ln2_g->value.data.end(), T(1));
        return b;
    }

    Var<T> forward(Graph<T>& g, Var<T> x, const std::vector<uint8_t>& key_mask) const {
        Var<T> h = g.add(x, attn.forward(g, g.layernorm(x, g.leaf(*ln1_g), g.leaf(*ln1_b),
                                                        static_cast<T>(cfg.layernorm_eps)),
                                         key_mask));
        Var<T> n2 = g.layernorm(h, g.leaf(*ln2_g), g.leaf(*ln2_b),
                                static_cast<T>(cfg.layernorm_eps));
        return g.add(h, fc2.forward(g, g.gelu(fc1.forward(g, n2))));
    }
};

// Single-layer LSTM; gate order i, f, g, o. Zero initial state, forget-gate
// bias 1.
template <class T>
struct Lstm {
    int input_dim = 0, hidden = 0;
    Param<T>*w = nullptr, *u = nullptr, *b = nullptr;

    static Lstm create(ParamStore<T>& ps, const std::string& name, int input_dim, int hidden,
                       std::mt19937_64& rng) {
        Lstm l;
        l.input_dim = input_dim;
        l.hidden = hidden;
        l.w = &ps.add(name + ".w", {input_dim, 4 * hidden});
        l.u = &ps.add(name + ".u", {hidden, 4 * hidden});
        l.b = &ps.add(name + ".b", {1, 4 * hidden});
        init_uniform_fan_in(l.w->value, rng, hidden);
        init_uniform_fan_in(l.u->value, rng, hidden);
        for (int j = hidden; j < 2 * hidden; ++j) l.b->value.data[j] = T(1);
        return l;
    }

    struct Out {
        Var<T> all_hidden;   // [T x hidden]
        Var<T> final_hidden; // [1 x hidden]
    };

    Out forward(Graph<T>& g, Var<T> seq) const {
        const int steps = seq->val.rows();
        if (steps == 0) throw DataError("lstm: empty sequence");
        const int H = hidden;
        Var<T> xw = g.matmul(seq, g.leaf(*w));  // [T x 4H]
        Var<T> bias = g.leaf(*b);
        Var<T> uleaf = g.leaf(*u);
        Var<T> h = g.input(Tensor<T>::zeros({1, H}));
        Var<T> c = g.input(Tensor<T>::zeros({1, H}));
        std::vector<Var<T>> hs;
        hs.reserve(steps);
        for (int t = 0; t < steps; ++t) {
            Var<T> z = g.add_rowvec(g.add(g.slice_rows(xw, t, t + 1), g.matmul(h, uleaf)), bias);
            Var<T> i = g.sigmoid(g.slice_cols(z, 0, H));
            Var<T> f = g.sigmoid(g.slice_cols(z, H, 2 * H));
            Var<T> gg = g.tanh_op(g.slice_cols(z, 2 * H, 3 * H));
            Var<T> o = g.sigmoid(g.slice_cols(z, 3 * H, 4 * H));
            c = g.add(g.mul(f, c), g.mul(i, gg));
            h = g.mul(o, g.tanh_op(c));
            hs.push_back(h);
        }
        return {g.concat_rows(hs), h};
    }
};

struct ResidualCnnConfig {
    int in_channels = 3;
    int stem_channels = 16;
    int stem_stride = 2;
    std::vector<int> stage_widths = {8, 16, 32};  // bottleneck mid widths
    std::vector<int> blocks_per_stage = {1, 1, 1};
    int expansion = 4;
    int feature_dim() const { return stage_widths.back() * expansion; }

    static ResidualCnnConfig toy() { return {}; }
    static ResidualCnnConfig full_scale() {
        ResidualCnnConfig c;
        c.stem_channels = 64;
        c.stage_widths = {64, 128, 256, 512};
        c.blocks_per_stage = {3, 4, 6, 3};
        return c;  // pooled output 2048
    }
};

// Bottleneck residual CNN: stem conv, stages of 1x1 -> 3x3 -> 1x1 blocks with
// per-channel affine after each conv, global average pool.
template <class T>
struct ResidualCnn {
    struct Conv {
        Param<T>*w = nullptr, *b = nullptr;
        Param<T>*gamma = nullptr, *beta = nullptr;  // channel affine
        int stride = 1, pad = 0;
    };
    struct Block {
        Conv reduce, spatial, expand;
        std::optional<Conv> downsample;  // 1x1 projection on the skip path
    };

    ResidualCnnConfig cfg;
    Conv stem;
    std::vector<std::vector<Block>> stages;

    static Conv make_conv(ParamStore<T>& ps, const std::string& name, int in, int out, int k,
                          int stride, int pad, std::mt19937_64& rng) {
        Conv c;
        c.w = &ps.add(name + ".w", {out, in, k, k});
        c.b = &ps.add(name + ".b", {1, out});
        c.gamma = &ps.add(name + ".g", {1, out});
        c.beta = &ps.add(name + ".beta", {1, out});
        std::fill(c.gamma->value.data.begin(), c.gamma->value.data.end(), T(1));
        init_kaiming_fan_out(c.w->value, rng, out * k * k);
        c.stride = stride;
        c.pad = pad;
        return c;
    }

    static ResidualCnn create(ParamStore<T>& ps, const std::string& name,
                              const ResidualCnnConfig& cfg, std::mt19937_64& rng) {
        ResidualCnn net;
        net.cfg = cfg;
        net.stem = make_conv(ps, name + ".stem", cfg.in_channels, cfg.stem_channels, 3,
                             cfg.stem_stride, 1, rng);
        int in_ch = cfg.stem_channels;
        for (size_t s = 0; s < cfg.stage_widths.size(); ++s) {
            std::vector<Block> blocks;
            int mid = cfg.stage_widths[s];
            int out_ch = mid * cfg.expansion;
            for (int bk = 0; bk < cfg.blocks_per_stage[s]; ++bk) {
                int stride = (bk == 0 && s > 0) ? 2 : 1;
                std::string bn = name + ".s" + std::to_string(s) + ".b" + std::to_string(bk);
                Block blk;
                blk.reduce = make_conv(ps, bn + ".reduce", in_ch, mid, 1, 1, 0, rng);
                blk.spatial = make_conv(ps, bn + ".spatial", mid, mid, 3, stride, 1, rng);
                blk.expand = make_conv(ps, bn + ".expand", mid, out_ch, 1, 1, 0, rng);
                if (stride != 1 || in_ch != out_ch)
                    blk.downsample = make_conv(ps, bn + ".down", in_ch, out_ch, 1, stride, 0, rng);
                blocks.push_back(std::move(blk));
                in_ch = out_ch;
            }
            net.stages.push_back(std::move(blocks));
        }
        return net;
    }

    static Var<T> apply_conv(Graph<T>& g, const Conv& c, Var<T> x) {
        Var<T> y = g.conv2d(x, g.leaf(*c.w), g.leaf(*c.b), c.stride, c.pad);
        return g.channel_affine(y, g.leaf(*c.gamma), g.leaf(*c.beta));
    }

    // image [3,s,s] -> pooled feature [1 x feature_dim]
    Var<T> forward(Graph<T>& g, Var<T> image) const {
        Var<T> x = g.relu(apply_conv(g, stem, image));
        for (const auto& stage : stages) {
            for (const auto& blk : stage) {
                Var<T> skip = blk.downsample ? apply_conv(g, *blk.downsample, x) : x;
                Var<T> y = g.relu(apply_conv(g, blk.reduce, x));
                y = g.relu(apply_conv(g, blk.spatial, y));
                y = apply_conv(g, blk.expand, y);
                x = g.relu(g.add(y, skip));
            }
        }
        return g.global_avg_pool(x);
    }
};

// Fixed sinusoidal positional table [len x dim].
template <class T>
Tensor<T> sinusoidal_positions(int len, int dim) {
    Tensor<T> out({len, dim});
    for (int pos = 0; pos < len; ++pos)
        for (int i = 0; i < dim; ++i) {
            double angle = pos / std::pow(10000.0, 2.0 * (i / 2) / dim);
            out.at2(pos, i) = static_cast<T>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
        }
    return out;
}

// Central finite differences on a seeded coordinate subset of each listed
// parameter. `loss_fn` rebuilds the graph and returns the scalar loss.
struct GradCheckResult {
    double max_rel_error = 0;
    std::string worst_coordinate;
};

template <class T>
GradCheckResult grad_check(ParamStore<T>& ps, const std::vector<Param<T>*>& params,
                           const std::function<T()>& loss_fn,
                           const std::function<void()>& backward_fn, double epsilon = 1e-5,
                           int coords_per_param = 24, uint64_t seed = 0) {
    ps.zero_grads();
    loss_fn();
    backward_fn();

    // Snapshot analytic grads before the probes disturb anything.
    std::map<Param<T>*, std::vector<T>> analytic;
    for (Param<T>* p : params) analytic[p] = p->grad.data;

    std::mt19937_64 rng(seed);
    GradCheckResult res;
    for (Param<T>* p : params) {
        int64_t n = p->value.size();
        int probes = static_cast<int>(std::min<int64_t>(n, coords_per_param));
        std::vector<int64_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        for (int k = 0; k < probes; ++k) {
            int64_t i = idx[k];
            T saved = p->value.data[i];
            p->value.data[i] = saved + static_cast<T>(epsilon);
            T lp = loss_fn();
            p->value.data[i] = saved - static_cast<T>(epsilon);
            T lm = loss_fn();
            p->value.data[i] = saved;
            double numeric = (static_cast<double>(lp) - static_cast<double>(lm)) / (2 * epsilon);
            double exact = static_cast<double>(analytic[p][i]);
            // The floor keeps finite-difference noise on near-zero gradients
            // (absolute error ~1e-10 at 64-bit) from dominating the ratio.
            double denom = std::max({std::abs(numeric), std::abs(exact), 1e-5});
            double rel = std::abs(numeric - exact) / denom;
            if (rel > res.max_rel_error) {
                res.max_rel_error = rel;
                res.worst_coordinate = p->name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return res;
}

}  // namespace t2dm::nn
