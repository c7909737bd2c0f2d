#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ttt4rec/error.hpp"
#include "ttt4rec/rng.hpp"
#include "ttt4rec/trace.hpp"
#include "ttt4rec/ttt_layer.hpp"

namespace ttt4rec {

// One training/evaluation record: a user, a candidate item, the user's
// click sequence (left-padded with item id 0), and a binary click label.
struct Instance {
    int32_t user = 0;
    int32_t candidate = 0;
    std::vector<int32_t> sequence;
    int label = 0;
};

struct ModelConfig {
    int64_t vocab_size = 0;  // number of real items; embedding row 0 is padding
    int64_t embed_dim = 64;
    int64_t mlp_hidden = 128;
    int64_t max_seq_len = 50;
    TTTConfig ttt;

    void validate() const {
        if (vocab_size <= 0) throw ConfigError("model.vocab_size must be positive");
        if (embed_dim <= 0) throw ConfigError("model.embed_dim must be positive");
        if (mlp_hidden <= 0) throw ConfigError("model.mlp_hidden must be positive");
        if (max_seq_len <= 0) throw ConfigError("model.max_seq_len must be positive");
        ttt.validate();
        if (ttt.dim != embed_dim) {
            throw ConfigError("model.embed_dim and ttt.dim must agree");
        }
    }
};

// All learnable tensors. The embedding table is shared between the sequence
// side and the target tower; its row 0 embeds the padding token and stays
// zero for the model's whole life.
template <class S>
struct ModelParamsT {
    TensorT<S> embedding;  // (vocab_size+1) x K
    TTTParamsT<S> ttt;
    TensorT<S> mlp_w1;  // H x K
    TensorT<S> mlp_b1;  // H
    TensorT<S> mlp_w2;  // K x H
    TensorT<S> mlp_b2;  // K
};

using ModelParams = ModelParamsT<double>;

// Fixed parameter enumeration order; optimizer state, gradient accumulators
// and checkpoints all rely on it.
template <class S, class Fn>
void for_each_param(ModelParamsT<S>& p, Fn&& fn) {
    fn("embedding", p.embedding);
    fn("ttt.theta_k", p.ttt.theta_k);
    fn("ttt.theta_v", p.ttt.theta_v);
    fn("ttt.theta_q", p.ttt.theta_q);
    fn("ttt.w0", p.ttt.w0);
    fn("ttt.norm_gain", p.ttt.norm_gain);
    fn("mlp.w1", p.mlp_w1);
    fn("mlp.b1", p.mlp_b1);
    fn("mlp.w2", p.mlp_w2);
    fn("mlp.b2", p.mlp_b2);
}

template <class S, class Fn>
void for_each_param(const ModelParamsT<S>& p, Fn&& fn) {
    for_each_param(const_cast<ModelParamsT<S>&>(p),
                   [&](const char* name, TensorT<S>& t) { fn(name, static_cast<const TensorT<S>&>(t)); });
}

inline constexpr int kParamCount = 10;

// TTT parameters are drawn from normal(0, initializer_range); everything
// else uses normal(0, 0.02). The RMSNorm gain starts at ones and the
// padding embedding row is zeroed.
template <class S>
ModelParamsT<S> init_params(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    RngStream rng(derive_seed({seed, 0x1217u}));
    const int64_t k = cfg.embed_dim;
    const int64_t h = cfg.mlp_hidden;

    auto draw = [&](std::vector<int64_t> shape, double stddev) {
        TensorT<S> t(std::move(shape));
        for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<S>(rng.next_normal(0.0, stddev));
        return t;
    };

    ModelParamsT<S> p;
    p.embedding = draw({cfg.vocab_size + 1, k}, 0.02);
    for (int64_t j = 0; j < k; ++j) p.embedding.at(0, j) = S(0);
    p.ttt = init_ttt_params<S>(cfg.ttt, rng);
    p.mlp_w1 = draw({h, k}, 0.02);
    p.mlp_b1 = draw({h}, 0.02);
    p.mlp_w2 = draw({k, h}, 0.02);
    p.mlp_b2 = draw({k}, 0.02);
    return p;
}

// Trace handles for one forward pass.
template <class S>
struct BoundModelT {
    TraceT<S>* trace = nullptr;
    VarT<S> embedding;
    BoundTTTParamsT<S> ttt;
    VarT<S> mlp_w1, mlp_b1, mlp_w2, mlp_b2;

    // Leaf ids in for_each_param order, for gradient extraction.
    std::array<NodeId, kParamCount> leaf_ids{};
};

template <class S>
BoundModelT<S> bind_model(TraceT<S>& trace, const ModelParamsT<S>& p) {
    BoundModelT<S> b;
    b.trace = &trace;
    b.embedding = ops::make_leaf(trace, p.embedding);
    b.ttt = bind_ttt_params(trace, p.ttt);
    b.mlp_w1 = ops::make_leaf(trace, p.mlp_w1);
    b.mlp_b1 = ops::make_leaf(trace, p.mlp_b1);
    b.mlp_w2 = ops::make_leaf(trace, p.mlp_w2);
    b.mlp_b2 = ops::make_leaf(trace, p.mlp_b2);
    b.leaf_ids = {b.embedding.id,   b.ttt.theta_k.id, b.ttt.theta_v.id, b.ttt.theta_q.id,
                  b.ttt.w0.id,      b.ttt.norm_gain.id, b.mlp_w1.id,    b.mlp_b1.id,
                  b.mlp_w2.id,      b.mlp_b2.id};
    return b;
}

// Embeds a click sequence by row lookup; the valid mask marks nonzero ids.
template <class S>
std::pair<std::vector<VarT<S>>, std::vector<uint8_t>> embed_sequence(const BoundModelT<S>& m,
                                                                     std::span<const int32_t> sequence) {
    const int64_t rows = m.embedding.value().dim(0);
    std::vector<VarT<S>> tokens;
    std::vector<uint8_t> valid;
    tokens.reserve(sequence.size());
    valid.reserve(sequence.size());
    for (int32_t id : sequence) {
        if (id < 0 || id >= rows) {
            throw DataError("embed_sequence: item id " + std::to_string(id) +
                            " outside embedding table with " + std::to_string(rows) + " rows");
        }
        tokens.push_back(ops::gather_row(m.embedding, id));
        valid.push_back(id != 0 ? 1 : 0);
    }
    return {std::move(tokens), std::move(valid)};
}

inline constexpr double kRmsNormEps = 1e-6;

// Runs the TTT layer under the configured mini-batch schedule, takes the
// output at the last valid click, and RMS-normalizes it into F_s.
template <class S>
VarT<S> extract_sequence_features(const BoundModelT<S>& m, const ModelConfig& cfg,
                                  std::span<const VarT<S>> tokens, std::span<const uint8_t> valid) {
    auto outputs = forward_sequence_minibatch(m.ttt, tokens, valid, cfg.ttt.inner_lr,
                                              cfg.ttt.mini_batch_size);
    int64_t last_valid = -1;
    for (size_t t = 0; t < valid.size(); ++t) {
        if (valid[t]) last_valid = static_cast<int64_t>(t);
    }
    // forward_sequence_minibatch already rejects all-masked sequences.
    return ops::rms_normalize(outputs[static_cast<size_t>(last_valid)], m.ttt.norm_gain, kRmsNormEps);
}

template <class S>
VarT<S> sequence_features_for(const BoundModelT<S>& m, const ModelConfig& cfg,
                              std::span<const int32_t> sequence) {
    auto [tokens, valid] = embed_sequence(m, sequence);
    return extract_sequence_features(m, cfg, std::span<const VarT<S>>(tokens),
                                     std::span<const uint8_t>(valid));
}

// Two-layer MLP over the shared embedding of the candidate item:
//   F_t = W2 gelu(W1 e_y + b1) + b2.
template <class S>
VarT<S> target_tower(const BoundModelT<S>& m, int32_t candidate) {
    if (candidate == 0) throw DataError("target_tower: padding id 0 is not a valid candidate");
    const int64_t rows = m.embedding.value().dim(0);
    if (candidate < 0 || candidate >= rows) {
        throw DataError("target_tower: candidate id " + std::to_string(candidate) +
                        " outside embedding table with " + std::to_string(rows) + " rows");
    }
    VarT<S> e = ops::gather_row(m.embedding, candidate);
    VarT<S> hidden = ops::gelu(ops::add(ops::matmul(m.mlp_w1, e), m.mlp_b1));
    return ops::add(ops::matmul(m.mlp_w2, hidden), m.mlp_b2);
}

// Relevance score R = F_s . F_t.
template <class S>
VarT<S> score(VarT<S> f_s, VarT<S> f_t) {
    return ops::dot(f_s, f_t);
}

// Numerically stable sigmoid squashing of the score into a probability.
inline double predict_proba(double r) {
    if (!std::isfinite(r)) throw NumericError("predict_proba: score is non-finite");
    return static_cast<double>(detail::sigmoid_value(r));
}

// Mean binary cross-entropy of sigmoid(score) against the labels, built on
// the trace so backward() reaches every parameter. Sequence features are
// computed once per unique (user, sequence) and reused across that user's
// candidates. Uses BCE(logit r, label y) = softplus(r) - y * r.
template <class S>
VarT<S> batch_loss(const BoundModelT<S>& m, const ModelConfig& cfg,
                   std::span<const Instance> instances) {
    if (instances.empty()) throw Error("batch_loss: empty batch");
    std::map<std::pair<int32_t, std::vector<int32_t>>, VarT<S>> features;
    VarT<S> total;
    for (const Instance& inst : instances) {
        if (inst.label != 0 && inst.label != 1) {
            throw DataError("batch_loss: label must be 0 or 1, got " + std::to_string(inst.label));
        }
        auto key = std::make_pair(inst.user, inst.sequence);
        auto it = features.find(key);
        if (it == features.end()) {
            VarT<S> f_s = sequence_features_for(m, cfg, inst.sequence);
            it = features.emplace(std::move(key), f_s).first;
        }
        VarT<S> f_t = target_tower(m, inst.candidate);
        VarT<S> r = score(it->second, f_t);
        VarT<S> bce = ops::sub(ops::softplus(r), ops::scale(r, static_cast<double>(inst.label)));
        total = total.trace ? ops::add(total, bce) : bce;
    }
    return ops::scale(total, 1.0 / static_cast<double>(instances.size()));
}

}  // namespace ttt4rec
