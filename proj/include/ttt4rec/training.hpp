#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "ttt4rec/data.hpp"
#include "ttt4rec/error.hpp"
#include "ttt4rec/eval.hpp"
#include "ttt4rec/model.hpp"

namespace ttt4rec {

struct TrainConfig {
    double outer_lr = 0.001;
    int epochs = 10;
    int batch_size = 256;  // positive instances per optimizer step
    uint64_t seed = 42;
    bool eval_every_epoch = true;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double grad_clip_norm = 0.0;  // 0 disables clipping
    int threads = 1;
    SplitOptions split;
    int train_negatives = 4;  // 1:4 positive:negative composition
    int eval_negatives = 99;  // 1:99 at test time

    void validate() const {
        if (outer_lr <= 0.0) throw ConfigError("train.outer_lr must be positive");
        if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
        if (train_negatives < 0) throw ConfigError("train.train_negatives must be >= 0");
        if (eval_negatives < 1) throw ConfigError("train.eval_negatives must be >= 1");
        if (threads < 1) throw ConfigError("train.threads must be >= 1");
        if (grad_clip_norm < 0.0) throw ConfigError("train.grad_clip_norm must be >= 0");
    }
};

// Gradient tensors in for_each_param order.
template <class S>
struct ParamGradsT {
    std::vector<TensorT<S>> grads;

    static ParamGradsT zeros_like(const ModelParamsT<S>& params) {
        ParamGradsT g;
        g.grads.reserve(kParamCount);
        for_each_param(params, [&](const char*, const TensorT<S>& t) {
            g.grads.push_back(TensorT<S>::zeros(t.shape()));
        });
        return g;
    }

    void add_scaled(const ParamGradsT& other, S factor) {
        for (size_t i = 0; i < grads.size(); ++i) {
            TensorT<S>& dst = grads[i];
            const TensorT<S>& src = other.grads[i];
            for (int64_t j = 0; j < dst.numel(); ++j) dst[j] += factor * src[j];
        }
    }
};

// Adam moments mirroring every parameter, plus the shared step counter.
template <class S>
struct OptimizerStateT {
    std::vector<TensorT<S>> m;
    std::vector<TensorT<S>> v;
    int64_t step = 0;

    static OptimizerStateT zeros_like(const ModelParamsT<S>& params) {
        OptimizerStateT s;
        for_each_param(params, [&](const char*, const TensorT<S>& t) {
            s.m.push_back(TensorT<S>::zeros(t.shape()));
            s.v.push_back(TensorT<S>::zeros(t.shape()));
        });
        return s;
    }
};

struct EpochStats {
    int epoch = 0;
    double mean_train_loss = 0.0;
    double seconds = 0.0;  // diagnostic only; never written into run artifacts
    std::optional<MetricsReport> metrics;
};

// Standard Adam with bias correction; updates parameters in place.
template <class S>
void adam_step(ModelParamsT<S>& params, const ParamGradsT<S>& grads, OptimizerStateT<S>& state,
               double lr, const TrainConfig& cfg) {
    state.step += 1;
    const double b1 = cfg.beta1;
    const double b2 = cfg.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

    size_t index = 0;
    for_each_param(params, [&](const char* name, TensorT<S>& t) {
        const TensorT<S>& g = grads.grads[index];
        TensorT<S>& m = state.m[index];
        TensorT<S>& v = state.v[index];
        for (int64_t j = 0; j < t.numel(); ++j) {
            const double gj = static_cast<double>(g[j]);
            if (!std::isfinite(gj)) {
                throw NumericError(std::string("adam_step: non-finite gradient for ") + name);
            }
            const double mj = b1 * static_cast<double>(m[j]) + (1.0 - b1) * gj;
            const double vj = b2 * static_cast<double>(v[j]) + (1.0 - b2) * gj * gj;
            m[j] = static_cast<S>(mj);
            v[j] = static_cast<S>(vj);
            const double m_hat = mj / bc1;
            const double v_hat = vj / bc2;
            t[j] = static_cast<S>(static_cast<double>(t[j]) -
                                  lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon));
        }
        ++index;
    });
}

inline constexpr uint64_t kTrainNegativeTag = 0x7A41;
inline constexpr uint64_t kShuffleTag = 0x5F1E;

// The 1 positive + k sampled negatives for one training instance. All share
// the user's padded history window, so batch_loss reuses one F_s for them.
template <class S>
std::vector<Instance> materialize_group(const RawInstance& raw, const ModelConfig& cfg,
                                        const EvalContext& ctx, const TrainConfig& train_cfg,
                                        int epoch, size_t instance_index) {
    std::vector<Instance> group;
    std::vector<int32_t> window = pad_history(raw.history, cfg.max_seq_len);
    Instance pos;
    pos.user = raw.user;
    pos.candidate = raw.positive;
    pos.sequence = window;
    pos.label = 1;
    group.push_back(std::move(pos));

    RngStream rng(derive_seed({train_cfg.seed, kTrainNegativeTag, static_cast<uint64_t>(epoch),
                               static_cast<uint64_t>(raw.user), static_cast<uint64_t>(instance_index)}));
    std::unordered_set<int32_t> excluded = ctx.excluded_for(raw.user);
    excluded.insert(raw.positive);
    for (int32_t negative : sample_negatives(excluded, train_cfg.train_negatives, ctx.vocab_size, rng)) {
        Instance neg;
        neg.user = raw.user;
        neg.candidate = negative;
        neg.sequence = window;
        neg.label = 0;
        group.push_back(std::move(neg));
    }
    return group;
}

namespace detail {

// Runs batch_loss + backward for one instance group and extracts the
// parameter gradients in registry order.
template <class S>
std::pair<double, ParamGradsT<S>> group_loss_and_grads(const ModelParamsT<S>& params,
                                                       const ModelConfig& cfg,
                                                       std::span<const Instance> group) {
    TraceT<S> trace;
    BoundModelT<S> bound = bind_model(trace, params);
    VarT<S> loss = batch_loss(bound, cfg, group);
    GradientMapT<S> grad_map = trace.backward(loss.id);
    ParamGradsT<S> grads;
    grads.grads.reserve(kParamCount);
    for (NodeId id : bound.leaf_ids) grads.grads.push_back(grad_map.at(id));
    return {static_cast<double>(loss.value()[0]), std::move(grads)};
}

// Deterministic parallel map over groups: workers fill per-group slots, the
// caller reduces them in group order afterwards.
template <class S>
void apply_grad_clip(ParamGradsT<S>& grads, double max_norm) {
    if (max_norm <= 0.0) return;
    double sq = 0.0;
    for (const auto& t : grads.grads)
        for (int64_t j = 0; j < t.numel(); ++j) sq += static_cast<double>(t[j]) * static_cast<double>(t[j]);
    const double norm = std::sqrt(sq);
    if (norm <= max_norm) return;
    const S factor = static_cast<S>(max_norm / norm);
    for (auto& t : grads.grads)
        for (int64_t j = 0; j < t.numel(); ++j) t[j] *= factor;
}

}  // namespace detail

// One pass over the training split: per-epoch reshuffle, 1:k negative
// sampling, batch_loss + backward per instance group, gradients reduced in
// group order, one Adam step per batch. Returns the mean loss over all
// scored instances.
template <class S>
EpochStats train_epoch(ModelParamsT<S>& params, OptimizerStateT<S>& opt, const ModelConfig& cfg,
                       const TrainConfig& train_cfg, std::span<const RawInstance> train,
                       const EvalContext& ctx, int epoch) {
    if (train.empty()) throw Error("train_epoch: empty training set");
    const auto start = std::chrono::steady_clock::now();

    // Instances whose history is empty (possible only for length-2 source
    // sequences) cannot be scored and are skipped.
    std::vector<size_t> order;
    order.reserve(train.size());
    for (size_t i = 0; i < train.size(); ++i) {
        if (!train[i].history.empty()) order.push_back(i);
    }
    if (order.empty()) throw Error("train_epoch: no usable training instances");
    RngStream shuffle_rng(derive_seed({train_cfg.seed, kShuffleTag, static_cast<uint64_t>(epoch)}));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    int64_t scored = 0;

    for (size_t batch_start = 0; batch_start < order.size();
         batch_start += static_cast<size_t>(train_cfg.batch_size)) {
        const size_t batch_end =
            std::min(order.size(), batch_start + static_cast<size_t>(train_cfg.batch_size));
        const size_t n_groups = batch_end - batch_start;

        std::vector<std::vector<Instance>> groups(n_groups);
        for (size_t g = 0; g < n_groups; ++g) {
            const size_t idx = order[batch_start + g];
            groups[g] = materialize_group<S>(train[idx], cfg, ctx, train_cfg, epoch, idx);
        }

        std::vector<std::pair<double, ParamGradsT<S>>> results(n_groups);
        const int n_threads = std::min<int>(train_cfg.threads, static_cast<int>(n_groups));
        if (n_threads <= 1) {
            for (size_t g = 0; g < n_groups; ++g)
                results[g] = detail::group_loss_and_grads(params, cfg, std::span<const Instance>(groups[g]));
        } else {
            std::vector<std::thread> workers;
            workers.reserve(static_cast<size_t>(n_threads));
            std::atomic<size_t> next{0};
            for (int w = 0; w < n_threads; ++w) {
                workers.emplace_back([&]() {
                    while (true) {
                        const size_t g = next.fetch_add(1);
                        if (g >= n_groups) break;
                        results[g] =
                            detail::group_loss_and_grads(params, cfg, std::span<const Instance>(groups[g]));
                    }
                });
            }
            for (auto& w : workers) w.join();
        }

        // Reduce in group order; thread count never changes the result.
        ParamGradsT<S> batch_grads = ParamGradsT<S>::zeros_like(params);
        const S group_weight = static_cast<S>(1.0 / static_cast<double>(n_groups));
        double batch_loss_sum = 0.0;
        for (size_t g = 0; g < n_groups; ++g) {
            if (!std::isfinite(results[g].first)) {
                throw NumericError("train_epoch: non-finite loss in epoch " + std::to_string(epoch) +
                                   ", batch starting at instance " + std::to_string(batch_start));
            }
            batch_loss_sum += results[g].first;
            batch_grads.add_scaled(results[g].second, group_weight);
        }

        // The padding embedding row never learns.
        for (int64_t j = 0; j < cfg.embed_dim; ++j) batch_grads.grads[0][j] = S(0);
        detail::apply_grad_clip(batch_grads, train_cfg.grad_clip_norm);
        adam_step(params, batch_grads, opt, train_cfg.outer_lr, train_cfg);

        loss_sum += batch_loss_sum;
        scored += static_cast<int64_t>(n_groups);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_train_loss = loss_sum / static_cast<double>(scored);
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return stats;
}

// Per-epoch callback; hosts persist checkpoints and metric rows from here.
template <class S>
using EpochSink = std::function<void(const EpochStats&, const ModelParamsT<S>&)>;

struct TrainResult {
    std::vector<EpochStats> epochs;
};

// Full outer loop: `epochs` passes with optional per-epoch evaluation on the
// test split (1:99 negatives, fixed per seed).
template <class S>
TrainResult train(ModelParamsT<S>& params, const ModelConfig& cfg, const TrainConfig& train_cfg,
                  const Split& split, const EvalContext& ctx, const EpochSink<S>& sink = {}) {
    cfg.validate();
    train_cfg.validate();
    OptimizerStateT<S> opt = OptimizerStateT<S>::zeros_like(params);
    TrainResult result;
    for (int epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
        EpochStats stats = train_epoch(params, opt, cfg, train_cfg,
                                       std::span<const RawInstance>(split.train), ctx, epoch);
        if (train_cfg.eval_every_epoch) {
            stats.metrics = evaluate(params, cfg, std::span<const RawInstance>(split.test), ctx,
                                     train_cfg.seed, train_cfg.eval_negatives);
        }
        if (sink) sink(stats, params);
        result.epochs.push_back(std::move(stats));
    }
    return result;
}

}  // namespace ttt4rec
