#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ttt4rec/error.hpp"
#include "ttt4rec/rng.hpp"
#include "ttt4rec/trace.hpp"

namespace ttt4rec {

// Hyperparameters of the TTT-Linear sequence layer. The hidden state of the
// layer is the weight matrix of an inner linear model, advanced by one
// gradient-descent step of a self-supervised reconstruction loss per token.
struct TTTConfig {
    int64_t dim = 64;                // embedding width K
    double inner_lr = 0.1;           // eta, step size of the per-token update
    int64_t mini_batch_size = 1;     // tokens per inner GD batch (1 = online)
    double initializer_range = 0.02; // std-dev for TTT parameter init

    void validate() const {
        if (dim <= 0) throw ConfigError("ttt.dim must be positive");
        if (inner_lr <= 0.0) throw ConfigError("ttt.inner_lr must be positive");
        if (mini_batch_size < 1) throw ConfigError("ttt.mini_batch_size must be >= 1");
        if (initializer_range <= 0.0) throw ConfigError("ttt.initializer_range must be positive");
    }
};

// Learnable outer parameters: the three token views (training view theta_k,
// label view theta_v, test view theta_q), the initial inner weights w0, and
// the gain of the output RMSNorm.
template <class S>
struct TTTParamsT {
    TensorT<S> theta_k, theta_v, theta_q;  // K x K projections
    TensorT<S> w0;                         // K x K initial hidden state
    TensorT<S> norm_gain;                  // K
};

using TTTParams = TTTParamsT<double>;

// The evolving hidden state: the inner weight matrix at token index `step`.
template <class S>
struct TTTStateT {
    TensorT<S> w;
    int64_t step = 0;
};

template <class S>
TTTParamsT<S> init_ttt_params(const TTTConfig& cfg, RngStream& rng) {
    cfg.validate();
    const int64_t k = cfg.dim;
    TTTParamsT<S> p;
    auto draw = [&](std::vector<int64_t> shape) {
        TensorT<S> t(std::move(shape));
        for (int64_t i = 0; i < t.numel(); ++i)
            t[i] = static_cast<S>(rng.next_normal(0.0, cfg.initializer_range));
        return t;
    };
    p.theta_k = draw({k, k});
    p.theta_v = draw({k, k});
    p.theta_q = draw({k, k});
    p.w0 = draw({k, k});
    p.norm_gain = TensorT<S>::full({k}, S(1));
    return p;
}

// Trace handles for the layer parameters, used while building a forward pass.
template <class S>
struct BoundTTTParamsT {
    VarT<S> theta_k, theta_v, theta_q, w0, norm_gain;
};

using BoundTTTParams = BoundTTTParamsT<double>;

template <class S>
BoundTTTParamsT<S> bind_ttt_params(TraceT<S>& trace, const TTTParamsT<S>& p) {
    return {ops::make_leaf(trace, p.theta_k), ops::make_leaf(trace, p.theta_v),
            ops::make_leaf(trace, p.theta_q), ops::make_leaf(trace, p.w0),
            ops::make_leaf(trace, p.norm_gain)};
}

namespace detail {

template <class S>
inline void require_finite(const TensorT<S>& t, const char* what) {
    if (!t.all_finite()) throw NumericError(std::string(what) + ": non-finite values");
}

}  // namespace detail

// Self-supervised inner loss: l(W; x) = |W (theta_k x) - theta_v x|^2,
// the squared reconstruction error of the label view from the training view.
template <class S>
VarT<S> inner_loss(VarT<S> w, VarT<S> x, const BoundTTTParamsT<S>& p) {
    detail::require_finite(w.value(), "inner_loss: W");
    detail::require_finite(x.value(), "inner_loss: x");
    VarT<S> xk = ops::matmul(p.theta_k, x);
    VarT<S> xv = ops::matmul(p.theta_v, x);
    return ops::squared_norm(ops::sub(ops::matmul(w, xk), xv));
}

// One gradient-descent step on the inner loss:
//   W' = W - eta * grad_W l(W; x),  grad_W l = 2 (W x_k - x_v) x_k^T.
// The gradient is spelled out in primitives so the outer training can
// differentiate through it.
template <class S>
VarT<S> inner_step(VarT<S> w, VarT<S> x, const BoundTTTParamsT<S>& p, double eta) {
    if (eta <= 0.0) throw ConfigError("inner_step: eta must be positive");
    VarT<S> xk = ops::matmul(p.theta_k, x);
    VarT<S> xv = ops::matmul(p.theta_v, x);
    VarT<S> residual = ops::sub(ops::matmul(w, xk), xv);
    VarT<S> grad = ops::scale(ops::outer(residual, xk), 2.0);
    VarT<S> next = ops::sub(w, ops::scale(grad, eta));
    if (!next.value().all_finite()) {
        throw NumericError("inner_step: updated weights are non-finite (inner_lr too large?)");
    }
    return next;
}

// Output rule z = W (theta_q x), evaluated with the post-update weights.
template <class S>
VarT<S> output_token(VarT<S> w, VarT<S> x, const BoundTTTParamsT<S>& p) {
    VarT<S> z = ops::matmul(w, ops::matmul(p.theta_q, x));
    detail::require_finite(z.value(), "output_token: z");
    return z;
}

namespace detail {

template <class S>
void check_sequence_args(std::span<const VarT<S>> tokens, std::span<const uint8_t> valid) {
    if (tokens.empty()) throw Error("forward_sequence: empty sequence");
    if (tokens.size() != valid.size()) {
        throw Error("forward_sequence: tokens and valid_mask lengths differ");
    }
    bool any = false;
    for (uint8_t v : valid) any = any || (v != 0);
    if (!any) throw Error("forward_sequence: all positions are masked");
}

// Output for a masked position: the previous output carried forward, or a
// zero vector when no valid token has been seen yet.
template <class S>
VarT<S> masked_output(TraceT<S>& trace, const VarT<S>& prev, int64_t dim, VarT<S>& zero_cache) {
    if (prev.trace) return prev;
    if (zero_cache.trace == nullptr) zero_cache = ops::make_leaf(trace, TensorT<S>::zeros({dim}));
    return zero_cache;
}

}  // namespace detail

// Online (per-token) schedule: each valid token takes one GD step from the
// weights left by the previous token. Masked positions freeze the weights.
template <class S>
std::vector<VarT<S>> forward_sequence(const BoundTTTParamsT<S>& p, std::span<const VarT<S>> tokens,
                                      std::span<const uint8_t> valid, double eta) {
    detail::check_sequence_args(tokens, valid);
    TraceT<S>& trace = *p.w0.trace;
    const int64_t dim = p.w0.value().dim(0);
    VarT<S> w = p.w0;
    VarT<S> zero_cache;
    std::vector<VarT<S>> outputs;
    outputs.reserve(tokens.size());
    VarT<S> prev;
    for (size_t t = 0; t < tokens.size(); ++t) {
        if (valid[t]) {
            w = inner_step(w, tokens[t], p, eta);
            prev = output_token(w, tokens[t], p);
            outputs.push_back(prev);
        } else {
            outputs.push_back(detail::masked_output(trace, prev, dim, zero_cache));
        }
    }
    return outputs;
}

// Mini-batch-parallel schedule: tokens are grouped into consecutive blocks
// of size b. Every token in a block computes its inner gradient against the
// block-entry weights, and the token's own weights are the entry weights
// minus eta times the running gradient sum up to that token. Masked tokens
// contribute zero gradient.
template <class S>
std::vector<VarT<S>> forward_sequence_minibatch(const BoundTTTParamsT<S>& p,
                                                std::span<const VarT<S>> tokens,
                                                std::span<const uint8_t> valid, double eta,
                                                int64_t b) {
    if (b < 1) throw ConfigError("forward_sequence_minibatch: mini-batch size must be >= 1");
    detail::check_sequence_args(tokens, valid);
    if (eta <= 0.0) throw ConfigError("forward_sequence_minibatch: eta must be positive");
    TraceT<S>& trace = *p.w0.trace;
    const int64_t dim = p.w0.value().dim(0);

    VarT<S> w_entry = p.w0;
    VarT<S> zero_cache;
    std::vector<VarT<S>> outputs;
    outputs.reserve(tokens.size());
    VarT<S> prev;

    const size_t n = tokens.size();
    for (size_t block = 0; block < n; block += static_cast<size_t>(b)) {
        const size_t block_end = std::min(n, block + static_cast<size_t>(b));
        VarT<S> grad_sum;  // running sum of per-token gradients at w_entry
        VarT<S> w_last = w_entry;
        for (size_t t = block; t < block_end; ++t) {
            if (valid[t]) {
                VarT<S> xk = ops::matmul(p.theta_k, tokens[t]);
                VarT<S> xv = ops::matmul(p.theta_v, tokens[t]);
                VarT<S> residual = ops::sub(ops::matmul(w_entry, xk), xv);
                VarT<S> grad = ops::scale(ops::outer(residual, xk), 2.0);
                grad_sum = grad_sum.trace ? ops::add(grad_sum, grad) : grad;
                VarT<S> w_t = ops::sub(w_entry, ops::scale(grad_sum, eta));
                if (!w_t.value().all_finite()) {
                    throw NumericError(
                        "forward_sequence_minibatch: non-finite weights (inner_lr too large?)");
                }
                prev = output_token(w_t, tokens[t], p);
                outputs.push_back(prev);
                w_last = w_t;
            } else {
                outputs.push_back(detail::masked_output(trace, prev, dim, zero_cache));
            }
        }
        w_entry = w_last;
    }
    return outputs;
}

}  // namespace ttt4rec
