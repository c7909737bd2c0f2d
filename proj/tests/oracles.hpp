#pragma once

// Test-only reference implementations. Everything here is written as plain
// double loops over raw buffers, independent of the trace machinery it is
// used to check.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "ttt4rec/rng.hpp"
#include "ttt4rec/tensor.hpp"

namespace oracle {

using ttt4rec::RngStream;
using ttt4rec::Tensor;

inline Tensor random_tensor(std::vector<int64_t> shape, RngStream& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.next_normal(0.0, scale);
    return t;
}

// C = A(m,k) * B(k,n), naive triple loop.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    Tensor out({a.dim(0), b.dim(1)});
    for (int64_t i = 0; i < a.dim(0); ++i)
        for (int64_t j = 0; j < b.dim(1); ++j) {
            double acc = 0.0;
            for (int64_t p = 0; p < a.dim(1); ++p) acc += a.at(i, p) * b.at(p, j);
            out.at(i, j) = acc;
        }
    return out;
}

// y = A(m,k) * x(k).
inline std::vector<double> matvec(const Tensor& a, const std::vector<double>& x) {
    std::vector<double> y(static_cast<size_t>(a.dim(0)), 0.0);
    for (int64_t i = 0; i < a.dim(0); ++i)
        for (int64_t p = 0; p < a.dim(1); ++p) y[static_cast<size_t>(i)] += a.at(i, p) * x[static_cast<size_t>(p)];
    return y;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline double squared_norm(const std::vector<double>& a) { return dot(a, a); }

// One online TTT-Linear step written straight from the update rule:
//   xk = Tk x, xv = Tv x, r = W xk - xv, W' = W - eta * 2 r xk^T.
struct TttStepOracle {
    Tensor theta_k, theta_v, theta_q;

    std::vector<double> project(const Tensor& theta, const std::vector<double>& x) const {
        return matvec(theta, x);
    }

    double loss(const Tensor& w, const std::vector<double>& x) const {
        auto xk = matvec(theta_k, x);
        auto xv = matvec(theta_v, x);
        auto wxk = matvec(w, xk);
        double acc = 0.0;
        for (size_t i = 0; i < wxk.size(); ++i) {
            double r = wxk[i] - xv[i];
            acc += r * r;
        }
        return acc;
    }

    Tensor step(const Tensor& w, const std::vector<double>& x, double eta) const {
        auto xk = matvec(theta_k, x);
        auto xv = matvec(theta_v, x);
        auto wxk = matvec(w, xk);
        Tensor out = w;
        for (int64_t i = 0; i < w.dim(0); ++i) {
            double r = wxk[static_cast<size_t>(i)] - xv[static_cast<size_t>(i)];
            for (int64_t j = 0; j < w.dim(1); ++j)
                out.at(i, j) -= eta * 2.0 * r * xk[static_cast<size_t>(j)];
        }
        return out;
    }

    std::vector<double> output(const Tensor& w, const std::vector<double>& x) const {
        return matvec(w, matvec(theta_q, x));
    }
};

// Scripted unrolling of the online schedule over a full sequence, with
// masked positions freezing W and carrying the previous output forward.
inline std::vector<std::vector<double>> unroll_online(const TttStepOracle& p, const Tensor& w0,
                                                      const std::vector<std::vector<double>>& tokens,
                                                      const std::vector<uint8_t>& mask, double eta) {
    Tensor w = w0;
    const size_t dim = static_cast<size_t>(w0.dim(0));
    std::vector<std::vector<double>> outputs;
    std::vector<double> prev(dim, 0.0);
    for (size_t t = 0; t < tokens.size(); ++t) {
        if (mask[t]) {
            w = p.step(w, tokens[t], eta);
            prev = p.output(w, tokens[t]);
        }
        outputs.push_back(prev);
    }
    return outputs;
}

// Scripted grouped schedule: within each block of size b the per-token
// gradients are all taken at the block-entry weights and summed cumulatively.
inline std::vector<std::vector<double>> unroll_minibatch(const TttStepOracle& p, const Tensor& w0,
                                                         const std::vector<std::vector<double>>& tokens,
                                                         const std::vector<uint8_t>& mask, double eta,
                                                         int64_t b) {
    Tensor w_entry = w0;
    const size_t dim = static_cast<size_t>(w0.dim(0));
    const int64_t n_rows = w0.dim(0);
    std::vector<std::vector<double>> outputs;
    std::vector<double> prev(dim, 0.0);
    Tensor grad_sum({w0.dim(0), w0.dim(1)});
    for (size_t t = 0; t < tokens.size(); ++t) {
        if (static_cast<int64_t>(t) % b == 0) {
            // Enter a new block with the weights produced by the last one.
            Tensor w_exit = w_entry;
            for (int64_t i = 0; i < n_rows; ++i)
                for (int64_t j = 0; j < w0.dim(1); ++j) w_exit.at(i, j) -= eta * grad_sum.at(i, j);
            if (t != 0) w_entry = w_exit;
            grad_sum = Tensor({w0.dim(0), w0.dim(1)});
        }
        if (mask[t]) {
            auto xk = p.project(p.theta_k, tokens[t]);
            auto xv = p.project(p.theta_v, tokens[t]);
            auto wxk = matvec(w_entry, xk);
            for (int64_t i = 0; i < n_rows; ++i) {
                double r = wxk[static_cast<size_t>(i)] - xv[static_cast<size_t>(i)];
                for (int64_t j = 0; j < w0.dim(1); ++j) grad_sum.at(i, j) += 2.0 * r * xk[static_cast<size_t>(j)];
            }
            Tensor w_t = w_entry;
            for (int64_t i = 0; i < n_rows; ++i)
                for (int64_t j = 0; j < w0.dim(1); ++j) w_t.at(i, j) -= eta * grad_sum.at(i, j);
            prev = p.output(w_t, tokens[t]);
        }
        outputs.push_back(prev);
    }
    return outputs;
}

// Two-layer MLP with exact GELU, naive loops.
inline std::vector<double> mlp(const Tensor& w1, const std::vector<double>& b1, const Tensor& w2,
                               const std::vector<double>& b2, const std::vector<double>& x) {
    auto h = matvec(w1, x);
    for (size_t i = 0; i < h.size(); ++i) {
        double v = h[i] + b1[i];
        h[i] = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
    }
    auto y = matvec(w2, h);
    for (size_t i = 0; i < y.size(); ++i) y[i] += b2[i];
    return y;
}

inline std::vector<double> rms_normalize(const std::vector<double>& v, const std::vector<double>& gain,
                                         double eps) {
    double ms = 0.0;
    for (double x : v) ms += x * x;
    ms = ms / static_cast<double>(v.size()) + eps;
    double inv = 1.0 / std::sqrt(ms);
    std::vector<double> out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = gain[i] * v[i] * inv;
    return out;
}

// Rank of entry 0 among all scores via a full sort, pessimistic ties:
// the positive is placed after every tied competitor.
inline int rank_by_sorting(const std::vector<double>& scores) {
    std::vector<double> others(scores.begin() + 1, scores.end());
    std::sort(others.begin(), others.end(), std::greater<double>());
    int rank = 1;
    for (double s : others) {
        if (s >= scores[0]) ++rank;
    }
    return rank;
}

}  // namespace oracle
