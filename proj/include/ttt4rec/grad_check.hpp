#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ttt4rec/trace.hpp"

namespace ttt4rec {

// Compares backward() against central finite differences for a scalar
// function of a set of leaf tensors. Returns the worst per-coordinate
// relative error, with denominator max(|analytic|, |numeric|, 1e-8).
//
// The function is invoked with a fresh trace and one leaf Var per point
// tensor; it must return a scalar-shaped Var on that trace.
template <class S>
double grad_check(const std::function<VarT<S>(TraceT<S>&, std::span<const VarT<S>>)>& f,
                  const std::vector<TensorT<S>>& point, double epsilon) {
    if (epsilon < 1e-7 || epsilon > 1e-3) {
        throw Error("grad_check: epsilon must lie in [1e-7, 1e-3], got " + std::to_string(epsilon));
    }

    auto evaluate = [&](const std::vector<TensorT<S>>& at, size_t leaf, int64_t coord) -> double {
        TraceT<S> trace;
        std::vector<VarT<S>> leaves;
        leaves.reserve(at.size());
        for (const auto& t : at) leaves.push_back(ops::make_leaf(trace, t));
        VarT<S> out = f(trace, std::span<const VarT<S>>(leaves));
        if (out.value().numel() != 1) {
            throw ShapeError("grad_check: function output must be scalar-shaped, got " +
                             out.value().shape_string());
        }
        double y = static_cast<double>(out.value()[0]);
        if (!std::isfinite(y)) {
            throw NumericError("grad_check: non-finite function value at leaf " +
                               std::to_string(leaf) + " coordinate " + std::to_string(coord));
        }
        return y;
    };

    // Analytic pass.
    TraceT<S> trace;
    std::vector<VarT<S>> leaves;
    leaves.reserve(point.size());
    for (const auto& t : point) leaves.push_back(ops::make_leaf(trace, t));
    VarT<S> out = f(trace, std::span<const VarT<S>>(leaves));
    if (out.value().numel() != 1) {
        throw ShapeError("grad_check: function output must be scalar-shaped, got " +
                         out.value().shape_string());
    }
    if (!std::isfinite(static_cast<double>(out.value()[0]))) {
        throw NumericError("grad_check: non-finite function value at the unperturbed point");
    }
    GradientMapT<S> grads = trace.backward(out.id);

    double worst = 0.0;
    std::vector<TensorT<S>> perturbed = point;
    for (size_t leaf = 0; leaf < point.size(); ++leaf) {
        const TensorT<S>& analytic = grads.at(leaves[leaf].id);
        for (int64_t c = 0; c < point[leaf].numel(); ++c) {
            const S saved = perturbed[leaf][c];
            perturbed[leaf][c] = saved + static_cast<S>(epsilon);
            double plus = evaluate(perturbed, leaf, c);
            perturbed[leaf][c] = saved - static_cast<S>(epsilon);
            double minus = evaluate(perturbed, leaf, c);
            perturbed[leaf][c] = saved;

            const double numeric = (plus - minus) / (2.0 * epsilon);
            const double a = static_cast<double>(analytic[c]);
            const double denom = std::fmax(std::fmax(std::fabs(a), std::fabs(numeric)), 1e-8);
            worst = std::fmax(worst, std::fabs(a - numeric) / denom);
        }
    }
    return worst;
}

}  // namespace ttt4rec
