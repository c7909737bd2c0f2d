#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ttt4rec/error.hpp"
#include "ttt4rec/tensor.hpp"

namespace ttt4rec {

using NodeId = int32_t;

enum class OpKind : uint8_t {
    Leaf,
    MatMul,
    Add,
    Subtract,
    Multiply,
    ScalarScale,
    Sigmoid,
    Relu,
    Gelu,
    Softplus,
    RmsNormalize,
    Sum,
    SquaredNorm,
    Dot,
    GatherRow,
    Slice,
    Outer,
};

inline const char* op_kind_name(OpKind k) {
    switch (k) {
        case OpKind::Leaf: return "leaf";
        case OpKind::MatMul: return "matmul";
        case OpKind::Add: return "add";
        case OpKind::Subtract: return "subtract";
        case OpKind::Multiply: return "elementwise-multiply";
        case OpKind::ScalarScale: return "scalar-scale";
        case OpKind::Sigmoid: return "sigmoid";
        case OpKind::Relu: return "relu";
        case OpKind::Gelu: return "gelu";
        case OpKind::Softplus: return "softplus";
        case OpKind::RmsNormalize: return "rms-normalize";
        case OpKind::Sum: return "sum";
        case OpKind::SquaredNorm: return "squared-norm";
        case OpKind::Dot: return "dot";
        case OpKind::GatherRow: return "gather-row";
        case OpKind::Slice: return "slice";
        case OpKind::Outer: return "outer";
    }
    return "unknown";
}

// Extra per-op constants. These are compile-time-fixed numbers (a scale
// factor, the RMSNorm epsilon, a row index, slice bounds), not graph inputs,
// so no gradient flows through them.
struct OpAttrs {
    double scalar = 0.0;
    int64_t i0 = 0;
    int64_t i1 = 0;
};

template <class S>
struct NodeT {
    OpKind kind = OpKind::Leaf;
    NodeId a = -1;
    NodeId b = -1;
    TensorT<S> value;
    OpAttrs attrs;
};

// Gradients of one scalar output with respect to every leaf of a trace.
template <class S>
class GradientMapT {
  public:
    GradientMapT(std::vector<TensorT<S>> by_node, std::vector<NodeId> leaves)
        : by_node_(std::move(by_node)), leaves_(std::move(leaves)) {}

    const TensorT<S>& at(NodeId id) const { return by_node_[static_cast<size_t>(id)]; }
    const std::vector<NodeId>& leaves() const { return leaves_; }

  private:
    std::vector<TensorT<S>> by_node_;
    std::vector<NodeId> leaves_;
};

namespace detail {

// Exact GELU: x * Phi(x) with Phi the standard normal CDF.
template <class S>
inline S gelu_value(S x) {
    double xd = static_cast<double>(x);
    return static_cast<S>(0.5 * xd * (1.0 + std::erf(xd * M_SQRT1_2)));
}

template <class S>
inline S gelu_derivative(S x) {
    double xd = static_cast<double>(x);
    double cdf = 0.5 * (1.0 + std::erf(xd * M_SQRT1_2));
    double pdf = std::exp(-0.5 * xd * xd) / std::sqrt(2.0 * M_PI);
    return static_cast<S>(cdf + xd * pdf);
}

template <class S>
inline S sigmoid_value(S x) {
    double xd = static_cast<double>(x);
    if (xd >= 0.0) {
        return static_cast<S>(1.0 / (1.0 + std::exp(-xd)));
    }
    double e = std::exp(xd);
    return static_cast<S>(e / (1.0 + e));
}

// log(1 + e^x), overflow-safe for large |x|.
template <class S>
inline S softplus_value(S x) {
    double xd = static_cast<double>(x);
    return static_cast<S>(std::fmax(xd, 0.0) + std::log1p(std::exp(-std::fabs(xd))));
}

}  // namespace detail

// Append-only record of primitive operations with eagerly computed forward
// values. Append order is the topological order used by the reverse pass.
// A trace is confined to one thread during construction.
template <class S>
class TraceT {
  public:
    TraceT() = default;

    NodeId leaf(TensorT<S> value) {
        NodeT<S> n;
        n.kind = OpKind::Leaf;
        n.value = std::move(value);
        return append(std::move(n));
    }

    size_t size() const { return nodes_.size(); }
    const TensorT<S>& value(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }
    OpKind kind(NodeId id) const { return nodes_[static_cast<size_t>(id)].kind; }
    bool is_leaf(NodeId id) const { return nodes_[static_cast<size_t>(id)].kind == OpKind::Leaf; }

    // Records one primitive op; the forward value is computed immediately.
    NodeId forward_op(OpKind kind, std::span<const NodeId> inputs, OpAttrs attrs = {}) {
        for (NodeId id : inputs) {
            if (id < 0 || static_cast<size_t>(id) >= nodes_.size()) {
                throw Error(std::string("trace: input node ") + std::to_string(id) +
                            " does not precede op " + op_kind_name(kind));
            }
        }
        NodeT<S> n;
        n.kind = kind;
        n.attrs = attrs;
        if (!inputs.empty()) n.a = inputs[0];
        if (inputs.size() > 1) n.b = inputs[1];
        n.value = compute(kind, inputs, attrs);
        return append(std::move(n));
    }

    // Reverse pass from a scalar output. Returns the gradient of the output
    // with respect to every leaf; unused leaves get zero tensors.
    GradientMapT<S> backward(NodeId output) const {
        const auto& out_node = nodes_.at(static_cast<size_t>(output));
        if (out_node.value.numel() != 1) {
            throw ShapeError(std::string("backward: output node must be scalar-shaped, got ") +
                             out_node.value.shape_string());
        }
        std::vector<TensorT<S>> adj(nodes_.size());
        std::vector<char> touched(nodes_.size(), 0);
        adj[static_cast<size_t>(output)] = TensorT<S>::full(out_node.value.shape(), S(1));
        touched[static_cast<size_t>(output)] = 1;

        for (NodeId id = output; id >= 0; --id) {
            if (!touched[static_cast<size_t>(id)]) continue;
            propagate(id, adj, touched);
        }

        std::vector<NodeId> leaves;
        for (size_t i = 0; i < nodes_.size(); ++i) {
            if (nodes_[i].kind != OpKind::Leaf) continue;
            leaves.push_back(static_cast<NodeId>(i));
            if (!touched[i]) adj[i] = TensorT<S>::zeros(nodes_[i].value.shape());
        }
        return GradientMapT<S>(std::move(adj), std::move(leaves));
    }

  private:
    NodeId append(NodeT<S> n) {
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    [[noreturn]] static void shape_fail(OpKind kind, const TensorT<S>& a, const TensorT<S>& b) {
        throw ShapeError(std::string(op_kind_name(kind)) + ": shapes do not conform: " +
                         a.shape_string() + " vs " + b.shape_string());
    }

    [[noreturn]] static void shape_fail(OpKind kind, const TensorT<S>& a) {
        throw ShapeError(std::string(op_kind_name(kind)) + ": unsupported shape " + a.shape_string());
    }

    static void require_arity(OpKind kind, std::span<const NodeId> inputs, size_t n) {
        if (inputs.size() != n) {
            throw Error(std::string(op_kind_name(kind)) + ": expects " + std::to_string(n) +
                        " inputs, got " + std::to_string(inputs.size()));
        }
    }

    TensorT<S> compute(OpKind kind, std::span<const NodeId> inputs, const OpAttrs& attrs) const {
        auto in = [&](size_t i) -> const TensorT<S>& {
            return nodes_[static_cast<size_t>(inputs[i])].value;
        };
        switch (kind) {
            case OpKind::Leaf:
                throw Error("forward_op: leaf nodes are created via leaf()");
            case OpKind::MatMul: {
                require_arity(kind, inputs, 2);
                return matmul_value(in(0), in(1));
            }
            case OpKind::Add:
            case OpKind::Subtract:
            case OpKind::Multiply: {
                require_arity(kind, inputs, 2);
                const auto& a = in(0);
                const auto& b = in(1);
                if (!a.same_shape(b)) shape_fail(kind, a, b);
                TensorT<S> out(a.shape());
                const S* pa = a.data();
                const S* pb = b.data();
                S* po = out.data();
                int64_t n = a.numel();
                if (kind == OpKind::Add) {
                    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
                } else if (kind == OpKind::Subtract) {
                    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
                } else {
                    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
                }
                return out;
            }
            case OpKind::ScalarScale: {
                require_arity(kind, inputs, 1);
                const auto& a = in(0);
                TensorT<S> out(a.shape());
                const S c = static_cast<S>(attrs.scalar);
                for (int64_t i = 0; i < a.numel(); ++i) out[i] = c * a[i];
                return out;
            }
            case OpKind::Sigmoid:
            case OpKind::Relu:
            case OpKind::Gelu:
            case OpKind::Softplus: {
                require_arity(kind, inputs, 1);
                const auto& a = in(0);
                TensorT<S> out(a.shape());
                for (int64_t i = 0; i < a.numel(); ++i) {
                    S x = a[i];
                    switch (kind) {
                        case OpKind::Sigmoid: out[i] = detail::sigmoid_value(x); break;
                        case OpKind::Relu: out[i] = x > S(0) ? x : S(0); break;
                        case OpKind::Gelu: out[i] = detail::gelu_value(x); break;
                        default: out[i] = detail::softplus_value(x); break;
                    }
                }
                return out;
            }
            case OpKind::RmsNormalize: {
                require_arity(kind, inputs, 2);
                const auto& v = in(0);
                const auto& gain = in(1);
                if (v.rank() != 1) shape_fail(kind, v);
                if (!v.same_shape(gain)) shape_fail(kind, v, gain);
                const int64_t n = v.numel();
                double ms = 0.0;
                for (int64_t i = 0; i < n; ++i) ms += static_cast<double>(v[i]) * static_cast<double>(v[i]);
                ms = ms / static_cast<double>(n) + attrs.scalar;
                const S inv_rms = static_cast<S>(1.0 / std::sqrt(ms));
                TensorT<S> out(v.shape());
                for (int64_t i = 0; i < n; ++i) out[i] = gain[i] * v[i] * inv_rms;
                return out;
            }
            case OpKind::Sum: {
                require_arity(kind, inputs, 1);
                const auto& a = in(0);
                S acc = S(0);
                for (int64_t i = 0; i < a.numel(); ++i) acc += a[i];
                return TensorT<S>::scalar(acc);
            }
            case OpKind::SquaredNorm: {
                require_arity(kind, inputs, 1);
                const auto& a = in(0);
                S acc = S(0);
                for (int64_t i = 0; i < a.numel(); ++i) acc += a[i] * a[i];
                return TensorT<S>::scalar(acc);
            }
            case OpKind::Dot: {
                require_arity(kind, inputs, 2);
                const auto& a = in(0);
                const auto& b = in(1);
                if (!a.same_shape(b)) shape_fail(kind, a, b);
                S acc = S(0);
                for (int64_t i = 0; i < a.numel(); ++i) acc += a[i] * b[i];
                return TensorT<S>::scalar(acc);
            }
            case OpKind::GatherRow: {
                require_arity(kind, inputs, 1);
                const auto& m = in(0);
                if (m.rank() != 2) shape_fail(kind, m);
                const int64_t row = attrs.i0;
                if (row < 0 || row >= m.dim(0)) {
                    throw Error(std::string("gather-row: row ") + std::to_string(row) +
                                " out of range for " + m.shape_string());
                }
                TensorT<S> out({m.dim(1)});
                for (int64_t j = 0; j < m.dim(1); ++j) out[j] = m.at(row, j);
                return out;
            }
            case OpKind::Slice: {
                require_arity(kind, inputs, 1);
                const auto& a = in(0);
                const int64_t begin = attrs.i0;
                const int64_t end = attrs.i1;
                if (a.rank() < 1 || a.rank() > 2) shape_fail(kind, a);
                if (begin < 0 || end <= begin || end > a.dim(0)) {
                    throw Error(std::string("slice: bounds [") + std::to_string(begin) + "," +
                                std::to_string(end) + ") invalid for " + a.shape_string());
                }
                if (a.rank() == 1) {
                    TensorT<S> out({end - begin});
                    for (int64_t i = begin; i < end; ++i) out[i - begin] = a[i];
                    return out;
                }
                TensorT<S> out({end - begin, a.dim(1)});
                for (int64_t i = begin; i < end; ++i)
                    for (int64_t j = 0; j < a.dim(1); ++j) out.at(i - begin, j) = a.at(i, j);
                return out;
            }
            case OpKind::Outer: {
                require_arity(kind, inputs, 2);
                const auto& a = in(0);
                const auto& b = in(1);
                if (a.rank() != 1 || b.rank() != 1) shape_fail(kind, a, b);
                TensorT<S> out({a.numel(), b.numel()});
                for (int64_t i = 0; i < a.numel(); ++i)
                    for (int64_t j = 0; j < b.numel(); ++j) out.at(i, j) = a[i] * b[j];
                return out;
            }
        }
        throw Error("forward_op: unknown primitive kind " +
                    std::to_string(static_cast<int>(kind)));
    }

    // matmul over rank-2 and rank-1 operands:
    //   (m,k)x(k,n)->(m,n)   (m,k)x(k)->(m)   (k)x(k,n)->(n)
    static TensorT<S> matmul_value(const TensorT<S>& a, const TensorT<S>& b) {
        if (a.rank() == 2 && b.rank() == 2) {
            if (a.dim(1) != b.dim(0)) shape_fail(OpKind::MatMul, a, b);
            const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
            TensorT<S> out({m, n});
            for (int64_t i = 0; i < m; ++i) {
                for (int64_t p = 0; p < k; ++p) {
                    const S av = a.at(i, p);
                    for (int64_t j = 0; j < n; ++j) out.at(i, j) += av * b.at(p, j);
                }
            }
            return out;
        }
        if (a.rank() == 2 && b.rank() == 1) {
            if (a.dim(1) != b.dim(0)) shape_fail(OpKind::MatMul, a, b);
            TensorT<S> out({a.dim(0)});
            for (int64_t i = 0; i < a.dim(0); ++i) {
                S acc = S(0);
                for (int64_t p = 0; p < a.dim(1); ++p) acc += a.at(i, p) * b[p];
                out[i] = acc;
            }
            return out;
        }
        if (a.rank() == 1 && b.rank() == 2) {
            if (a.dim(0) != b.dim(0)) shape_fail(OpKind::MatMul, a, b);
            TensorT<S> out({b.dim(1)});
            for (int64_t p = 0; p < b.dim(0); ++p) {
                const S av = a[p];
                for (int64_t j = 0; j < b.dim(1); ++j) out[j] += av * b.at(p, j);
            }
            return out;
        }
        shape_fail(OpKind::MatMul, a, b);
    }

    // Adds `g` into the adjoint slot for `id`, allocating zeros on first touch.
    static void accumulate(NodeId id, const TensorT<S>& g, std::vector<TensorT<S>>& adj,
                           std::vector<char>& touched) {
        auto& slot = adj[static_cast<size_t>(id)];
        if (!touched[static_cast<size_t>(id)]) {
            slot = TensorT<S>(g.shape());
            touched[static_cast<size_t>(id)] = 1;
        }
        for (int64_t i = 0; i < g.numel(); ++i) slot[i] += g[i];
    }

    void propagate(NodeId id, std::vector<TensorT<S>>& adj, std::vector<char>& touched) const {
        const NodeT<S>& n = nodes_[static_cast<size_t>(id)];
        const TensorT<S>& g = adj[static_cast<size_t>(id)];
        auto val = [&](NodeId i) -> const TensorT<S>& { return nodes_[static_cast<size_t>(i)].value; };
        auto acc = [&](NodeId target, const TensorT<S>& grad) { accumulate(target, grad, adj, touched); };

        switch (n.kind) {
            case OpKind::Leaf:
                return;
            case OpKind::MatMul: {
                const auto& a = val(n.a);
                const auto& b = val(n.b);
                if (a.rank() == 2 && b.rank() == 2) {
                    TensorT<S> da(a.shape());
                    TensorT<S> db(b.shape());
                    // da = g b^T ; db = a^T g
                    for (int64_t i = 0; i < a.dim(0); ++i)
                        for (int64_t p = 0; p < a.dim(1); ++p) {
                            S acc_v = S(0);
                            for (int64_t j = 0; j < b.dim(1); ++j) acc_v += g.at(i, j) * b.at(p, j);
                            da.at(i, p) = acc_v;
                        }
                    for (int64_t p = 0; p < b.dim(0); ++p)
                        for (int64_t j = 0; j < b.dim(1); ++j) {
                            S acc_v = S(0);
                            for (int64_t i = 0; i < a.dim(0); ++i) acc_v += a.at(i, p) * g.at(i, j);
                            db.at(p, j) = acc_v;
                        }
                    acc(n.a, da);
                    acc(n.b, db);
                } else if (a.rank() == 2 && b.rank() == 1) {
                    TensorT<S> da(a.shape());
                    TensorT<S> db(b.shape());
                    for (int64_t i = 0; i < a.dim(0); ++i)
                        for (int64_t p = 0; p < a.dim(1); ++p) da.at(i, p) = g[i] * b[p];
                    for (int64_t p = 0; p < a.dim(1); ++p) {
                        S acc_v = S(0);
                        for (int64_t i = 0; i < a.dim(0); ++i) acc_v += a.at(i, p) * g[i];
                        db[p] = acc_v;
                    }
                    acc(n.a, da);
                    acc(n.b, db);
                } else {  // (k) x (k,n)
                    TensorT<S> da(a.shape());
                    TensorT<S> db(b.shape());
                    for (int64_t p = 0; p < b.dim(0); ++p) {
                        S acc_v = S(0);
                        for (int64_t j = 0; j < b.dim(1); ++j) acc_v += b.at(p, j) * g[j];
                        da[p] = acc_v;
                    }
                    for (int64_t p = 0; p < b.dim(0); ++p)
                        for (int64_t j = 0; j < b.dim(1); ++j) db.at(p, j) = a[p] * g[j];
                    acc(n.a, da);
                    acc(n.b, db);
                }
                return;
            }
            case OpKind::Add:
                acc(n.a, g);
                acc(n.b, g);
                return;
            case OpKind::Subtract: {
                acc(n.a, g);
                TensorT<S> neg(g.shape());
                for (int64_t i = 0; i < g.numel(); ++i) neg[i] = -g[i];
                acc(n.b, neg);
                return;
            }
            case OpKind::Multiply: {
                const auto& a = val(n.a);
                const auto& b = val(n.b);
                TensorT<S> da(a.shape());
                TensorT<S> db(b.shape());
                for (int64_t i = 0; i < g.numel(); ++i) {
                    da[i] = g[i] * b[i];
                    db[i] = g[i] * a[i];
                }
                acc(n.a, da);
                acc(n.b, db);
                return;
            }
            case OpKind::ScalarScale: {
                TensorT<S> da(g.shape());
                const S c = static_cast<S>(n.attrs.scalar);
                for (int64_t i = 0; i < g.numel(); ++i) da[i] = c * g[i];
                acc(n.a, da);
                return;
            }
            case OpKind::Sigmoid: {
                TensorT<S> da(g.shape());
                for (int64_t i = 0; i < g.numel(); ++i) {
                    const S y = n.value[i];
                    da[i] = g[i] * y * (S(1) - y);
                }
                acc(n.a, da);
                return;
            }
            case OpKind::Relu: {
                const auto& x = val(n.a);
                TensorT<S> da(g.shape());
                for (int64_t i = 0; i < g.numel(); ++i) da[i] = x[i] > S(0) ? g[i] : S(0);
                acc(n.a, da);
                return;
            }
            case OpKind::Gelu: {
                const auto& x = val(n.a);
                TensorT<S> da(g.shape());
                for (int64_t i = 0; i < g.numel(); ++i) da[i] = g[i] * detail::gelu_derivative(x[i]);
                acc(n.a, da);
                return;
            }
            case OpKind::Softplus: {
                const auto& x = val(n.a);
                TensorT<S> da(g.shape());
                for (int64_t i = 0; i < g.numel(); ++i) da[i] = g[i] * detail::sigmoid_value(x[i]);
                acc(n.a, da);
                return;
            }
            case OpKind::RmsNormalize: {
                const auto& v = val(n.a);
                const auto& gain = val(n.b);
                const int64_t m = v.numel();
                double ms = 0.0;
                for (int64_t i = 0; i < m; ++i) ms += static_cast<double>(v[i]) * static_cast<double>(v[i]);
                ms = ms / static_cast<double>(m) + n.attrs.scalar;
                const double inv_rms = 1.0 / std::sqrt(ms);
                // y_i = gain_i v_i r with r = (mean(v^2)+eps)^(-1/2)
                // dv_j = g_j gain_j r - (r^3/m) v_j * sum_i g_i gain_i v_i
                double weighted = 0.0;
                for (int64_t i = 0; i < m; ++i)
                    weighted += static_cast<double>(g[i]) * static_cast<double>(gain[i]) *
                                static_cast<double>(v[i]);
                const double r3_over_m = inv_rms * inv_rms * inv_rms / static_cast<double>(m);
                TensorT<S> dv(v.shape());
                TensorT<S> dgain(gain.shape());
                for (int64_t i = 0; i < m; ++i) {
                    dv[i] = static_cast<S>(static_cast<double>(g[i]) * static_cast<double>(gain[i]) * inv_rms -
                                           r3_over_m * static_cast<double>(v[i]) * weighted);
                    dgain[i] = static_cast<S>(static_cast<double>(g[i]) * static_cast<double>(v[i]) * inv_rms);
                }
                acc(n.a, dv);
                acc(n.b, dgain);
                return;
            }
            case OpKind::Sum: {
                const auto& x = val(n.a);
                acc(n.a, TensorT<S>::full(x.shape(), g[0]));
                return;
            }
            case OpKind::SquaredNorm: {
                const auto& x = val(n.a);
                TensorT<S> da(x.shape());
                for (int64_t i = 0; i < x.numel(); ++i) da[i] = S(2) * g[0] * x[i];
                acc(n.a, da);
                return;
            }
            case OpKind::Dot: {
                const auto& a = val(n.a);
                const auto& b = val(n.b);
                TensorT<S> da(a.shape());
                TensorT<S> db(b.shape());
                for (int64_t i = 0; i < a.numel(); ++i) {
                    da[i] = g[0] * b[i];
                    db[i] = g[0] * a[i];
                }
                acc(n.a, da);
                acc(n.b, db);
                return;
            }
            case OpKind::GatherRow: {
                const auto& m = val(n.a);
                TensorT<S> dm(m.shape());
                for (int64_t j = 0; j < m.dim(1); ++j) dm.at(n.attrs.i0, j) = g[j];
                acc(n.a, dm);
                return;
            }
            case OpKind::Slice: {
                const auto& x = val(n.a);
                TensorT<S> dx(x.shape());
                const int64_t begin = n.attrs.i0;
                if (x.rank() == 1) {
                    for (int64_t i = 0; i < g.numel(); ++i) dx[begin + i] = g[i];
                } else {
                    for (int64_t i = 0; i < g.dim(0); ++i)
                        for (int64_t j = 0; j < g.dim(1); ++j) dx.at(begin + i, j) = g.at(i, j);
                }
                acc(n.a, dx);
                return;
            }
            case OpKind::Outer: {
                const auto& a = val(n.a);
                const auto& b = val(n.b);
                TensorT<S> da(a.shape());
                TensorT<S> db(b.shape());
                for (int64_t i = 0; i < a.numel(); ++i) {
                    S acc_v = S(0);
                    for (int64_t j = 0; j < b.numel(); ++j) acc_v += g.at(i, j) * b[j];
                    da[i] = acc_v;
                }
                for (int64_t j = 0; j < b.numel(); ++j) {
                    S acc_v = S(0);
                    for (int64_t i = 0; i < a.numel(); ++i) acc_v += g.at(i, j) * a[i];
                    db[j] = acc_v;
                }
                acc(n.a, da);
                acc(n.b, db);
                return;
            }
        }
    }

    std::vector<NodeT<S>> nodes_;
};

using Trace = TraceT<double>;

// Lightweight handle pairing a trace with a node, so model code reads as
// ordinary math expressions.
template <class S>
struct VarT {
    TraceT<S>* trace = nullptr;
    NodeId id = -1;

    const TensorT<S>& value() const { return trace->value(id); }
};

using Var = VarT<double>;

namespace ops {

template <class S>
inline VarT<S> make_leaf(TraceT<S>& t, TensorT<S> v) {
    return {&t, t.leaf(std::move(v))};
}

template <class S>
inline VarT<S> apply2(OpKind k, VarT<S> a, VarT<S> b, OpAttrs attrs = {}) {
    std::array<NodeId, 2> in{a.id, b.id};
    return {a.trace, a.trace->forward_op(k, in, attrs)};
}

template <class S>
inline VarT<S> apply1(OpKind k, VarT<S> a, OpAttrs attrs = {}) {
    std::array<NodeId, 1> in{a.id};
    return {a.trace, a.trace->forward_op(k, in, attrs)};
}

template <class S> inline VarT<S> matmul(VarT<S> a, VarT<S> b) { return apply2(OpKind::MatMul, a, b); }
template <class S> inline VarT<S> add(VarT<S> a, VarT<S> b) { return apply2(OpKind::Add, a, b); }
template <class S> inline VarT<S> sub(VarT<S> a, VarT<S> b) { return apply2(OpKind::Subtract, a, b); }
template <class S> inline VarT<S> mul(VarT<S> a, VarT<S> b) { return apply2(OpKind::Multiply, a, b); }
template <class S> inline VarT<S> dot(VarT<S> a, VarT<S> b) { return apply2(OpKind::Dot, a, b); }
template <class S> inline VarT<S> outer(VarT<S> a, VarT<S> b) { return apply2(OpKind::Outer, a, b); }
template <class S> inline VarT<S> sigmoid(VarT<S> a) { return apply1(OpKind::Sigmoid, a); }
template <class S> inline VarT<S> relu(VarT<S> a) { return apply1(OpKind::Relu, a); }
template <class S> inline VarT<S> gelu(VarT<S> a) { return apply1(OpKind::Gelu, a); }
template <class S> inline VarT<S> softplus(VarT<S> a) { return apply1(OpKind::Softplus, a); }
template <class S> inline VarT<S> sum(VarT<S> a) { return apply1(OpKind::Sum, a); }
template <class S> inline VarT<S> squared_norm(VarT<S> a) { return apply1(OpKind::SquaredNorm, a); }

template <class S>
inline VarT<S> scale(VarT<S> a, double c) {
    return apply1(OpKind::ScalarScale, a, OpAttrs{c, 0, 0});
}

template <class S>
inline VarT<S> rms_normalize(VarT<S> v, VarT<S> gain, double eps) {
    return apply2(OpKind::RmsNormalize, v, gain, OpAttrs{eps, 0, 0});
}

template <class S>
inline VarT<S> gather_row(VarT<S> m, int64_t row) {
    return apply1(OpKind::GatherRow, m, OpAttrs{0.0, row, 0});
}

template <class S>
inline VarT<S> slice(VarT<S> a, int64_t begin, int64_t end) {
    return apply1(OpKind::Slice, a, OpAttrs{0.0, begin, end});
}

}  // namespace ops

}  // namespace ttt4rec
