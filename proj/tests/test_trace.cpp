#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <span>

#include "oracles.hpp"
#include "ttt4rec/grad_check.hpp"
#include "ttt4rec/trace.hpp"

using namespace ttt4rec;

namespace {

Var leaf(Trace& t, Tensor v) { return ops::make_leaf(t, std::move(v)); }

// Builds a scalar probe dot(op(x...), cotangent) so any primitive can be
// gradient-checked through a fixed linear functional.
double primitive_max_error(OpKind kind, const std::vector<Tensor>& inputs, const Tensor& cotangent,
                           OpAttrs attrs = {}) {
    std::function<Var(Trace&, std::span<const Var>)> f = [&](Trace& tr, std::span<const Var> leaves) {
        std::vector<NodeId> ids;
        for (size_t i = 0; i + 1 < leaves.size(); ++i) ids.push_back(leaves[i].id);
        Var y{&tr, tr.forward_op(kind, ids, attrs)};
        return ops::dot(y, leaves.back());
    };
    std::vector<Tensor> point = inputs;
    point.push_back(cotangent);
    return grad_check<double>(f, point, 1e-5);
}

}  // namespace

TEST_CASE("forward values match hand-computed cases") {
    Trace t;

    SUBCASE("rms-normalize of an all-equal vector with unit gain and eps 0") {
        Var v = leaf(t, Tensor::from({3}, {3, 3, 3}));
        Var g = leaf(t, Tensor::from({3}, {1, 1, 1}));
        Var y = ops::rms_normalize(v, g, 0.0);
        for (int64_t i = 0; i < 3; ++i) CHECK(y.value()[i] == doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("matmul by the identity returns the operand") {
        Var eye = leaf(t, Tensor::from({2, 2}, {1, 0, 0, 1}));
        Var a = leaf(t, Tensor::from({2, 2}, {3.5, -1, 2, 7}));
        Var y = ops::matmul(eye, a);
        for (int64_t i = 0; i < 4; ++i) CHECK(y.value()[i] == a.value()[i]);
    }

    SUBCASE("dot of (1,2,3) and (4,5,6) is 32") {
        Var a = leaf(t, Tensor::from({3}, {1, 2, 3}));
        Var b = leaf(t, Tensor::from({3}, {4, 5, 6}));
        CHECK(ops::dot(a, b).value()[0] == 32.0);
    }

    SUBCASE("matmul of random matrices matches the naive triple loop") {
        RngStream rng(11);
        Tensor a = oracle::random_tensor({3, 4}, rng);
        Tensor b = oracle::random_tensor({4, 5}, rng);
        Tensor expect = oracle::matmul(a, b);
        Var y = ops::matmul(leaf(t, a), leaf(t, b));
        for (int64_t i = 0; i < expect.numel(); ++i)
            CHECK(y.value()[i] == doctest::Approx(expect[i]).epsilon(1e-12));
    }
}

TEST_CASE("shape and kind errors are structured") {
    Trace t;
    Var a = leaf(t, Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6}));
    Var b = leaf(t, Tensor::from({2, 2}, {1, 2, 3, 4}));

    SUBCASE("matmul mismatch names the op and both shapes") {
        try {
            ops::matmul(a, b);
            FAIL("expected ShapeError");
        } catch (const ShapeError& e) {
            std::string msg = e.what();
            CHECK(msg.find("matmul") != std::string::npos);
            CHECK(msg.find("(2x3)") != std::string::npos);
            CHECK(msg.find("(2x2)") != std::string::npos);
        }
    }

    SUBCASE("add mismatch") {
        CHECK_THROWS_AS(ops::add(a, b), ShapeError);
    }

    SUBCASE("unknown primitive kind") {
        std::array<NodeId, 1> in{a.id};
        CHECK_THROWS_AS(t.forward_op(static_cast<OpKind>(200), in), Error);
    }

    SUBCASE("input ids must precede the op") {
        std::array<NodeId, 2> in{a.id, static_cast<NodeId>(99)};
        CHECK_THROWS_AS(t.forward_op(OpKind::Add, in), Error);
    }
}

TEST_CASE("backward closed forms") {
    SUBCASE("d/dx (x*x) at x=3 is 6") {
        Trace t;
        Var x = leaf(t, Tensor::scalar(3.0));
        Var y = ops::mul(x, x);
        auto grads = t.backward(y.id);
        CHECK(grads.at(x.id)[0] == doctest::Approx(6.0).epsilon(1e-14));
    }

    SUBCASE("d/dW |W k - v|^2 at W=0, k=(1), v=(1) is -2") {
        Trace t;
        Var w = leaf(t, Tensor::zeros({1, 1}));
        Var k = leaf(t, Tensor::from({1}, {1}));
        Var v = leaf(t, Tensor::from({1}, {1}));
        Var y = ops::squared_norm(ops::sub(ops::matmul(w, k), v));
        auto grads = t.backward(y.id);
        CHECK(grads.at(w.id)[0] == doctest::Approx(-2.0).epsilon(1e-14));
    }

    SUBCASE("gradient of a constant w.r.t. any leaf is a zero tensor") {
        Trace t;
        Var x = leaf(t, Tensor::from({2, 2}, {1, 2, 3, 4}));
        Var c = leaf(t, Tensor::scalar(5.0));
        Var y = ops::mul(c, c);
        auto grads = t.backward(y.id);
        const Tensor& gx = grads.at(x.id);
        CHECK(gx.same_shape(x.value()));
        for (int64_t i = 0; i < gx.numel(); ++i) CHECK(gx[i] == 0.0);
    }

    SUBCASE("non-scalar output is rejected") {
        Trace t;
        Var x = leaf(t, Tensor::from({2}, {1, 2}));
        CHECK_THROWS_AS(t.backward(x.id), ShapeError);
    }
}

TEST_CASE("backward is linear: grad of a sum equals sum of grads") {
    RngStream rng(17);
    Tensor xa = oracle::random_tensor({3, 3}, rng);
    Tensor xb = oracle::random_tensor({3}, rng);

    auto build = [&](Trace& t, Var& wa, Var& wb) {
        wa = leaf(t, xa);
        wb = leaf(t, xb);
        Var s1 = ops::squared_norm(ops::matmul(wa, wb));
        Var s2 = ops::sum(ops::sigmoid(wb));
        return std::pair{s1, s2};
    };

    Trace t;
    Var wa, wb;
    auto [s1, s2] = build(t, wa, wb);
    Var total = ops::add(s1, s2);
    auto g_total = t.backward(total.id);
    auto g1 = t.backward(s1.id);
    auto g2 = t.backward(s2.id);
    for (Var v : {wa, wb}) {
        const Tensor& sum_g = g_total.at(v.id);
        for (int64_t i = 0; i < sum_g.numel(); ++i)
            CHECK(sum_g[i] == doctest::Approx(g1.at(v.id)[i] + g2.at(v.id)[i]).epsilon(1e-12));
    }
}

TEST_CASE("forward evaluation is deterministic") {
    RngStream rng(23);
    Tensor a = oracle::random_tensor({4, 4}, rng);
    Tensor b = oracle::random_tensor({4}, rng);
    auto run = [&]() {
        Trace t;
        Var va = leaf(t, a);
        Var vb = leaf(t, b);
        Var y = ops::sum(ops::gelu(ops::matmul(va, vb)));
        return y.value()[0];
    };
    double first = run();
    for (int i = 0; i < 5; ++i) {
        double again = run();
        CHECK(std::memcmp(&first, &again, sizeof(double)) == 0);
    }
}

TEST_CASE("grad_check closed-form cases") {
    SUBCASE("linear functions are exact up to rounding") {
        RngStream rng(31);
        Tensor a = oracle::random_tensor({6}, rng);
        std::function<Var(Trace&, std::span<const Var>)> f = [&](Trace& t, std::span<const Var> leaves) {
            Var coeff = leaf(t, a);
            return ops::dot(coeff, leaves[0]);
        };
        double err = grad_check<double>(f, {oracle::random_tensor({6}, rng)}, 1e-5);
        CHECK(err <= 1e-9);
    }

    SUBCASE("|W k - v|^2 at a random 4x4 point") {
        RngStream rng(37);
        std::function<Var(Trace&, std::span<const Var>)> f = [](Trace&, std::span<const Var> leaves) {
            return ops::squared_norm(ops::sub(ops::matmul(leaves[0], leaves[1]), leaves[2]));
        };
        std::vector<Tensor> point = {oracle::random_tensor({4, 4}, rng), oracle::random_tensor({4}, rng),
                                     oracle::random_tensor({4}, rng)};
        CHECK(grad_check<double>(f, point, 1e-5) <= 1e-6);
    }

    SUBCASE("epsilon outside [1e-7, 1e-3] is rejected") {
        std::function<Var(Trace&, std::span<const Var>)> f = [](Trace&, std::span<const Var> leaves) {
            return ops::sum(leaves[0]);
        };
        CHECK_THROWS_AS(grad_check<double>(f, {Tensor::scalar(1.0)}, 1e-2), Error);
        CHECK_THROWS_AS(grad_check<double>(f, {Tensor::scalar(1.0)}, 1e-8), Error);
    }

    SUBCASE("non-finite value reports the perturbed coordinate") {
        std::function<Var(Trace&, std::span<const Var>)> f = [](Trace&, std::span<const Var> leaves) {
            // log-free construction that blows up near x = 1e-5: 1/(x - 1e-5)
            // is not expressible with the primitive set, so synthesize a NaN
            // through 0 * inf semantics instead: sqrt-like behavior via
            // rms-normalize with negative eps would do it, but keep it
            // simple: scale by a huge factor and softplus overflows to inf?
            // softplus is overflow-safe, so use multiply chains.
            Var x = leaves[0];
            Var y = x;
            for (int i = 0; i < 40; ++i) y = ops::mul(y, y);  // overflows to inf for |x|>1
            return ops::sum(y);
        };
        CHECK_THROWS_AS(grad_check<double>(f, {Tensor::scalar(1.5)}, 1e-5), NumericError);
    }
}

TEST_CASE("every primitive agrees with central finite differences over 100 seeds") {
    int seeds_run = 0;
    for (uint64_t seed = 1; seed <= 100; ++seed) {
        RngStream rng(derive_seed({seed, 0x9001}));
        const int64_t m = 1 + static_cast<int64_t>(rng.uniform_below(4));
        const int64_t k = 1 + static_cast<int64_t>(rng.uniform_below(4));
        const int64_t n = 1 + static_cast<int64_t>(rng.uniform_below(4));

        auto vec = [&](int64_t d) { return oracle::random_tensor({d}, rng); };
        auto mat = [&](int64_t r, int64_t c) { return oracle::random_tensor({r, c}, rng); };

        CHECK(primitive_max_error(OpKind::MatMul, {mat(m, k), mat(k, n)}, mat(m, n)) <= 1e-6);
        CHECK(primitive_max_error(OpKind::MatMul, {mat(m, k), vec(k)}, vec(m)) <= 1e-6);
        CHECK(primitive_max_error(OpKind::MatMul, {vec(k), mat(k, n)}, vec(n)) <= 1e-6);
        CHECK(primitive_max_error(OpKind::Add, {vec(n), vec(n)}, vec(n)) <= 1e-6);
        CHECK(primitive_max_error(OpKind::Subtract, {vec(n), vec(n)}, vec(n)) <= 1e-6);
        CHECK(primitive_max_error(OpKind::Multiply, {vec(n), vec(n)}, vec(n)) <= 1e-6);
        CHECK(primitive_max_error(OpKind::ScalarScale, {vec(n)}, vec(n), OpAttrs{-1.75, 0, 0}) <= 1e-6);
        CHECK(primitive_max_error(OpKind::Sigmoid, {vec(n)}, vec(n)) <= 1e-6);
        CHECK(primitive_max_error(OpKind::Gelu, {vec(n)}, vec(n)) <= 1e-6);
        CHECK(primitive_max_error(OpKind::Softplus, {vec(n)}, vec(n)) <= 1e-6);
        CHECK(primitive_max_error(OpKind::Sum, {vec(n)}, Tensor::scalar(rng.next_normal())) <= 1e-6);
        CHECK(primitive_max_error(OpKind::SquaredNorm, {vec(n)}, Tensor::scalar(rng.next_normal())) <= 1e-6);
        CHECK(primitive_max_error(OpKind::Dot, {vec(n), vec(n)}, Tensor::scalar(rng.next_normal())) <= 1e-6);
        CHECK(primitive_max_error(OpKind::Outer, {vec(m), vec(n)}, mat(m, n)) <= 1e-6);
        // rms-normalize over a single coordinate is scale-invariant up to the
        // eps term, which drives the true gradient below the finite-difference
        // noise floor; test it at dimension >= 2 and away from the origin,
        // where all coordinates carry O(1) gradients.
        const int64_t rms_n = std::max<int64_t>(2, n);
        Tensor rms_in({rms_n});
        for (int64_t i = 0; i < rms_n; ++i) {
            double mag = 0.5 + 1.5 * rng.next_unit();
            rms_in[i] = rng.next_unit() < 0.5 ? -mag : mag;
        }
        CHECK(primitive_max_error(OpKind::RmsNormalize, {rms_in, vec(rms_n)}, vec(rms_n),
                                  OpAttrs{1e-6, 0, 0}) <= 1e-6);
        CHECK(primitive_max_error(OpKind::GatherRow, {mat(m + 1, k)}, vec(k),
                                  OpAttrs{0.0, static_cast<int64_t>(rng.uniform_below(static_cast<uint64_t>(m + 1))), 0}) <= 1e-6);
        if (m + 1 >= 2) {
            CHECK(primitive_max_error(OpKind::Slice, {vec(m + 1)}, vec(m), OpAttrs{0.0, 1, m + 1}) <= 1e-6);
        }
        // Relu has a kink at zero; keep test points away from it.
        Tensor relu_in({n});
        for (int64_t i = 0; i < n; ++i) {
            double mag = 0.1 + rng.next_unit();
            relu_in[i] = rng.next_unit() < 0.5 ? -mag : mag;
        }
        CHECK(primitive_max_error(OpKind::Relu, {relu_in}, vec(n)) <= 1e-6);
        ++seeds_run;
    }
    CHECK(seeds_run == 100);
}
