#include <doctest.h>

#include <cmath>

#include "support/finite_diff.hpp"
#include "v4e/autodiff.hpp"
#include "v4e/rng.hpp"

using namespace v4e;
namespace vt = v4e::testing;

namespace {

// Builds a scalar graph from one input and checks the autodiff gradient
// against central differences.
void check_grad(const std::function<Var<double>(Tape<double>&, Var<double>)>& build,
                const Tensor<double>& x, double tol = 1e-6) {
    Tape<double> tape;
    Var<double> in = tape.leaf(x, true);
    Var<double> out = build(tape, in);
    REQUIRE(tape.val(out).numel() == 1);
    tape.backward(out);
    Tensor<double> analytic = tape.grad(in);

    auto f = [&](const Tensor<double>& probe) {
        Tape<double> t2;
        Var<double> i2 = t2.leaf(probe, true);
        return t2.val(build(t2, i2)).item();
    };
    Tensor<double> numeric = vt::numeric_grad<double>(f, x);
    CHECK(vt::max_rel_err(analytic, numeric) < tol);
}

Tensor<double> randt(Shape s, uint64_t seed) {
    Rng rng(seed);
    return Tensor<double>::randn(std::move(s), rng);
}

}  // namespace

TEST_CASE("elementwise op gradients match finite differences") {
    Tensor<double> x = randt({3, 4}, 1);
    Tensor<double> other = randt({3, 4}, 2);

    check_grad([&](Tape<double>& t, Var<double> in) {
        return ad::sum_sq(ad::add(in, t.leaf(other)));
    }, x);
    check_grad([&](Tape<double>& t, Var<double> in) {
        return ad::sum_sq(ad::sub(in, t.leaf(other)));
    }, x);
    check_grad([&](Tape<double>& t, Var<double> in) {
        return ad::sum(ad::mul(in, t.leaf(other)));
    }, x);
    check_grad([&](Tape<double>& t, Var<double> in) {
        return ad::sum_sq(ad::scale(in, -1.7));
    }, x);
    check_grad([&](Tape<double>& t, Var<double> in) {
        return ad::sum_sq(ad::add_scalar(in, 0.3));
    }, x);
    check_grad([&](Tape<double>& t, Var<double> in) {
        return ad::sum_sq(ad::silu(in));
    }, x);
    check_grad([&](Tape<double>& t, Var<double> in) {
        return ad::sum_sq(ad::sigmoid(in));
    }, x);
    check_grad([&](Tape<double>& t, Var<double> in) {
        return ad::mean(ad::mul(in, in));
    }, x);
}

TEST_CASE("abs_sum gradient away from kinks") {
    Tensor<double> x = randt({5, 5}, 3);
    for (auto& v : x.data)
        if (std::abs(v) < 0.05) v += 0.2;  // keep clear of the |.| kink
    check_grad([&](Tape<double>&, Var<double> in) { return ad::abs_sum(in); }, x);
}

TEST_CASE("matmul gradients (both operands)") {
    Tensor<double> a = randt({3, 5}, 4);
    Tensor<double> b = randt({5, 2}, 5);
    check_grad([&](Tape<double>& t, Var<double> in) {
        return ad::sum_sq(ad::matmul(in, t.leaf(b)));
    }, a);
    check_grad([&](Tape<double>& t, Var<double> in) {
        return ad::sum_sq(ad::matmul(t.leaf(a), in));
    }, b);
}

TEST_CASE("bmm gradients, both layouts") {
    Tensor<double> a = randt({2, 3, 4}, 6);
    Tensor<double> b = randt({2, 4, 5}, 7);
    Tensor<double> bt = randt({2, 5, 4}, 8);
    check_grad([&](Tape<double>& t, Var<double> in) {
        return ad::sum_sq(ad::bmm(in, t.leaf(b)));
    }, a);
    check_grad([&](Tape<double>& t, Var<double> in) {
        return ad::sum_sq(ad::bmm(t.leaf(a), in));
    }, b);
    check_grad([&](Tape<double>& t, Var<double> in) {
        return ad::sum_sq(ad::bmm(in, t.leaf(bt), true));
    }, a);
    check_grad([&](Tape<double>& t, Var<double> in) {
        return ad::sum_sq(ad::bmm(t.leaf(a), in, true));
    }, bt);
}

TEST_CASE("softmax and layer_norm gradients") {
    Tensor<double> x = randt({4, 6}, 9);
    Tensor<double> gamma = randt({6}, 10);
    Tensor<double> beta = randt({6}, 11);
    Tensor<double> w = randt({4, 6}, 12);

    check_grad([&](Tape<double>& t, Var<double> in) {
        return ad::sum(ad::mul(ad::softmax_lastdim(in), t.leaf(w)));
    }, x);
    check_grad([&](Tape<double>& t, Var<double> in) {
        return ad::sum_sq(ad::layer_norm(in, t.leaf(gamma), t.leaf(beta)));
    }, x, 1e-5);
    check_grad([&](Tape<double>& t, Var<double> in) {
        return ad::sum_sq(ad::layer_norm(t.leaf(x), in, t.leaf(beta)));
    }, gamma);
    check_grad([&](Tape<double>& t, Var<double> in) {
        return ad::sum_sq(ad::layer_norm(t.leaf(x), t.leaf(gamma), in));
    }, beta);
}

TEST_CASE("shape op gradients: reshape, permute, slice, concat, tile0") {
    Tensor<double> x = randt({2, 3, 4}, 13);
    Tensor<double> w = randt({4, 3, 2}, 14);

    check_grad([&](Tape<double>& t, Var<double> in) {
        return ad::sum_sq(ad::reshape(in, {6, 4}));
    }, x);
    check_grad([&](Tape<double>& t, Var<double> in) {
        return ad::sum(ad::mul(ad::permute(in, {2, 1, 0}), t.leaf(w)));
    }, x);
    check_grad([&](Tape<double>& t, Var<double> in) {
        return ad::sum_sq(ad::slice(in, 1, 1, 2));
    }, x);
    check_grad([&](Tape<double>& t, Var<double> in) {
        auto left = ad::slice(in, 2, 0, 2);
        auto right = ad::slice(in, 2, 2, 2);
        return ad::sum_sq(ad::concat<double>(2, {right, left}));
    }, x);
    Tensor<double> img = randt({3, 3}, 15);
    check_grad([&](Tape<double>& t, Var<double> in) {
        return ad::sum_sq(ad::tile0(in, 4));
    }, img);
}

TEST_CASE("permute value layout") {
    // x[i][j] -> y[j][i]
    Tensor<double> x({2, 3}, {1, 2, 3, 4, 5, 6});
    Tape<double> t;
    auto y = ad::permute(t.leaf(x), {1, 0});
    CHECK(t.val(y).shape == Shape{3, 2});
    CHECK(t.val(y).data == std::vector<double>{1, 4, 2, 5, 3, 6});
}

TEST_CASE("add_rowbcast gradient") {
    Tensor<double> a = randt({5, 3}, 16);
    Tensor<double> b = randt({3}, 17);
    check_grad([&](Tape<double>& t, Var<double> in) {
        return ad::sum_sq(ad::add_rowbcast(in, t.leaf(b)));
    }, a);
    check_grad([&](Tape<double>& t, Var<double> in) {
        return ad::sum_sq(ad::add_rowbcast(t.leaf(a), in));
    }, b);
}

TEST_CASE("conv3d gradients: input, weight, bias; strided causal") {
    ad::Conv3dSpec sp;
    sp.kd = 2; sp.kh = 3; sp.kw = 3;
    sp.sd = 2; sp.sh = 2; sp.sw = 2;
    sp.pad_d_left = 1; sp.pad_h = 1; sp.pad_w = 1;
    Tensor<double> x = randt({4, 6, 6, 2}, 18);
    Tensor<double> w = randt({2, 3, 3, 2, 3}, 19);
    Tensor<double> b = randt({3}, 20);

    check_grad([&](Tape<double>& t, Var<double> in) {
        return ad::sum_sq(ad::conv3d(in, t.leaf(w), t.leaf(b), sp));
    }, x, 1e-5);
    check_grad([&](Tape<double>& t, Var<double> in) {
        return ad::sum_sq(ad::conv3d(t.leaf(x), in, t.leaf(b), sp));
    }, w, 1e-5);
    check_grad([&](Tape<double>& t, Var<double> in) {
        return ad::sum_sq(ad::conv3d(t.leaf(x), t.leaf(w), in, sp));
    }, b);
}

TEST_CASE("conv3d causal padding never reads the future") {
    // With left-only temporal padding, output block d depends only on input
    // frames <= d*stride. Perturbing a later frame must not change earlier outputs.
    ad::Conv3dSpec sp;
    sp.kd = 4; sp.sd = 4;
    Tensor<double> x = randt({8, 2, 2, 1}, 21);
    Tensor<double> w = randt({4, 1, 1, 1, 2}, 22);
    Tensor<double> b = randt({2}, 23);

    Tape<double> t;
    auto y0 = t.val(ad::conv3d(t.leaf(x), t.leaf(w), t.leaf(b), sp));
    Tensor<double> x2 = x;
    for (int64_t i = 4 * 2 * 2; i < x2.numel(); ++i) x2[i] += 10.0;  // frames 4..7
    Tape<double> t2;
    auto y1 = t2.val(ad::conv3d(t2.leaf(x2), t2.leaf(w), t2.leaf(b), sp));
    // first temporal output block unchanged
    for (int64_t i = 0; i < 2 * 2 * 2; ++i) CHECK(y0[i] == doctest::Approx(y1[i]).epsilon(1e-12));
    // second block changed
    bool changed = false;
    for (int64_t i = 2 * 2 * 2; i < y0.numel(); ++i) changed |= (y0[i] != y1[i]);
    CHECK(changed);
}

TEST_CASE("upsample_nearest3d gradient and values") {
    Tensor<double> x = randt({2, 2, 2, 3}, 24);
    check_grad([&](Tape<double>& t, Var<double> in) {
        return ad::sum_sq(ad::upsample_nearest3d(in, 2, 2, 2));
    }, x);

    Tape<double> t;
    auto y = t.val(ad::upsample_nearest3d(t.leaf(x), 1, 2, 1));
    CHECK(y.shape == Shape{2, 4, 2, 3});
    CHECK(y.data[0] == x.data[0]);
    CHECK(t.val(ad::upsample_nearest3d(t.leaf(x), 3, 1, 1)).shape == Shape{6, 2, 2, 3});
}

TEST_CASE("no gradient flows into frozen subgraphs") {
    Tensor<double> a = randt({3, 3}, 25);
    Tensor<double> b = randt({3, 3}, 26);
    Tape<double> t;
    Var<double> frozen = t.leaf(a, false);
    Var<double> live = t.leaf(b, true);
    auto frozen_branch = ad::silu(ad::matmul(frozen, frozen));
    auto loss = ad::sum_sq(ad::sub(live, frozen_branch));
    t.backward(loss);
    CHECK(t.grad(frozen).data == Tensor<double>::zeros({3, 3}).data);
    double gsum = 0;
    for (double v : t.grad(live).data) gsum += std::abs(v);
    CHECK(gsum > 0.0);
}

TEST_CASE("fan-out accumulates gradients") {
    // y = sum(x*x) + 3*sum(x) -> dy/dx = 2x + 3
    Tensor<double> x = randt({4}, 27);
    Tape<double> t;
    auto in = t.leaf(x, true);
    auto y = ad::add(ad::sum_sq(in), ad::scale(ad::sum(in), 3.0));
    t.backward(y);
    auto g = t.grad(in);
    for (int64_t i = 0; i < 4; ++i) CHECK(g[i] == doctest::Approx(2 * x[i] + 3).epsilon(1e-12));
}

TEST_CASE("shape mismatches throw") {
    Tape<double> t;
    auto a = t.leaf(Tensor<double>::zeros({2, 3}));
    auto b = t.leaf(Tensor<double>::zeros({3, 2}));
    CHECK_THROWS_AS(ad::add(a, b), std::invalid_argument);
    CHECK_THROWS_AS(ad::matmul(a, a), std::invalid_argument);
    CHECK_THROWS_AS(ad::slice(a, 0, 0, 5), std::invalid_argument);
}
