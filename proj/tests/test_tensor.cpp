#include <doctest.h>

#include "v4e/rng.hpp"
#include "v4e/tensor.hpp"

using namespace v4e;

TEST_CASE("tensor shape arithmetic") {
    Tensor<float> t({2, 3, 4});
    CHECK(t.numel() == 24);
    CHECK(t.rank() == 3);
    CHECK(t.dim(1) == 3);
    CHECK_THROWS(t.reshaped({5, 5}));
    CHECK(t.reshaped({4, 6}).shape == Shape{4, 6});
    CHECK_THROWS(Tensor<float>({2}, {1.f, 2.f, 3.f}));
}

TEST_CASE("gemm against hand-rolled loops") {
    Rng rng(99);
    auto a = Tensor<double>::randn({7, 5}, rng);
    auto b = Tensor<double>::randn({5, 9}, rng);
    Tensor<double> c({7, 9});
    gemm(a.data.data(), b.data.data(), c.data.data(), 7, 5, 9);
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 9; ++j) {
            double acc = 0;
            for (int k = 0; k < 5; ++k) acc += a[i * 5 + k] * b[k * 9 + j];
            CHECK(c[i * 9 + j] == doctest::Approx(acc).epsilon(1e-12));
        }

    // transposed variants agree with explicit transposition
    Tensor<double> at({5, 7});
    for (int i = 0; i < 7; ++i)
        for (int k = 0; k < 5; ++k) at[k * 7 + i] = a[i * 5 + k];
    Tensor<double> c2({7, 9});
    gemm(at.data.data(), b.data.data(), c2.data.data(), 7, 5, 9, false, true, false);
    for (int64_t i = 0; i < c.numel(); ++i) CHECK(c2[i] == doctest::Approx(c[i]).epsilon(1e-12));
}

TEST_CASE("rng streams are deterministic and distribution-sane") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
        double va = a.uniform();
        CHECK(va == b.uniform());
        CHECK(va >= 0.0);
        CHECK(va < 1.0);
    }
    bool differs = false;
    Rng a2(42);
    for (int i = 0; i < 10; ++i) differs |= (a2.uniform() != c.uniform());
    CHECK(differs);

    Rng n(7);
    double mean = 0, var = 0;
    const int kDraws = 20000;
    std::vector<double> xs(kDraws);
    for (auto& x : xs) x = n.normal();
    for (double x : xs) mean += x;
    mean /= kDraws;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= kDraws;
    CHECK(std::abs(mean) < 0.05);
    CHECK(std::abs(var - 1.0) < 0.05);

    Rng d(11);
    std::vector<double> w = {1.0, 3.0};
    int hi = 0;
    for (int i = 0; i < 10000; ++i) hi += d.categorical(w) == 1 ? 1 : 0;
    CHECK(hi > 7200);
    CHECK(hi < 7800);

    CHECK(Rng::derive(5, "a").next_u64() != Rng::derive(5, "b").next_u64());
}

TEST_CASE("uniform_int covers bounds") {
    Rng r(3);
    int lo_seen = 0, hi_seen = 0;
    for (int i = 0; i < 2000; ++i) {
        int64_t v = r.uniform_int(2, 5);
        CHECK(v >= 2);
        CHECK(v <= 5);
        lo_seen += v == 2;
        hi_seen += v == 5;
    }
    CHECK(lo_seen > 0);
    CHECK(hi_seen > 0);
}
