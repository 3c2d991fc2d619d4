#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "shiftindex/weighted.hpp"

using namespace shiftindex;

namespace {

RapidMatrix diag_power(int W, double R, double p) {
    RapidMatrix m(W, 1);
    auto& d = m.diagonal(0);
    for (int n = -W; n <= W; ++n)
        d[n + W] = Block::scalar(std::pow(static_cast<double>(n) * n + R * R, p));
    m.set_exact_bandwidth(0);
    return m;
}

}  // namespace

TEST_CASE("family_order_norm: identity and cancelling weights") {
    RFamily id;
    id.sampler = [](double) { return RapidMatrix::identity(64); };
    id.declared_order = 0;
    CHECK(family_order_norm(id, 0.0, 0, {1, 2, 4, 8}) == doctest::Approx(1.0).epsilon(1e-10));

    // diag((n^2+R^2)^{1/2}) as an order-1 family: weights cancel exactly
    RFamily grow;
    grow.sampler = [](double R) { return diag_power(64, R, 0.5); };
    grow.declared_order = 1;
    CHECK(family_order_norm(grow, 0.0, 1, {1, 2, 4, 8, 16}) ==
          doctest::Approx(1.0).epsilon(1e-10));

    CHECK_THROWS_AS(family_order_norm(id, 0.0, 0, {}), NumericError);
    CHECK_THROWS_AS(family_order_norm(id, 0.0, 0, {0.5}), NumericError);
}

TEST_CASE("family_order_norm: shift bound from the weight inequality") {
    // || T ||_{mu_{1,R} -> mu_{1,R}} <= sqrt(C (1 + k^2)) uniformly in R,
    // with k = 1 and C <= 2 the weight-shift constant, so the norm is <= 2.
    RFamily shift;
    shift.sampler = [](double) { return RapidMatrix::shift(512, 1); };
    shift.declared_order = 0;
    const double nrm = family_order_norm(shift, 1.0, 0, {1, 2, 4, 8, 16, 32});
    CHECK(nrm <= 2.0);
    CHECK(nrm > 1.0);
    // oracle: sup over the window of the weight ratio at R = 1 (the worst R)
    double sup = 0.0;
    for (int n = -512; n <= 512; ++n) {
        const double num = static_cast<double>(n) * n + 1.0;
        const double den = (static_cast<double>(n) + 1.0) * (n + 1.0) + 1.0;
        sup = std::max(sup, num / den);
    }
    CHECK(nrm == doctest::Approx(std::sqrt(sup)).epsilon(1e-6));
}

TEST_CASE("weighted_trace: pi coth pi oracle") {
    const int W = 4096;
    RapidMatrix a(W, 1);
    auto& d = a.diagonal(0);
    for (int n = -W; n <= W; ++n)
        d[n + W] = Block::scalar(1.0 / (1.0 + static_cast<double>(n) * n));
    a.set_exact_bandwidth(0);
    auto r = weighted_trace(a);
    // high-precision oracle: partial sums plus integral tail correction
    long double s = 1.0L;
    const int N = 2000000;
    for (int n = 1; n <= N; ++n) s += 2.0L / (1.0L + static_cast<long double>(n) * n);
    s += 2.0L / N;  // integral tail
    const double oracle = static_cast<double>(s);
    CHECK(oracle == doctest::Approx(kPi / std::tanh(kPi)).epsilon(1e-9));
    CHECK(std::abs(r.value.real() - oracle) <= r.tail_bound + 1e-10);
    CHECK(std::abs(r.value.real() - kPi / std::tanh(kPi)) < 2e-3);

    CHECK_THROWS_AS(weighted_trace(RapidMatrix::identity(64)), NumericError);
}

TEST_CASE("trace scaling in R matches the declared order") {
    // order m = -2 family: diag((n^2+R^2)^{-1}), |tr| = O(R^{m+1})
    std::vector<double> Rs = {1, 2, 4, 8, 16}, vals;
    for (double R : Rs) {
        auto t = weighted_trace(diag_power(2048, R, -1.0));
        vals.push_back(std::abs(t.value));
    }
    const double slope = loglog_slope(Rs, vals);
    CHECK(slope == doctest::Approx(-1.0).epsilon(0.1));

    // order m = -3
    vals.clear();
    for (double R : Rs) {
        auto t = weighted_trace(diag_power(2048, R, -1.5));
        vals.push_back(std::abs(t.value));
    }
    CHECK(loglog_slope(Rs, vals) == doctest::Approx(-2.0).epsilon(0.13));
}

TEST_CASE("weight shift inequality constant is at most 2") {
    const double sup = shift_weight_constant(10000, 64, 32);
    CHECK(sup <= 2.0);
    CHECK(sup > 1.0);
}
