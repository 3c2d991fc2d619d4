#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "shiftindex/rapid_matrix.hpp"

using namespace shiftindex;

namespace {

RapidMatrix random_band(int W, int bw, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    RapidMatrix m(W, 1);
    for (int k = -bw; k <= bw; ++k) {
        auto& diag = m.diagonal(k);
        for (int n = -W; n <= W; ++n) {
            if (n + k < -W || n + k > W) continue;
            diag[n + W] = Block::scalar(Complex(u(rng), u(rng)));
        }
    }
    m.set_exact_bandwidth(bw);
    return m;
}

Eigen::MatrixXcd to_eigen(const RapidMatrix& m) {
    const int dim = m.dense_dim();
    auto d = m.dense();
    Eigen::MatrixXcd A(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) A(i, j) = d[static_cast<size_t>(i) * dim + j];
    return A;
}

}  // namespace

TEST_CASE("entry/diagonal duality") {
    RapidMatrix m = random_band(16, 3, 42);
    for (int i = -16; i <= 16; ++i)
        for (int j = -16; j <= 16; ++j) {
            if (std::abs(j - i) > 3) continue;
            auto it = m.diagonals().find(j - i);
            REQUIRE(it != m.diagonals().end());
            CHECK(m.entry(i, j).a[0] == it->second[i + 16].a[0]);
        }
}

TEST_CASE("seminorm examples") {
    // identity, N = 5 -> 1
    CHECK(RapidMatrix::identity(8).seminorm(5) == doctest::Approx(1.0));
    // shift on offset +1, N = 3 -> 2^3
    CHECK(RapidMatrix::shift(8, 1).seminorm(3) == doctest::Approx(8.0));
    // a_k(n) = 2^{-|k|}, N = 1 -> max over k of 2^{-|k|} (1+|k|) = 1
    const int W = 6;
    RapidMatrix a(W, 1);
    for (int k = -W; k <= W; ++k) {
        auto& diag = a.diagonal(k);
        for (int n = -W; n <= W; ++n) {
            if (n + k < -W || n + k > W) continue;
            diag[n + W] = Block::scalar(std::pow(2.0, -std::abs(k)));
        }
    }
    // oracle by enumeration over the stored offsets
    double expect = 0.0;
    for (int k = -W; k <= W; ++k)
        expect = std::max(expect, std::pow(2.0, -std::abs(k)) * (1.0 + std::abs(k)));
    CHECK(expect == doctest::Approx(1.0));
    CHECK(a.seminorm(1) == doctest::Approx(expect));

    RapidMatrix empty;
    CHECK_THROWS_AS(empty.seminorm(2), NumericError);
}

TEST_CASE("multiply: shift inverse, bandwidth additivity, dense oracle") {
    const int W = 16;
    RapidMatrix t = RapidMatrix::shift(W, 1);
    RapidMatrix tinv = RapidMatrix::shift(W, -1);
    RapidMatrix prod = t.multiply(tinv);
    // identity except the edge row that leaves the window
    for (int n = -W; n < W; ++n) CHECK(std::abs(prod.entry(n, n).a[0] - 1.0) < 1e-15);

    RapidMatrix b1 = random_band(W, 1, 1);
    RapidMatrix b2 = random_band(W, 2, 2);
    RapidMatrix p = b1.multiply(b2);
    REQUIRE(p.exact_bandwidth().has_value());
    CHECK(*p.exact_bandwidth() == 3);

    // dense product oracle on the central block
    const int WW = 64;
    RapidMatrix x = random_band(WW, 2, 11), y = random_band(WW, 3, 12);
    RapidMatrix z = x.multiply(y);
    Eigen::MatrixXcd D = to_eigen(x) * to_eigen(y);
    const int c = WW;  // dense index of row 0
    for (int i = -32; i <= 32; ++i)
        for (int j = -32; j <= 32; ++j)
            CHECK(std::abs(z.entry(i, j).a[0] - D(c + i, c + j)) < 1e-12);
}

TEST_CASE("invert: trivial and Neumann oracle") {
    auto id = RapidMatrix::identity(8);
    auto r = invert(id, 1e-10);
    CHECK(r.inverse.inner_deviation_from_identity() < 1e-12);

    std::vector<Complex> twos(17, Complex(2.0, 0.0));
    auto d2 = RapidMatrix::diagonal(8, twos);
    auto rh = invert(d2, 1e-10);
    CHECK(std::abs(rh.inverse.entry(0, 0).a[0] - 0.5) < 1e-14);

    // (T - c)^{-1} = sum_m c^m T^{-(m+1)} for |c| < 1; full Neumann oracle
    const int W = 48;
    const double c = 0.5;
    RapidMatrix a = RapidMatrix::shift(W, 1).subtract(RapidMatrix::identity(W).scale(c));
    auto res = invert(a, 1e-8);
    CHECK(res.residual_left < 1e-10);
    for (int i = -12; i <= 12; ++i)
        for (int j = -12; j <= 12; ++j) {
            // (T-c)^{-1} entries: c^{i-j-1} for j < i, 0 otherwise
            const Complex want = (j < i) ? Complex(std::pow(c, i - j - 1), 0.0) : Complex{};
            CHECK(std::abs(res.inverse.entry(i, j).a[0] - want) < 1e-10);
        }

    // dense window inversion oracle (diagonally dominant case, where the
    // raw window inverse is faithful)
    RapidMatrix g = random_band(32, 2, 55).add(RapidMatrix::identity(32).scale(6.0));
    auto gres = invert(g, 1e-8);
    Eigen::MatrixXcd Ginv = to_eigen(g).inverse();
    for (int i = -8; i <= 8; ++i)
        for (int j = -8; j <= 8; ++j)
            CHECK(std::abs(gres.inverse.entry(i, j).a[0] - Ginv(32 + i, 32 + j)) < 1e-10);

    // spectrum meets the unit circle: T - c with |c| = 1; the smallest
    // singular value collapses as the window grows
    RapidMatrix s = RapidMatrix::shift(64, 1).subtract(RapidMatrix::identity(64));
    CHECK_THROWS_AS(invert(s, 1e-6), NumericError);
    auto trend = window_sigma_trend(s);
    CHECK(trend.slope < -0.5);
}

TEST_CASE("conjugate_shift") {
    auto id = RapidMatrix::identity(8);
    auto r = id.conjugate_shift(3);
    CHECK(r.window() == 5);
    for (int n = -5; n <= 5; ++n) CHECK(std::abs(r.entry(n, n).a[0] - 1.0) < 1e-15);

    // a_0(m) = m shifted by 1 gives m + 1
    const int W = 8;
    RapidMatrix a(W, 1);
    auto& diag = a.diagonal(0);
    for (int n = -W; n <= W; ++n) diag[n + W] = Block::scalar(static_cast<double>(n));
    int lost = 0;
    auto b = a.conjugate_shift(1, &lost);
    CHECK(lost == 1);
    for (int n = -7; n <= 7; ++n) CHECK(std::abs(b.entry(n, n).a[0] - Complex(n + 1.0, 0)) < 1e-15);
}

TEST_CASE("shift conjugation is an algebra automorphism") {
    const int W = 32;
    RapidMatrix a = random_band(W, 2, 5), b = random_band(W, 2, 6);
    RapidMatrix lhs = a.multiply(b).conjugate_shift(2);
    RapidMatrix rhs = a.conjugate_shift(2).multiply(b.conjugate_shift(2));
    for (int i = -24; i <= 24; ++i)
        for (int j = -24; j <= 24; ++j) {
            if (std::abs(i - j) > 4) continue;
            if (std::abs(i) > W - 8 || std::abs(j) > W - 8) continue;
            CHECK(std::abs(lhs.entry(i, j).a[0] - rhs.entry(i, j).a[0]) < 1e-12);
        }
}

TEST_CASE("adjoint matches dense adjoint") {
    RapidMatrix a = random_band(12, 3, 77);
    Eigen::MatrixXcd A = to_eigen(a);
    Eigen::MatrixXcd Astar = to_eigen(a.adjoint_matrix());
    CHECK((Astar - A.adjoint()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("block dim 2 product against dense") {
    const int W = 10;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto rnd_blocked = [&](int bw) {
        RapidMatrix m(W, 2);
        for (int k = -bw; k <= bw; ++k) {
            auto& diag = m.diagonal(k);
            for (int n = -W; n <= W; ++n) {
                if (n + k < -W || n + k > W) continue;
                Block b(2);
                for (int c = 0; c < 4; ++c) b.a[c] = Complex(u(rng), u(rng));
                diag[n + W] = b;
            }
        }
        m.set_exact_bandwidth(bw);
        return m;
    };
    RapidMatrix x = rnd_blocked(1), y = rnd_blocked(1);
    Eigen::MatrixXcd D = to_eigen(x) * to_eigen(y);
    RapidMatrix z = x.multiply(y);
    Eigen::MatrixXcd Z = to_eigen(z);
    for (int i = 4; i + 4 < Z.rows(); ++i)
        for (int j = 4; j + 4 < Z.cols(); ++j) CHECK(std::abs(Z(i, j) - D(i, j)) < 1e-12);
}
