#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "shiftindex/band_lu.hpp"

using namespace shiftindex;

namespace {

Eigen::MatrixXcd random_band(int n, int kl, int ku, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = std::max(0, i - kl); j <= std::min(n - 1, i + ku); ++j)
            A(i, j) = Complex(u(rng), u(rng));
    for (int i = 0; i < n; ++i) A(i, i) += 3.0;  // keep it comfortably regular
    return A;
}

}  // namespace

TEST_CASE("band LU solves match Eigen") {
    for (auto [n, kl, ku] : {std::tuple{12, 2, 3}, std::tuple{40, 5, 1}, std::tuple{81, 4, 4}}) {
        Eigen::MatrixXcd A = random_band(n, kl, ku, 1000 + n);
        BandLU lu(n, kl, ku);
        for (int i = 0; i < n; ++i)
            for (int j = std::max(0, i - kl); j <= std::min(n - 1, i + ku); ++j)
                lu.at(i, j) = A(i, j);

        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        Eigen::VectorXcd b(n);
        for (int i = 0; i < n; ++i) b(i) = Complex(u(rng), u(rng));

        double smax = lu.largest_singular_value(60);
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(A);
        CHECK(smax == doctest::Approx(svd.singularValues()(0)).epsilon(1e-6));

        lu.factor();
        std::vector<Complex> x(b.data(), b.data() + n);
        lu.solve(x);
        Eigen::VectorXcd xe = A.partialPivLu().solve(b);
        for (int i = 0; i < n; ++i) CHECK(std::abs(x[i] - xe(i)) < 1e-10);

        std::vector<Complex> y(b.data(), b.data() + n);
        lu.solve_transpose(y);
        Eigen::VectorXcd ye = A.transpose().partialPivLu().solve(b);
        for (int i = 0; i < n; ++i) CHECK(std::abs(y[i] - ye(i)) < 1e-10);

        double smin = lu.smallest_singular_value(60);
        CHECK(smin == doctest::Approx(svd.singularValues()(n - 1)).epsilon(1e-5));
    }
}

TEST_CASE("band LU handles pivoting on a zero diagonal") {
    // [[0,1],[1,0]] forces a row swap
    BandLU lu(2, 1, 1);
    lu.at(0, 1) = 1.0;
    lu.at(1, 0) = 1.0;
    lu.factor();
    std::vector<Complex> b = {Complex(2.0, 0.0), Complex(3.0, 0.0)};
    lu.solve(b);
    CHECK(std::abs(b[0] - Complex(3.0, 0.0)) < 1e-14);
    CHECK(std::abs(b[1] - Complex(2.0, 0.0)) < 1e-14);
}
