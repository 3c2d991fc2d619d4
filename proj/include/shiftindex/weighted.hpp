#pragma once

#include <functional>
#include <vector>

#include "shiftindex/rapid_matrix.hpp"

namespace shiftindex {

/// Weight (n^2 + R^2)^s on the sequence lattice.
struct WeightedMeasure {
    double s = 0.0;
    double R = 1.0;
    double weight(double n) const { return std::pow(n * n + R * R, s); }
};

/// R-parametrized operator family with a declared order and prefactor.
struct RFamily {
    std::function<RapidMatrix(double)> sampler;
    int declared_order = 0;      // k: bounded l2(mu_{s,R}) -> l2(mu_{s-k,R})
    int prefactor_exponent = 0;  // the R^j prefactor
};

/// Operator norm of a between the weighted spaces l2(mu_{s,R}) and
/// l2(mu_{s-k,R}), computed by power iteration on the diagonally weighted
/// window matrix.
double weighted_operator_norm(const RapidMatrix& a, double s, double k, double R,
                              int iters = 60);

/// max over the R grid of the weighted norm of sampler(R).
double family_order_norm(const RFamily& f, double s, int k, const std::vector<double>& R_grid);

struct TraceResult {
    Complex value;
    double tail_bound = 0.0;   // from the diagonal decay certificate
    double diag_order = 0.0;   // fitted order of the diagonal entries
};

/// Sum of the diagonal (with block trace) over the window plus a tail
/// estimate. Rejects when the fitted diagonal order is >= -1.
TraceResult weighted_trace(const RapidMatrix& a);

/// Least squares slope of log|y| against log x (drops nonpositive |y|).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Measured sup of ((n+k)^2+R^2) / ((n^2+R^2)(1+k^2)) over the given ranges.
double shift_weight_constant(int n_range, int R_max, int k_range);

}  // namespace shiftindex
