#pragma once

#include <functional>

#include "shiftindex/geometry.hpp"

namespace shiftindex {

/// Index-formula constants C_j = (j-1)! / ((2 pi i)^j (2j-1)!).
Complex index_constant(int j);

/// Quadrature domain of a cycle: which sphere bundle, grid sizes, the Todd
/// factor (constant 1 on flat models) and the diagonal-sum window.
struct CycleDomain {
    enum class Kind {
        CosphereCircle,  // S*T^1: x grid x {+1, -1}
        BottCircle,      // circle t^2 + tau^2 = 1 (no base)
        CosphereTorus,   // S*T^2: x grid^2 x angle grid
        CylinderSphere,  // T^1 x S^2 in (xi, t, tau)
    };
    Kind kind = Kind::CosphereCircle;
    FlatModel model;
    int nx = 256;   // points per base circle factor
    int nmu = 32;   // polar Gauss-Legendre nodes (CylinderSphere)
    int nphi = 48;  // azimuthal / fiber-angle nodes
    int window = 48;  // diagonal-sum window for matrix values
    std::function<double(const EvalPoint&)> todd;  // degree-0 Todd factor; null = 1

    int base_dimension() const;      // dimension of the integration manifold
    CovKind cov_kind() const;
    /// j with 2j - 1 + (Todd degree 0) = base dimension, or 0 if none.
    int matching_j() const;
};

/// One quadrature node: evaluation point, weight (orientation included),
/// and the pullback Jacobian d(ambient coordinate)/d(chart coordinate).
struct QuadNode {
    EvalPoint p;
    double weight = 0.0;
    int q = 1;            // chart dimension
    double jac[4][3] = {};  // [ambient differential][chart coordinate]
};

std::vector<QuadNode> build_nodes(const CycleDomain& dom);

/// Gauss-Legendre nodes/weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

struct TauResult {
    Complex value{};
    bool degree_mismatch = false;  // integrand had no top-degree part
    double tail_err = 0.0;         // window-halving difference
    double quad_err = 0.0;         // grid-halving difference (when requested)
};

/// Closed graded trace: integral of the (0,0)-entry block trace of the
/// top-degree component against the Todd factor.
TauResult tau(const GradedForm& omega, const CycleDomain& dom, bool with_errors = false,
              ExecMode mode = ExecMode::Serial);

struct IndTResult {
    Complex value{};
    int nearest = 0;
    double residual = 0.0;   // |value - nearest|
    int j = 0;               // which term was evaluated
    double min_sigma = 0.0;  // smallest window singular value met on the grid
};

/// Topological index of an elliptic symbol field over the domain's cycle:
/// C_j tau((sigma^{-1} d sigma)^{2j-1}) for the degree-matching j.
IndTResult ind_t(const SymbolField& sigma, const CycleDomain& dom,
                 ExecMode mode = ExecMode::Serial);

/// Degree-0 cylinder extension of a circle cosphere symbol: plateau
/// interpolation in xi/rho between the xi = -1 and xi = +1 values. Sets the
/// plateau cut when the xi = -1 side is constant (checked numerically).
SymbolField cylinder_extension(const SymbolField& cosphere);

/// The degree-0 Bott symbol (t + i tau) / sqrt(t^2 + tau^2) on the circle.
SymbolField bott_symbol();

/// Scalar cylinder expression of the Bott generator (t + i tau) / rho with
/// rho^2 = xi^2 + t^2 + tau^2.
Expr bott_cylinder_expr();

/// External product: 2x2 block [[s1, s2], [-conj(s2), s1*]] over the
/// doubled sequence space. s1 must be a scalar-block cylinder field, s2 a
/// scalar cylinder expression (default Bott).
SymbolField external_product(const SymbolField& s1_cylinder, const Expr& s2);

struct HomotopyReport {
    bool elliptic_throughout = false;
    double max_deviation = 0.0;  // of ind_t along the path
    std::vector<Complex> values;
};

/// ind_t along the linear path between two elliptic symbols, ellipticity
/// checked at every step.
HomotopyReport homotopy_ind_t(const SymbolField& a, const SymbolField& b, const CycleDomain& dom,
                              int steps, double bound, ExecMode mode = ExecMode::Serial);

}  // namespace shiftindex
