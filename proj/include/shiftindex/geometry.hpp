#pragma once

#include <array>
#include <map>
#include <optional>
#include <vector>

#include "shiftindex/expr.hpp"
#include "shiftindex/rapid_matrix.hpp"

namespace shiftindex {

/// Flat torus with a translation isometry g(x) = x + 2 pi theta (mod 2 pi).
/// The codifferential fixes the covariables, and the Todd form is 1.
struct FlatModel {
    int dim = 1;  // 1 or 2
    std::array<double, 2> theta = {0.0, 0.0};

    std::array<double, 2> orbit(const std::array<double, 2>& x, int n) const {
        return {x[0] + 2.0 * kPi * theta[0] * n, x[1] + 2.0 * kPi * theta[1] * n};
    }
};

/// Which covariables a symbol field depends on.
enum class CovKind {
    Cosphere,  // (xi_1[, xi_2]) on S*M
    Cylinder,  // (xi, t, tau) on S(T*M x R^2), dim M = 1
    Circle,    // (t, tau) only: the Bott circle (stored in cov[1], cov[2])
};

/// A d x d matrix of closed-form expressions.
struct ExprBlock {
    int d = 1;
    Expr e[4];

    static ExprBlock scalar(Expr x) {
        ExprBlock b;
        b.d = 1;
        b.e[0] = std::move(x);
        return b;
    }
    Expr& at(int i, int j) { return e[i * d + j]; }
    const Expr& at(int i, int j) const { return e[i * d + j]; }
    Block eval(const EvalPoint& p) const {
        Block b(d);
        for (int i = 0; i < d * d; ++i) b.a[i] = e[i].eval(p);
        return b;
    }
    bool is_zero() const {
        for (int i = 0; i < d * d; ++i)
            if (!e[i].is_zero()) return false;
        return true;
    }
};

/// Smooth field of rapid-decay matrices over a (co)sphere bundle, given by
/// closed-form generators: entry (i, i+k) of the value at a point samples
/// generator k along the orbit, sigma_k(g^i x, cov) with t shifted by
/// i * t_shift for mapping-torus realizations.
class SymbolField {
  public:
    SymbolField() = default;
    SymbolField(FlatModel model, CovKind kind, int block_dim = 1)
        : model_(model), kind_(kind), d_(block_dim) {}

    const FlatModel& model() const { return model_; }
    CovKind cov_kind() const { return kind_; }
    int block_dim() const { return d_; }
    int declared_degree() const { return degree_; }
    void set_declared_degree(int deg) { degree_ = deg; }

    std::map<int, ExprBlock>& generators() { return gens_; }
    const std::map<int, ExprBlock>& generators() const { return gens_; }
    void set_generator(int k, ExprBlock b) { gens_[k] = std::move(b); }

    /// Bound c such that for |xi| / rho < c the generators are x-independent
    /// and purely diagonal (set by the cylinder extension builder).
    std::optional<double> plateau_cut() const { return plateau_cut_; }
    void set_plateau_cut(std::optional<double> c) { plateau_cut_ = c; }

    int bandwidth() const;

    /// Value at a point as a windowed matrix. t_shift = 0 for cosphere and
    /// cylinder realizations, 1 for the mapping-torus realization.
    RapidMatrix evaluate(const EvalPoint& p, int window, double t_shift = 0.0) const;

    /// Single entry (row, row + k) without assembling the window.
    Block entry(const EvalPoint& p, int row, int k, double t_shift = 0.0) const;

    /// Componentwise exact partial derivative.
    SymbolField derivative(Var v) const;

    /// Adjoint field: generators of sigma^*.
    SymbolField adjoint() const;

    /// Product of fields (generator convolution with orbit shifts).
    SymbolField product(const SymbolField& other) const;

    SymbolField add(const SymbolField& other) const;
    SymbolField scale(Complex z) const;

    /// Substitute a covariable by a constant (e.g. xi = +1).
    SymbolField substitute(Var v, Complex value) const;

    /// Map x -> x + 2 pi theta * n in every generator.
    SymbolField orbit_shift(int n) const;

  private:
    FlatModel model_;
    CovKind kind_ = CovKind::Cosphere;
    int d_ = 1;
    int degree_ = 0;
    std::optional<double> plateau_cut_;
    std::map<int, ExprBlock> gens_;
};

/// Differential form with SymbolField coefficients, stored per multi-index
/// of ambient differentials. Differential enumeration:
///   cosphere n=1:  0:dx   1:dxi
///   cosphere n=2:  0:dx1  1:dx2  2:dxi1  3:dxi2
///   cylinder n=1:  0:dx   1:dxi  2:dt    3:dtau
///   circle:        2:dt   3:dtau
class GradedForm {
  public:
    GradedForm() = default;
    explicit GradedForm(int n_diffs) : n_diffs_(n_diffs) {}

    int n_diffs() const { return n_diffs_; }
    const std::map<unsigned, SymbolField>& components() const { return comps_; }
    void set_component(unsigned mask, SymbolField f);
    void accumulate(unsigned mask, const SymbolField& f);

    int degree() const;  // common total degree (-1 if mixed/empty)

    /// Bidegree of a mask: (i, j) with i = #dt, j = #dxi + #dtau, plus ndx.
    struct Bidegree {
        int i = 0, j = 0, ndx = 0;
    };
    static Bidegree bidegree(unsigned mask, int n_diffs, CovKind kind, int dim);

    GradedForm wedge(const GradedForm& other) const;
    GradedForm exterior_derivative() const;
    GradedForm add(const GradedForm& other) const;
    GradedForm scale(Complex z) const;

    /// Evaluate every component at a point.
    std::map<unsigned, RapidMatrix> evaluate(const EvalPoint& p, int window,
                                             double t_shift = 0.0) const;

  private:
    int n_diffs_ = 2;
    std::map<unsigned, SymbolField> comps_;
};

/// d of a plain field: sum_v (d_v sigma) dv.
GradedForm exterior_derivative(const SymbolField& f);

/// Sign of dv_A ^ dv_B as a reordering of dv_{A u B}; 0 when not disjoint.
int wedge_sign(unsigned a, unsigned b);

/// Number of ambient differentials for a covariable kind and model dim.
int ambient_diff_count(CovKind kind, int dim);

/// Which Var a differential index differentiates.
Var diff_var(int diff_index, CovKind kind, int dim);

// ---------------------------------------------------------------------------
// Operators with shifts

/// Covariable factor of one operator term.
enum class Factor { One, Xi1, Xi2, AbsXi, Pplus, Pminus, Angular };

int factor_order(Factor f);

struct OperatorTerm {
    int k = 0;                   // shift power
    TrigPolynomial coeff;        // multiplication coefficient
    Factor factor = Factor::One;
    Expr angular;                // Factor::Angular: smooth degree-0 multiplier
};

/// D = sum_k a_k(x) F_k(-i d/dx) T^k on the torus.
struct ShiftOperator {
    FlatModel model;
    std::vector<OperatorTerm> terms;

    int order() const {
        int d = 0;
        for (const auto& t : terms) d = std::max(d, factor_order(t.factor));
        return d;
    }
    int coeff_bandwidth() const {
        int b = 0;
        for (const auto& t : terms) b = std::max(b, t.coeff.max_freq());
        return b;
    }
    int max_shift() const {
        int b = 0;
        for (const auto& t : terms) b = std::max(b, std::abs(t.k));
        return b;
    }
};

/// Closed-form expression of a covariable factor on the cosphere.
Expr factor_symbol(Factor f, int dim, const Expr& angular);

/// Principal symbol as a field of rapid-decay matrices on the cosphere
/// bundle. Terms below the leading order drop out. With normalize = true
/// the result is homogeneous of degree 0 (divided by |xi|^order).
SymbolField symbol_of_operator(const ShiftOperator& D, bool normalize = true);

// ---------------------------------------------------------------------------
// Ellipticity

struct EllipticityReport {
    bool pass = false;
    double worst_inverse_norm = 0.0;
    EvalPoint worst_point;
    double trend_slope = 0.0;  // sigma_min slope vs window at the worst point
    std::vector<std::pair<EvalPoint, double>> failures;
};

/// Pointwise invertibility over a sampling grid: inverse norms bounded and
/// the smallest window singular value stable under window growth.
EllipticityReport check_ellipticity(const SymbolField& sigma, const std::vector<EvalPoint>& grid,
                                    double bound, int window, ExecMode mode = ExecMode::Serial);

struct SampledInverse {
    std::vector<EvalPoint> points;
    std::vector<RapidMatrix> inverses;
    double max_invariance_defect = 0.0;  // Z-invariance of the inverse on samples
    std::vector<DecayCertificate> certificates;
};

/// Pointwise inverse field on a grid with decay certificates and the
/// Z-invariance relation checked on samples.
SampledInverse inverse_symbol(const SymbolField& sigma, const std::vector<EvalPoint>& grid,
                              double tol, int window);

/// Largest Z-invariance defect of a symbol field on sample points:
/// || evaluate(g(p)) - T^{-1} evaluate(p) T ||.
double invariance_defect(const SymbolField& sigma, const std::vector<EvalPoint>& grid, int window);

/// Several symbol fields compiled into one evaluation tape with shared
/// subexpressions; evaluates them jointly over a row window (the hot path
/// of the quadrature kernels).
class CompiledBundle {
  public:
    explicit CompiledBundle(std::vector<const SymbolField*> fields);

    /// Evaluate every field at the point; out[i] matches fields[i].
    void evaluate(const EvalPoint& base, int window, double t_shift,
                  std::vector<RapidMatrix>& out) const;

    int max_bandwidth() const { return max_bw_; }

  private:
    struct Out {
        int field, k, cell, slot;
    };
    ExprTape tape_;
    std::vector<Out> outs_;
    int n_fields_ = 0;
    int d_ = 1;
    FlatModel model_;
    CovKind kind_ = CovKind::Cosphere;
    int max_bw_ = 0;
    std::vector<int> bandwidths_;
};

}  // namespace shiftindex
