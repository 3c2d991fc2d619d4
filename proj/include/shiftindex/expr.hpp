#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "shiftindex/core.hpp"

namespace shiftindex {

/// Evaluation point: base coordinates x (up to 2) and covariables
/// (xi_1[, xi_2] for cosphere symbols; xi, t, tau for cylinder symbols).
struct EvalPoint {
    double x[2] = {0, 0};
    double cov[3] = {0, 0, 0};
};

/// Variables the expression grammar can reference.
enum class Var : int { X0 = 0, X1 = 1, Cov0 = 2, Cov1 = 3, Cov2 = 4 };

namespace detail {
struct ExprNode;
}

/// Closed-form complex expression in the base/covariable coordinates,
/// closed under exact partial differentiation. Cheap to copy (shared AST).
class Expr {
  public:
    Expr();  // zero

    static Expr constant(Complex c);
    static Expr var(Var v);
    /// exp(i * (f1*x0 + f2*x1)), one Fourier mode of a trig polynomial.
    static Expr fourier_mode(int f0, int f1);
    static Expr add(Expr a, Expr b);
    static Expr sub(Expr a, Expr b);
    static Expr mul(Expr a, Expr b);
    static Expr neg(Expr a);
    /// Integer power (k may be negative; the base must not vanish then).
    static Expr pow_int(Expr a, int k);
    /// a^{p/2} for a real positive expression.
    static Expr pow_half(Expr a, int p);
    static Expr conj(Expr a);
    /// C-infinity plateau step: 0 for u <= 0, 1 for u >= 1, strictly
    /// monotone in between, flat to all orders at both ends.
    static Expr plateau(Expr u);

    Expr operator+(const Expr& o) const { return add(*this, o); }
    Expr operator-(const Expr& o) const { return sub(*this, o); }
    Expr operator*(const Expr& o) const { return mul(*this, o); }
    Expr operator-() const { return neg(*this); }

    Complex eval(const EvalPoint& p) const;
    void eval_batch(const EvalPoint* pts, int count, Complex* out) const;

    /// Exact partial derivative with respect to a variable.
    Expr derivative(Var v) const;

    /// Replace a variable by a constant value.
    Expr substitute(Var v, Complex value) const;

    /// x -> x + (a0, a1); Fourier modes pick up exact phases.
    Expr shift_x(double a0, double a1) const;

    bool is_zero() const;  // structurally zero

  private:
    friend class ExprTape;
    explicit Expr(std::shared_ptr<const detail::ExprNode> n) : node_(std::move(n)) {}
    std::shared_ptr<const detail::ExprNode> node_;
};

/// Flattened evaluation program for a set of expressions with shared
/// subexpressions evaluated once (structural hashing). Built once, then run
/// over batches of points; hot loops use this instead of tree walks.
class ExprTape {
  public:
    /// Register an expression; returns its output slot.
    int add(const Expr& e);

    /// Evaluate all tape nodes at a batch of points into the caller's
    /// register buffer (thread safe across buffers).
    void run(const EvalPoint* pts, int count, std::vector<Complex>& regs) const;

    /// Batch values of a slot within a register buffer.
    static const Complex* slot(const std::vector<Complex>& regs, int id, int count) {
        return regs.data() + static_cast<size_t>(id) * count;
    }

    int size() const { return static_cast<int>(ops_.size()); }

  private:
    struct Op {
        int code;  // mirrors the AST op
        int a = -1, b = -1;
        int i1 = 0, i2 = 0;
        Complex c{};
    };
    std::vector<Op> ops_;
    std::map<std::string, int> cse_;
    int intern(const void* node);
};

/// Trigonometric polynomial in the base coordinates: sum of
/// amplitude * exp(i m . x) terms. Exact derivatives and products.
struct TrigPolynomial {
    struct Term {
        int freq[2] = {0, 0};
        Complex amp{};
    };
    std::vector<Term> terms;

    static TrigPolynomial constant(Complex c) {
        TrigPolynomial p;
        p.terms.push_back({{0, 0}, c});
        return p;
    }
    static TrigPolynomial mode(int f0, int f1, Complex amp) {
        TrigPolynomial p;
        p.terms.push_back({{f0, f1}, amp});
        return p;
    }
    Complex eval(const double* x) const {
        Complex s = 0.0;
        for (const auto& t : terms)
            s += t.amp * std::exp(kI * (t.freq[0] * x[0] + t.freq[1] * x[1]));
        return s;
    }
    TrigPolynomial derivative(int axis) const {
        TrigPolynomial p;
        for (const auto& t : terms) {
            if (t.freq[axis] == 0) continue;
            p.terms.push_back({{t.freq[0], t.freq[1]}, t.amp * kI * static_cast<double>(t.freq[axis])});
        }
        return p;
    }
    int max_freq() const {
        int m = 0;
        for (const auto& t : terms) m = std::max({m, std::abs(t.freq[0]), std::abs(t.freq[1])});
        return m;
    }
    Expr to_expr() const {
        Expr e = Expr::constant(0.0);
        for (const auto& t : terms)
            e = e + Expr::constant(t.amp) * Expr::fourier_mode(t.freq[0], t.freq[1]);
        return e;
    }
};

}  // namespace shiftindex
