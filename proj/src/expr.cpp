#include "shiftindex/expr.hpp"

#include <cmath>
#include <cstdio>

namespace shiftindex {
namespace detail {

enum class Op : int {
    Const,
    Variable,
    Fourier,   // exp(i (f0 x0 + f1 x1))
    Add,
    Mul,
    PowInt,    // a^k, integer k
    PowHalf,   // a^{p/2}, real positive a
    Conj,
    Plateau,   // kappa(u)
    PlateauD,  // d^m/du^m kappa(u), m = 1, 2 stored in ipar
};

struct ExprNode {
    Op op;
    Complex c{};
    int ipar = 0, ipar2 = 0;
    std::shared_ptr<const ExprNode> a, b;
};

using NodePtr = std::shared_ptr<const ExprNode>;

static NodePtr make(Op op, Complex c = {}, int i1 = 0, int i2 = 0, NodePtr a = nullptr,
                    NodePtr b = nullptr) {
    auto n = std::make_shared<ExprNode>();
    n->op = op;
    n->c = c;
    n->ipar = i1;
    n->ipar2 = i2;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

static bool node_is_zero(const NodePtr& n) {
    return n->op == Op::Const && n->c == Complex{};
}
static bool node_is_one(const NodePtr& n) {
    return n->op == Op::Const && n->c == Complex{1.0, 0.0};
}

// Polynomial smoothstep of order 7 (C^7 at the junctions, exactly flat
// outside [0, 1]): S(u) = sum_k (-1)^k C(7+k, k) C(15, 7-k) u^{8+k}.
// Polynomial flats keep the plateau support exact while the quadrature
// error stays algebraic with small constants.
static double kappa_m(double u, int m) {
    static const double coef[8] = {6435.0,   -40040.0, 108108.0, -163800.0,
                                   150150.0, -83160.0, 25740.0,  -3432.0};
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return m == 0 ? 1.0 : 0.0;
    double acc = 0.0;
    for (int k = 0; k < 8; ++k) {
        double c = coef[k];
        const int p = 8 + k;
        if (m > p) continue;
        for (int q = 0; q < m; ++q) c *= (p - q);
        acc += c * std::pow(u, p - m);
    }
    return acc;
}

static Complex eval_node(const ExprNode* n, const EvalPoint& p) {
    switch (n->op) {
        case Op::Const:
            return n->c;
        case Op::Variable: {
            const int v = n->ipar;
            if (v <= 1) return Complex(p.x[v], 0.0);
            return Complex(p.cov[v - 2], 0.0);
        }
        case Op::Fourier:
            return std::exp(kI * (n->ipar * p.x[0] + n->ipar2 * p.x[1]));
        case Op::Add:
            return eval_node(n->a.get(), p) + eval_node(n->b.get(), p);
        case Op::Mul:
            return eval_node(n->a.get(), p) * eval_node(n->b.get(), p);
        case Op::PowInt: {
            const Complex base = eval_node(n->a.get(), p);
            const int k = n->ipar;
            if (k == 0) return Complex(1.0, 0.0);
            Complex r(1.0, 0.0);
            const Complex bb = k > 0 ? base : 1.0 / base;
            for (int i = 0; i < std::abs(k); ++i) r *= bb;
            return r;
        }
        case Op::PowHalf: {
            const double base = eval_node(n->a.get(), p).real();
            return Complex(std::pow(base, 0.5 * n->ipar), 0.0);
        }
        case Op::Conj:
            return std::conj(eval_node(n->a.get(), p));
        case Op::Plateau:
            return Complex(kappa_m(eval_node(n->a.get(), p).real(), 0), 0.0);
        case Op::PlateauD:
            return Complex(kappa_m(eval_node(n->a.get(), p).real(), n->ipar), 0.0);
    }
    return {};
}

static NodePtr deriv_node(const NodePtr& n, Var v);

static NodePtr mul_node(NodePtr a, NodePtr b) {
    if (node_is_zero(a) || node_is_zero(b)) return make(Op::Const, Complex{});
    if (node_is_one(a)) return b;
    if (node_is_one(b)) return a;
    if (a->op == Op::Const && b->op == Op::Const) return make(Op::Const, a->c * b->c);
    return make(Op::Mul, {}, 0, 0, a, b);
}

static NodePtr add_node(NodePtr a, NodePtr b) {
    if (node_is_zero(a)) return b;
    if (node_is_zero(b)) return a;
    if (a->op == Op::Const && b->op == Op::Const) return make(Op::Const, a->c + b->c);
    return make(Op::Add, {}, 0, 0, a, b);
}

static NodePtr deriv_node(const NodePtr& n, Var v) {
    const int vi = static_cast<int>(v);
    switch (n->op) {
        case Op::Const:
            return make(Op::Const, Complex{});
        case Op::Variable:
            return make(Op::Const, n->ipar == vi ? Complex{1.0, 0.0} : Complex{});
        case Op::Fourier: {
            if (vi > 1) return make(Op::Const, Complex{});
            const int f = vi == 0 ? n->ipar : n->ipar2;
            if (f == 0) return make(Op::Const, Complex{});
            return mul_node(make(Op::Const, kI * static_cast<double>(f)), n);
        }
        case Op::Add:
            return add_node(deriv_node(n->a, v), deriv_node(n->b, v));
        case Op::Mul:
            return add_node(mul_node(deriv_node(n->a, v), n->b),
                            mul_node(n->a, deriv_node(n->b, v)));
        case Op::PowInt: {
            const int k = n->ipar;
            if (k == 0) return make(Op::Const, Complex{});
            NodePtr inner = deriv_node(n->a, v);
            NodePtr rest = make(Op::PowInt, {}, k - 1, 0, n->a);
            return mul_node(make(Op::Const, Complex(static_cast<double>(k), 0.0)),
                            mul_node(rest, inner));
        }
        case Op::PowHalf: {
            const int p = n->ipar;
            if (p == 0) return make(Op::Const, Complex{});
            NodePtr inner = deriv_node(n->a, v);
            NodePtr rest = make(Op::PowHalf, {}, p - 2, 0, n->a);
            return mul_node(make(Op::Const, Complex(0.5 * p, 0.0)), mul_node(rest, inner));
        }
        case Op::Conj:
            return make(Op::Conj, {}, 0, 0, deriv_node(n->a, v));
        case Op::Plateau:
            return mul_node(make(Op::PlateauD, {}, 1, 0, n->a), deriv_node(n->a, v));
        case Op::PlateauD:
            return mul_node(make(Op::PlateauD, {}, n->ipar + 1, 0, n->a), deriv_node(n->a, v));
    }
    return make(Op::Const, Complex{});
}

}  // namespace detail

using detail::make;
using detail::Op;

Expr::Expr() : node_(make(Op::Const, Complex{})) {}

Expr Expr::constant(Complex c) { return Expr(make(Op::Const, c)); }
Expr Expr::var(Var v) { return Expr(make(Op::Variable, {}, static_cast<int>(v))); }
Expr Expr::fourier_mode(int f0, int f1) { return Expr(make(Op::Fourier, {}, f0, f1)); }
Expr Expr::add(Expr a, Expr b) { return Expr(detail::add_node(a.node_, b.node_)); }
Expr Expr::sub(Expr a, Expr b) {
    return add(a, mul(constant(Complex(-1.0, 0.0)), b));
}
Expr Expr::mul(Expr a, Expr b) { return Expr(detail::mul_node(a.node_, b.node_)); }
Expr Expr::neg(Expr a) { return mul(constant(Complex(-1.0, 0.0)), a); }
Expr Expr::pow_int(Expr a, int k) {
    if (k == 0) return constant(Complex(1.0, 0.0));
    if (k == 1) return a;
    return Expr(make(Op::PowInt, {}, k, 0, a.node_));
}
Expr Expr::pow_half(Expr a, int p) {
    if (p == 0) return constant(Complex(1.0, 0.0));
    return Expr(make(Op::PowHalf, {}, p, 0, a.node_));
}
Expr Expr::conj(Expr a) {
    if (a.node_->op == Op::Const) return constant(std::conj(a.node_->c));
    return Expr(make(Op::Conj, {}, 0, 0, a.node_));
}
Expr Expr::plateau(Expr u) { return Expr(make(Op::Plateau, {}, 0, 0, u.node_)); }

Complex Expr::eval(const EvalPoint& p) const { return detail::eval_node(node_.get(), p); }

void Expr::eval_batch(const EvalPoint* pts, int count, Complex* out) const {
    for (int i = 0; i < count; ++i) out[i] = detail::eval_node(node_.get(), pts[i]);
}

Expr Expr::derivative(Var v) const { return Expr(detail::deriv_node(node_, v)); }

namespace detail {

static NodePtr subst_node(const NodePtr& n, int vi, Complex value) {
    switch (n->op) {
        case Op::Const:
            return n;
        case Op::Variable:
            return n->ipar == vi ? make(Op::Const, value) : n;
        case Op::Fourier:
            return n;
        case Op::Add:
            return add_node(subst_node(n->a, vi, value), subst_node(n->b, vi, value));
        case Op::Mul:
            return mul_node(subst_node(n->a, vi, value), subst_node(n->b, vi, value));
        case Op::PowInt:
            return make(Op::PowInt, {}, n->ipar, 0, subst_node(n->a, vi, value));
        case Op::PowHalf:
            return make(Op::PowHalf, {}, n->ipar, 0, subst_node(n->a, vi, value));
        case Op::Conj:
            return make(Op::Conj, {}, 0, 0, subst_node(n->a, vi, value));
        case Op::Plateau:
            return make(Op::Plateau, {}, 0, 0, subst_node(n->a, vi, value));
        case Op::PlateauD:
            return make(Op::PlateauD, {}, n->ipar, 0, subst_node(n->a, vi, value));
    }
    return n;
}

static NodePtr shiftx_node(const NodePtr& n, double a0, double a1) {
    switch (n->op) {
        case Op::Const:
            return n;
        case Op::Variable: {
            if (n->ipar == 0 && a0 != 0.0)
                return add_node(n, make(Op::Const, Complex(a0, 0.0)));
            if (n->ipar == 1 && a1 != 0.0)
                return add_node(n, make(Op::Const, Complex(a1, 0.0)));
            return n;
        }
        case Op::Fourier: {
            const Complex phase = std::exp(kI * (n->ipar * a0 + n->ipar2 * a1));
            if (phase == Complex(1.0, 0.0)) return n;
            return mul_node(make(Op::Const, phase), n);
        }
        case Op::Add:
            return add_node(shiftx_node(n->a, a0, a1), shiftx_node(n->b, a0, a1));
        case Op::Mul:
            return mul_node(shiftx_node(n->a, a0, a1), shiftx_node(n->b, a0, a1));
        case Op::PowInt:
            return make(Op::PowInt, {}, n->ipar, 0, shiftx_node(n->a, a0, a1));
        case Op::PowHalf:
            return make(Op::PowHalf, {}, n->ipar, 0, shiftx_node(n->a, a0, a1));
        case Op::Conj:
            return make(Op::Conj, {}, 0, 0, shiftx_node(n->a, a0, a1));
        case Op::Plateau:
            return make(Op::Plateau, {}, 0, 0, shiftx_node(n->a, a0, a1));
        case Op::PlateauD:
            return make(Op::PlateauD, {}, n->ipar, 0, shiftx_node(n->a, a0, a1));
    }
    return n;
}

}  // namespace detail

Expr Expr::substitute(Var v, Complex value) const {
    return Expr(detail::subst_node(node_, static_cast<int>(v), value));
}

Expr Expr::shift_x(double a0, double a1) const {
    return Expr(detail::shiftx_node(node_, a0, a1));
}

bool Expr::is_zero() const { return detail::node_is_zero(node_); }

int ExprTape::intern(const void* nodep) {
    const auto* n = static_cast<const detail::ExprNode*>(nodep);
    int ia = -1, ib = -1;
    if (n->a) ia = intern(n->a.get());
    if (n->b) ib = intern(n->b.get());
    char key[96];
    std::snprintf(key, sizeof(key), "%d|%d|%d|%d|%d|%.17g|%.17g", static_cast<int>(n->op), ia, ib,
                  n->ipar, n->ipar2, n->c.real(), n->c.imag());
    auto it = cse_.find(key);
    if (it != cse_.end()) return it->second;
    Op op;
    op.code = static_cast<int>(n->op);
    op.a = ia;
    op.b = ib;
    op.i1 = n->ipar;
    op.i2 = n->ipar2;
    op.c = n->c;
    ops_.push_back(op);
    const int id = static_cast<int>(ops_.size()) - 1;
    cse_[key] = id;
    return id;
}

int ExprTape::add(const Expr& e) { return intern(e.node_.get()); }

void ExprTape::run(const EvalPoint* pts, int count, std::vector<Complex>& regs) const {
    regs.resize(ops_.size() * static_cast<size_t>(count));
    using detail::Op;
    for (size_t k = 0; k < ops_.size(); ++k) {
        Complex* out = regs.data() + k * count;
        const auto& op = ops_[k];
        const Complex* A = op.a >= 0 ? regs.data() + static_cast<size_t>(op.a) * count : nullptr;
        const Complex* B = op.b >= 0 ? regs.data() + static_cast<size_t>(op.b) * count : nullptr;
        switch (static_cast<detail::Op>(op.code)) {
            case Op::Const:
                for (int i = 0; i < count; ++i) out[i] = op.c;
                break;
            case Op::Variable:
                if (op.i1 <= 1)
                    for (int i = 0; i < count; ++i) out[i] = Complex(pts[i].x[op.i1], 0.0);
                else
                    for (int i = 0; i < count; ++i) out[i] = Complex(pts[i].cov[op.i1 - 2], 0.0);
                break;
            case Op::Fourier:
                for (int i = 0; i < count; ++i)
                    out[i] = std::exp(kI * (op.i1 * pts[i].x[0] + op.i2 * pts[i].x[1]));
                break;
            case Op::Add:
                for (int i = 0; i < count; ++i) out[i] = A[i] + B[i];
                break;
            case Op::Mul:
                for (int i = 0; i < count; ++i) out[i] = A[i] * B[i];
                break;
            case Op::PowInt: {
                const int p = op.i1;
                if (p == 2) {
                    for (int i = 0; i < count; ++i) out[i] = A[i] * A[i];
                } else if (p == -1) {
                    for (int i = 0; i < count; ++i) out[i] = 1.0 / A[i];
                } else {
                    for (int i = 0; i < count; ++i) {
                        const Complex base = p > 0 ? A[i] : 1.0 / A[i];
                        Complex r(1.0, 0.0);
                        for (int q = 0; q < std::abs(p); ++q) r *= base;
                        out[i] = r;
                    }
                }
                break;
            }
            case Op::PowHalf:
                for (int i = 0; i < count; ++i)
                    out[i] = Complex(std::pow(A[i].real(), 0.5 * op.i1), 0.0);
                break;
            case Op::Conj:
                for (int i = 0; i < count; ++i) out[i] = std::conj(A[i]);
                break;
            case Op::Plateau:
                for (int i = 0; i < count; ++i)
                    out[i] = Complex(detail::kappa_m(A[i].real(), 0), 0.0);
                break;
            case Op::PlateauD:
                for (int i = 0; i < count; ++i)
                    out[i] = Complex(detail::kappa_m(A[i].real(), op.i1), 0.0);
                break;
        }
    }
}

}  // namespace shiftindex
