#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "shiftindex/geometry.hpp"

using namespace shiftindex;

namespace {

const double kGolden = (std::sqrt(5.0) - 1.0) / 2.0;

FlatModel circle_model(double theta) { return FlatModel{1, {theta, 0.0}}; }

std::vector<EvalPoint> cosphere_points_1d(int nx) {
    std::vector<EvalPoint> pts;
    for (int i = 0; i < nx; ++i)
        for (double xi : {1.0, -1.0}) {
            EvalPoint p;
            p.x[0] = 2.0 * kPi * i / nx;
            p.cov[0] = xi;
            pts.push_back(p);
        }
    return pts;
}

ShiftOperator pure_shift(const FlatModel& m) {
    ShiftOperator D;
    D.model = m;
    D.terms.push_back({1, TrigPolynomial::constant(1.0), Factor::One, {}});
    return D;
}

}  // namespace

TEST_CASE("symbol of the pure shift is the sequence shift") {
    auto D = pure_shift(circle_model(kGolden));
    SymbolField s = symbol_of_operator(D);
    EvalPoint p;
    p.x[0] = 0.7;
    p.cov[0] = 1.0;
    RapidMatrix m = s.evaluate(p, 8);
    for (int n = -8; n < 8; ++n) CHECK(std::abs(m.entry(n, n + 1).a[0] - 1.0) < 1e-15);
    CHECK(m.entry(0, 0).max_abs() < 1e-15);
}

TEST_CASE("symbol of -i d/dx is xi") {
    ShiftOperator D;
    D.model = circle_model(kGolden);
    D.terms.push_back({0, TrigPolynomial::constant(1.0), Factor::Xi1, {}});
    SymbolField s = symbol_of_operator(D, false);
    for (double xi : {1.0, -1.0}) {
        EvalPoint p;
        p.x[0] = 1.1;
        p.cov[0] = xi;
        RapidMatrix m = s.evaluate(p, 6);
        for (int n = -6; n <= 6; ++n) CHECK(std::abs(m.entry(n, n).a[0] - xi) < 1e-15);
    }
}

TEST_CASE("symbol of a(x) T samples the orbit") {
    // D = e^{ix} T: entry (i, i+1) = e^{i(x + 2 pi i theta)}
    const double theta = 0.3;
    ShiftOperator D;
    D.model = circle_model(theta);
    D.terms.push_back({1, TrigPolynomial::mode(1, 0, 1.0), Factor::One, {}});
    SymbolField s = symbol_of_operator(D);
    EvalPoint p;
    p.x[0] = 0.4;
    p.cov[0] = 1.0;
    RapidMatrix m = s.evaluate(p, 10);
    for (int i = -10; i < 10; ++i) {
        const Complex want = std::exp(kI * (p.x[0] + 2.0 * kPi * i * theta));
        CHECK(std::abs(m.entry(i, i + 1).a[0] - want) < 1e-14);
        CHECK(m.entry(i, i).max_abs() < 1e-15);
    }
}

TEST_CASE("Z-invariance of operator symbols on samples") {
    ShiftOperator D;
    D.model = circle_model(kGolden);
    D.terms.push_back({0, TrigPolynomial::mode(1, 0, Complex(0.5, 0.2)), Factor::Pplus, {}});
    D.terms.push_back({1, TrigPolynomial::mode(-2, 0, Complex(0.3, 0.0)), Factor::Pminus, {}});
    D.terms.push_back({-1, TrigPolynomial::constant(0.25), Factor::One, {}});
    SymbolField s = symbol_of_operator(D);
    CHECK(invariance_defect(s, cosphere_points_1d(7), 12) < 1e-12);
}

TEST_CASE("check_ellipticity: identity, unit-circle spectrum, Neumann bound") {
    FlatModel m = circle_model(kGolden);
    auto grid = cosphere_points_1d(16);

    SymbolField one(m, CovKind::Cosphere, 1);
    one.set_generator(0, ExprBlock::scalar(Expr::constant(1.0)));
    auto rep1 = check_ellipticity(one, grid, 1.5, 32);
    CHECK(rep1.pass);
    CHECK(rep1.worst_inverse_norm == doctest::Approx(1.0).epsilon(1e-8));

    // T - c, |c| = 1: spectrum of the shift meets c
    SymbolField bad(m, CovKind::Cosphere, 1);
    bad.set_generator(1, ExprBlock::scalar(Expr::constant(1.0)));
    bad.set_generator(0, ExprBlock::scalar(Expr::constant(-1.0)));
    auto rep2 = check_ellipticity(bad, grid, 20.0, 64);
    CHECK(!rep2.pass);
    CHECK(rep2.trend_slope < -0.5);

    // T - c, c = 0.5: Neumann bound 1/(1-|c|) = 2
    SymbolField ok(m, CovKind::Cosphere, 1);
    ok.set_generator(1, ExprBlock::scalar(Expr::constant(1.0)));
    ok.set_generator(0, ExprBlock::scalar(Expr::constant(-0.5)));
    auto rep3 = check_ellipticity(ok, grid, 2.0 + 1e-6, 48);
    CHECK(rep3.pass);
    CHECK(rep3.worst_inverse_norm <= 2.0 + 1e-6);
    CHECK(rep3.worst_inverse_norm > 1.8);
}

TEST_CASE("inverse_symbol: diagonal and Z-invariance") {
    FlatModel m = circle_model(kGolden);
    auto grid = cosphere_points_1d(5);

    SymbolField two(m, CovKind::Cosphere, 1);
    two.set_generator(0, ExprBlock::scalar(Expr::constant(2.0)));
    auto inv = inverse_symbol(two, grid, 1e-10, 16);
    for (const auto& r : inv.inverses) CHECK(std::abs(r.entry(0, 0).a[0] - 0.5) < 1e-12);
    CHECK(inv.max_invariance_defect < 1e-10);

    // genuinely coupled symbol: 1 + b e^{ix} T with |b| < 1
    SymbolField s(m, CovKind::Cosphere, 1);
    s.set_generator(0, ExprBlock::scalar(Expr::constant(1.0)));
    s.set_generator(1, ExprBlock::scalar(Expr::constant(0.35) * Expr::fourier_mode(1, 0)));
    auto inv2 = inverse_symbol(s, grid, 1e-8, 24);
    CHECK(inv2.max_invariance_defect < 1e-10);
    for (const auto& c : inv2.certificates) CHECK(c.decaying);
}

TEST_CASE("2x2 block inverse agrees with the Schur closed form") {
    // [[f, s], [-conj(s), conj(f)]] scalar entries: inverse = adj / det,
    // det = |f|^2 + |s|^2
    FlatModel m = circle_model(0.0);
    SymbolField blk(m, CovKind::Cylinder, 2);
    ExprBlock b;
    b.d = 2;
    const Expr f = Expr::constant(Complex(0.8, 0.1));
    const Expr s = Expr::var(Var::Cov1) + Expr::constant(kI) * Expr::var(Var::Cov2);
    b.at(0, 0) = f;
    b.at(0, 1) = s;
    b.at(1, 0) = -Expr::conj(s);
    b.at(1, 1) = Expr::conj(f);
    blk.set_generator(0, b);

    EvalPoint p;
    p.cov[0] = 0.0;
    p.cov[1] = 0.6;
    p.cov[2] = -0.8;
    RapidMatrix mm = blk.evaluate(p, 12);
    auto r = invert(mm, 1e-10);
    const Complex fv = Complex(0.8, 0.1);
    const Complex sv = Complex(0.6, -0.8);
    const double det = std::norm(fv) + std::norm(sv);
    CHECK(std::abs(r.inverse.entry(0, 0).at(0, 0) - std::conj(fv) / det) < 1e-10);
    CHECK(std::abs(r.inverse.entry(0, 0).at(0, 1) + sv / det) < 1e-10);
    CHECK(std::abs(r.inverse.entry(0, 0).at(1, 0) - std::conj(sv) / det) < 1e-10);
    CHECK(std::abs(r.inverse.entry(0, 0).at(1, 1) - fv / det) < 1e-10);
}

TEST_CASE("exterior derivative: constants, d^2 = 0, Leibniz") {
    FlatModel m = circle_model(kGolden);

    SymbolField c(m, CovKind::Cylinder, 1);
    c.set_generator(0, ExprBlock::scalar(Expr::constant(3.0)));
    GradedForm dc = exterior_derivative(c);
    CHECK(dc.components().empty());

    // f = e^{ix} * t / rho on the cylinder; d(df) evaluates to zero
    const Expr xi = Expr::var(Var::Cov0), t = Expr::var(Var::Cov1), tau = Expr::var(Var::Cov2);
    const Expr rho2 = xi * xi + t * t + tau * tau;
    SymbolField f(m, CovKind::Cylinder, 1);
    f.set_generator(0, ExprBlock::scalar(Expr::fourier_mode(1, 0) * t * Expr::pow_half(rho2, -1)));
    GradedForm ddf = exterior_derivative(f).exterior_derivative();
    EvalPoint p;
    p.x[0] = 0.9;
    p.cov[0] = 0.3;
    p.cov[1] = -0.5;
    p.cov[2] = 0.812;
    for (const auto& [mask, comp] : ddf.evaluate(p, 4)) {
        double worst = 0.0;
        for (int i = -2; i <= 2; ++i)
            for (int j = -2; j <= 2; ++j) worst = std::max(worst, comp.entry(i, j).max_abs());
        CHECK(worst < 1e-13);
    }

    // Leibniz at a point: -sigma^{-1} (d sigma) sigma^{-1} sigma
    //                     + sigma^{-1} d sigma = 0
    SymbolField s(m, CovKind::Cosphere, 1);
    s.set_generator(0, ExprBlock::scalar(Expr::constant(1.0) +
                                         Expr::constant(0.4) * Expr::fourier_mode(1, 0)));
    s.set_generator(1, ExprBlock::scalar(Expr::constant(0.3) * Expr::fourier_mode(-1, 0)));
    EvalPoint q;
    q.x[0] = 0.4;
    q.cov[0] = 1.0;
    const int W = 32;
    RapidMatrix sv = s.evaluate(q, W);
    RapidMatrix si = invert(sv, 1e-10).inverse;
    RapidMatrix ds = s.derivative(Var::X0).evaluate(q, W);
    RapidMatrix lhs = si.scale(-1.0).multiply(ds).multiply(si).multiply(sv).add(si.multiply(ds));
    double worst = 0.0;
    for (int i = -W / 2; i <= W / 2; ++i)
        for (int j = -W / 2; j <= W / 2; ++j) worst = std::max(worst, lhs.entry(i, j).max_abs());
    CHECK(worst < 1e-12);
}

TEST_CASE("declared homogeneity rescales exactly") {
    ShiftOperator D;
    D.model = circle_model(kGolden);
    D.terms.push_back({0, TrigPolynomial::mode(2, 0, Complex(1.0, 0.3)), Factor::Xi1, {}});
    SymbolField s = symbol_of_operator(D, false);
    CHECK(s.declared_degree() == 1);
    for (double lam : {2.0, 5.0}) {
        EvalPoint p, q;
        p.x[0] = 0.35;
        p.cov[0] = 1.0;
        q = p;
        q.cov[0] = lam;
        const Complex a = s.entry(p, 0, 0).a[0];
        const Complex b = s.entry(q, 0, 0).a[0];
        CHECK(std::abs(b - std::pow(lam, s.declared_degree()) * a) < 1e-14);
    }
    // normalized field is homogeneous of degree 0
    SymbolField n = symbol_of_operator(D, true);
    EvalPoint p, q;
    p.x[0] = 0.35;
    p.cov[0] = 1.0;
    q = p;
    q.cov[0] = 5.0;
    CHECK(std::abs(n.entry(p, 0, 0).a[0] - n.entry(q, 0, 0).a[0]) < 1e-14);
}

TEST_CASE("wedge bidegrees add and signs are consistent") {
    FlatModel m = circle_model(0.25);
    // cylinder masks: 1 = dx, 2 = dxi, 4 = dt, 8 = dtau
    SymbolField cf(m, CovKind::Cylinder, 1);
    cf.set_generator(0, ExprBlock::scalar(Expr::constant(1.0)));
    GradedForm a(4), b(4);
    a.set_component(4u, cf);       // dt
    b.set_component(2u | 8u, cf);  // dxi ^ dtau
    GradedForm w = a.wedge(b);
    REQUIRE(w.components().size() == 1);
    const unsigned mask = w.components().begin()->first;
    CHECK(mask == (2u | 4u | 8u));
    auto bd = GradedForm::bidegree(mask, 4, CovKind::Cylinder, 1);
    CHECK(bd.i == 1);
    CHECK(bd.j == 2);
    CHECK(bd.ndx == 0);

    // anticommutativity of 1-forms: dt ^ dxi = - dxi ^ dt
    GradedForm dxi(4);
    dxi.set_component(2u, cf);
    GradedForm w1 = a.wedge(dxi), w2 = dxi.wedge(a);
    EvalPoint p;
    const Complex v1 = w1.components().begin()->second.entry(p, 0, 0).a[0];
    const Complex v2 = w2.components().begin()->second.entry(p, 0, 0).a[0];
    CHECK(std::abs(v1 + v2) < 1e-15);

    CHECK(wedge_sign(1u, 2u) == 1);
    CHECK(wedge_sign(2u, 1u) == -1);
    CHECK(wedge_sign(1u, 1u) == 0);
    CHECK(wedge_sign(3u, 4u) == 1);
    CHECK(wedge_sign(4u, 3u) == 1);   // two transpositions
    CHECK(wedge_sign(2u, 5u) == -1);  // dxi past dx: one transposition
}

TEST_CASE("orbit shift and adjoint relations") {
    FlatModel m = circle_model(kGolden);
    ShiftOperator D;
    D.model = m;
    D.terms.push_back({1, TrigPolynomial::mode(1, 0, Complex(0.7, -0.1)), Factor::One, {}});
    D.terms.push_back({0, TrigPolynomial::constant(0.4), Factor::One, {}});
    SymbolField s = symbol_of_operator(D);
    SymbolField sa = s.adjoint();
    EvalPoint p;
    p.x[0] = 1.234;
    p.cov[0] = -1.0;
    RapidMatrix mv = s.evaluate(p, 10);
    RapidMatrix mva = sa.evaluate(p, 10);
    RapidMatrix dense_adj = mv.adjoint_matrix();
    for (int i = -8; i <= 8; ++i)
        for (int j = -8; j <= 8; ++j)
            CHECK((mva.entry(i, j) - dense_adj.entry(i, j)).max_abs() < 1e-13);

    // product field vs pointwise matrix product
    SymbolField prod = s.product(sa);
    RapidMatrix pv = prod.evaluate(p, 10);
    RapidMatrix ref = mv.multiply(mva);
    for (int i = -6; i <= 6; ++i)
        for (int j = -6; j <= 6; ++j)
            CHECK((pv.entry(i, j) - ref.entry(i, j)).max_abs() < 1e-13);
}
