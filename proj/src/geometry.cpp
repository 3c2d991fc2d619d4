#include "shiftindex/geometry.hpp"

#include <algorithm>
#include <limits>
#include <cmath>

namespace shiftindex {

int ambient_diff_count(CovKind kind, int dim) {
    switch (kind) {
        case CovKind::Cosphere:
            return 2 * dim;
        case CovKind::Cylinder:
            return 4;
        case CovKind::Circle:
            return 2;
    }
    return 0;
}

Var diff_var(int diff_index, CovKind kind, int dim) {
    if (kind == CovKind::Cosphere) {
        if (diff_index < dim) return static_cast<Var>(diff_index);            // dx_i
        return static_cast<Var>(2 + (diff_index - dim));                      // dxi_i
    }
    if (kind == CovKind::Cylinder) {
        static const Var map[4] = {Var::X0, Var::Cov0, Var::Cov1, Var::Cov2};  // dx dxi dt dtau
        return map[diff_index];
    }
    // circle: dt, dtau live in cov slots 1, 2
    return diff_index == 0 ? Var::Cov1 : Var::Cov2;
}

int SymbolField::bandwidth() const {
    int b = 0;
    for (const auto& [k, blk] : gens_)
        if (!blk.is_zero()) b = std::max(b, std::abs(k));
    return b;
}

RapidMatrix SymbolField::evaluate(const EvalPoint& p, int window, double t_shift) const {
    RapidMatrix m(window, d_);
    std::vector<EvalPoint> rows(2 * window + 1);
    for (int i = -window; i <= window; ++i) {
        EvalPoint q = p;
        auto xs = model_.orbit({p.x[0], p.x[1]}, i);
        q.x[0] = xs[0];
        q.x[1] = xs[1];
        if (kind_ == CovKind::Cylinder) q.cov[1] += t_shift * i;
        rows[i + window] = q;
    }
    std::vector<Complex> vals(2 * window + 1);
    for (const auto& [k, blk] : gens_) {
        if (std::abs(k) > 2 * window) continue;
        auto& diag = m.diagonal(k);
        for (int c = 0; c < d_ * d_; ++c) {
            if (blk.e[c].is_zero()) continue;
            blk.e[c].eval_batch(rows.data(), 2 * window + 1, vals.data());
            for (int i = -window; i <= window; ++i) {
                if (i + k < -window || i + k > window) continue;
                diag[i + window].d = d_;
                diag[i + window].a[c] = vals[i + window];
            }
        }
    }
    m.set_exact_bandwidth(bandwidth());
    return m;
}

Block SymbolField::entry(const EvalPoint& p, int row, int k, double t_shift) const {
    auto it = gens_.find(k);
    if (it == gens_.end()) return Block::zero(d_);
    EvalPoint q = p;
    auto xs = model_.orbit({p.x[0], p.x[1]}, row);
    q.x[0] = xs[0];
    q.x[1] = xs[1];
    if (kind_ == CovKind::Cylinder) q.cov[1] += t_shift * row;
    return it->second.eval(q);
}

SymbolField SymbolField::derivative(Var v) const {
    SymbolField f(model_, kind_, d_);
    f.set_declared_degree(degree_ - ((v == Var::X0 || v == Var::X1) ? 0 : 1));
    for (const auto& [k, blk] : gens_) {
        ExprBlock out;
        out.d = d_;
        bool nz = false;
        for (int c = 0; c < d_ * d_; ++c) {
            out.e[c] = blk.e[c].derivative(v);
            nz = nz || !out.e[c].is_zero();
        }
        if (nz) f.set_generator(k, std::move(out));
    }
    return f;
}

SymbolField SymbolField::adjoint() const {
    SymbolField f(model_, kind_, d_);
    f.set_declared_degree(degree_);
    for (const auto& [k, blk] : gens_) {
        // (sigma^*)_k (y) = conj-transpose of sigma_{-k} at y + 2 pi theta k
        const double a0 = 2.0 * kPi * model_.theta[0] * (-k);
        const double a1 = 2.0 * kPi * model_.theta[1] * (-k);
        ExprBlock out;
        out.d = d_;
        for (int i = 0; i < d_; ++i)
            for (int j = 0; j < d_; ++j)
                out.at(i, j) = Expr::conj(blk.at(j, i).shift_x(a0, a1));
        f.set_generator(-k, std::move(out));
    }
    return f;
}

SymbolField SymbolField::product(const SymbolField& other) const {
    SymbolField f(model_, kind_, d_);
    f.set_declared_degree(degree_ + other.degree_);
    for (const auto& [k1, b1] : gens_) {
        const double a0 = 2.0 * kPi * model_.theta[0] * k1;
        const double a1 = 2.0 * kPi * model_.theta[1] * k1;
        for (const auto& [k2, b2] : other.gens_) {
            // (ab)_k(x) = sum a_{k1}(x) b_{k2}(x + 2 pi theta k1)
            ExprBlock shifted;
            shifted.d = d_;
            for (int c = 0; c < d_ * d_; ++c) shifted.e[c] = b2.e[c].shift_x(a0, a1);
            ExprBlock prod;
            prod.d = d_;
            for (int i = 0; i < d_; ++i)
                for (int j = 0; j < d_; ++j) {
                    Expr s = Expr::constant(0.0);
                    for (int m = 0; m < d_; ++m)
                        s = s + b1.at(i, m) * shifted.at(m, j);
                    prod.at(i, j) = s;
                }
            if (prod.is_zero()) continue;
            auto it = f.gens_.find(k1 + k2);
            if (it == f.gens_.end()) {
                f.set_generator(k1 + k2, std::move(prod));
            } else {
                for (int c = 0; c < d_ * d_; ++c)
                    it->second.e[c] = it->second.e[c] + prod.e[c];
            }
        }
    }
    return f;
}

SymbolField SymbolField::add(const SymbolField& other) const {
    SymbolField f = *this;
    for (const auto& [k, blk] : other.gens_) {
        auto it = f.gens_.find(k);
        if (it == f.gens_.end()) {
            f.set_generator(k, blk);
        } else {
            for (int c = 0; c < d_ * d_; ++c) it->second.e[c] = it->second.e[c] + blk.e[c];
        }
    }
    return f;
}

SymbolField SymbolField::scale(Complex z) const {
    SymbolField f = *this;
    for (auto& [k, blk] : f.gens_)
        for (int c = 0; c < d_ * d_; ++c) blk.e[c] = Expr::constant(z) * blk.e[c];
    return f;
}

SymbolField SymbolField::substitute(Var v, Complex value) const {
    SymbolField f = *this;
    for (auto& [k, blk] : f.gens_)
        for (int c = 0; c < d_ * d_; ++c) blk.e[c] = blk.e[c].substitute(v, value);
    return f;
}

SymbolField SymbolField::orbit_shift(int n) const {
    const double a0 = 2.0 * kPi * model_.theta[0] * n;
    const double a1 = 2.0 * kPi * model_.theta[1] * n;
    SymbolField f = *this;
    for (auto& [k, blk] : f.gens_)
        for (int c = 0; c < d_ * d_; ++c) blk.e[c] = blk.e[c].shift_x(a0, a1);
    return f;
}

void GradedForm::set_component(unsigned mask, SymbolField f) { comps_[mask] = std::move(f); }

void GradedForm::accumulate(unsigned mask, const SymbolField& f) {
    auto it = comps_.find(mask);
    if (it == comps_.end())
        comps_[mask] = f;
    else
        it->second = it->second.add(f);
}

int GradedForm::degree() const {
    int deg = -1;
    for (const auto& [mask, f] : comps_) {
        const int d = __builtin_popcount(mask);
        if (deg == -1) deg = d;
        if (deg != d) return -1;
    }
    return deg;
}

GradedForm::Bidegree GradedForm::bidegree(unsigned mask, int /*n_diffs*/, CovKind kind, int dim) {
    Bidegree b;
    if (kind == CovKind::Cylinder) {
        b.ndx = (mask & 1u) ? 1 : 0;
        b.j = ((mask >> 1) & 1u) + ((mask >> 3) & 1u);  // dxi + dtau
        b.i = (mask >> 2) & 1u;                         // dt
    } else if (kind == CovKind::Cosphere) {
        for (int i = 0; i < dim; ++i) b.ndx += (mask >> i) & 1u;
        for (int i = dim; i < 2 * dim; ++i) b.j += (mask >> i) & 1u;
    } else {
        b.i = mask & 1u;        // dt
        b.j = (mask >> 1) & 1u; // dtau
    }
    return b;
}

int wedge_sign(unsigned a, unsigned b) {
    if (a & b) return 0;
    int sign = 1;
    for (unsigned bit = b; bit;) {
        const int j = __builtin_ctz(bit);
        bit &= bit - 1;
        // count bits of a strictly greater than j
        const unsigned higher = a >> (j + 1);
        if (__builtin_popcount(higher) & 1) sign = -sign;
    }
    return sign;
}

GradedForm GradedForm::wedge(const GradedForm& other) const {
    GradedForm r(n_diffs_);
    for (const auto& [ma, fa] : comps_)
        for (const auto& [mb, fb] : other.comps_) {
            const int s = wedge_sign(ma, mb);
            if (s == 0) continue;
            SymbolField prod = fa.product(fb);
            if (s == -1) prod = prod.scale(-1.0);
            r.accumulate(ma | mb, prod);
        }
    return r;
}

GradedForm GradedForm::exterior_derivative() const {
    GradedForm r(n_diffs_);
    for (const auto& [mask, f] : comps_) {
        const CovKind kind = f.cov_kind();
        const int dim = f.model().dim;
        for (int v = 0; v < n_diffs_; ++v) {
            const unsigned dv = 1u << v;
            if (mask & dv) continue;
            SymbolField df = f.derivative(diff_var(v, kind, dim));
            bool zero = true;
            for (const auto& [k, blk] : df.generators())
                if (!blk.is_zero()) zero = false;
            if (zero) continue;
            const int s = wedge_sign(dv, mask);
            if (s == -1) df = df.scale(-1.0);
            r.accumulate(dv | mask, df);
        }
    }
    return r;
}

GradedForm GradedForm::add(const GradedForm& other) const {
    GradedForm r = *this;
    for (const auto& [mask, f] : other.comps_) r.accumulate(mask, f);
    return r;
}

GradedForm GradedForm::scale(Complex z) const {
    GradedForm r(n_diffs_);
    for (const auto& [mask, f] : comps_) r.set_component(mask, f.scale(z));
    return r;
}

std::map<unsigned, RapidMatrix> GradedForm::evaluate(const EvalPoint& p, int window,
                                                     double t_shift) const {
    std::map<unsigned, RapidMatrix> r;
    for (const auto& [mask, f] : comps_) r.emplace(mask, f.evaluate(p, window, t_shift));
    return r;
}

GradedForm exterior_derivative(const SymbolField& f) {
    const int nd = ambient_diff_count(f.cov_kind(), f.model().dim);
    GradedForm r(nd);
    for (int v = 0; v < nd; ++v) {
        SymbolField df = f.derivative(diff_var(v, f.cov_kind(), f.model().dim));
        bool zero = true;
        for (const auto& [k, blk] : df.generators())
            if (!blk.is_zero()) zero = false;
        if (!zero) r.set_component(1u << v, std::move(df));
    }
    return r;
}

// ---------------------------------------------------------------------------
// Operators with shifts

int factor_order(Factor f) {
    switch (f) {
        case Factor::Xi1:
        case Factor::Xi2:
        case Factor::AbsXi:
            return 1;
        default:
            return 0;
    }
}

Expr factor_symbol(Factor f, int dim, const Expr& angular) {
    const Expr xi1 = Expr::var(Var::Cov0);
    const Expr xi2 = Expr::var(Var::Cov1);
    const Expr norm2 = dim == 1 ? xi1 * xi1 : xi1 * xi1 + xi2 * xi2;
    const Expr abs_xi = Expr::pow_half(norm2, 1);
    const Expr half = Expr::constant(0.5);
    switch (f) {
        case Factor::One:
            return Expr::constant(1.0);
        case Factor::Xi1:
            return xi1;
        case Factor::Xi2:
            return xi2;
        case Factor::AbsXi:
            return abs_xi;
        case Factor::Pplus:
            return half * (Expr::constant(1.0) + xi1 * Expr::pow_half(norm2, -1));
        case Factor::Pminus:
            return half * (Expr::constant(1.0) - xi1 * Expr::pow_half(norm2, -1));
        case Factor::Angular:
            return angular;
    }
    return Expr::constant(0.0);
}

SymbolField symbol_of_operator(const ShiftOperator& D, bool normalize) {
    const int ord = D.order();
    SymbolField f(D.model, CovKind::Cosphere, 1);
    f.set_declared_degree(normalize ? 0 : ord);
    const Expr xi1 = Expr::var(Var::Cov0);
    const Expr xi2 = Expr::var(Var::Cov1);
    const Expr norm2 = D.model.dim == 1 ? xi1 * xi1 : xi1 * xi1 + xi2 * xi2;
    for (const auto& t : D.terms) {
        if (factor_order(t.factor) != ord) continue;  // principal part only
        Expr e = t.coeff.to_expr() * factor_symbol(t.factor, D.model.dim, t.angular);
        if (normalize && ord > 0) e = e * Expr::pow_half(norm2, -ord);
        auto it = f.generators().find(t.k);
        if (it == f.generators().end())
            f.set_generator(t.k, ExprBlock::scalar(e));
        else
            it->second.e[0] = it->second.e[0] + e;
    }
    return f;
}

// ---------------------------------------------------------------------------
// Ellipticity

EllipticityReport check_ellipticity(const SymbolField& sigma, const std::vector<EvalPoint>& grid,
                                    double bound, int window, ExecMode mode) {
    const int bw = sigma.bandwidth();
    EllipticityReport rep;
    std::vector<double> inv_norms(grid.size());
    parallel_for(static_cast<std::int64_t>(grid.size()), mode, [&](std::int64_t i) {
        RapidMatrix m = sigma.evaluate(grid[i], window + bw);
        BandQR qr = fat_qr(m, window);
        qr.factor();
        const double smin = qr.smallest_singular_value();
        inv_norms[i] = smin > 0.0 ? 1.0 / smin : std::numeric_limits<double>::infinity();
    });
    rep.pass = true;
    for (size_t i = 0; i < grid.size(); ++i) {
        if (inv_norms[i] > rep.worst_inverse_norm) {
            rep.worst_inverse_norm = inv_norms[i];
            rep.worst_point = grid[i];
        }
        if (inv_norms[i] > bound) {
            rep.pass = false;
            rep.failures.emplace_back(grid[i], inv_norms[i]);
        }
    }
    // window-growth stability at the worst point
    RapidMatrix worst = sigma.evaluate(rep.worst_point, 2 * (window + bw));
    const SigmaTrend trend = window_sigma_trend(worst);
    rep.trend_slope = trend.slope;
    if (trend.slope < -0.4 && 1.0 / std::max(trend.sigma_min, 1e-300) > bound) {
        rep.pass = false;
        rep.failures.emplace_back(rep.worst_point, 1.0 / std::max(trend.sigma_min, 1e-300));
    }
    return rep;
}

SampledInverse inverse_symbol(const SymbolField& sigma, const std::vector<EvalPoint>& grid,
                              double tol, int window) {
    SampledInverse out;
    out.points = grid;
    out.inverses.reserve(grid.size());
    const int bw = sigma.bandwidth();
    for (const EvalPoint& p : grid) {
        RapidMatrix m = sigma.evaluate(p, window + bw);
        InvertResult r = invert(m, tol);
        out.certificates.push_back(r.certificate);
        out.inverses.push_back(std::move(r.inverse));
    }
    // Z-invariance of the inverse on a sample of points:
    // inv(g(p)) = T^{-1} inv(p) T up to window shrink
    const size_t step = std::max<size_t>(1, grid.size() / 8);
    for (size_t i = 0; i < grid.size(); i += step) {
        EvalPoint q = grid[i];
        auto xs = sigma.model().orbit({q.x[0], q.x[1]}, 1);
        q.x[0] = xs[0];
        q.x[1] = xs[1];
        RapidMatrix mq = sigma.evaluate(q, window + bw);
        RapidMatrix invq = invert(mq, tol).inverse;
        RapidMatrix shifted = out.inverses[i].conjugate_shift(1);
        const int H = window / 2;
        double defect = 0.0;
        for (int r = -H; r <= H; ++r)
            for (int c = -H; c <= H; ++c)
                defect = std::max(defect, (invq.entry(r, c) - shifted.entry(r, c)).max_abs());
        out.max_invariance_defect = std::max(out.max_invariance_defect, defect);
    }
    return out;
}

double invariance_defect(const SymbolField& sigma, const std::vector<EvalPoint>& grid,
                         int window) {
    double worst = 0.0;
    for (const EvalPoint& p : grid) {
        EvalPoint q = p;
        auto xs = sigma.model().orbit({p.x[0], p.x[1]}, 1);
        q.x[0] = xs[0];
        q.x[1] = xs[1];
        RapidMatrix mp = sigma.evaluate(p, window);
        RapidMatrix mq = sigma.evaluate(q, window);
        RapidMatrix shifted = mp.conjugate_shift(1);
        const int H = window - 1;
        for (int r = -H; r <= H; ++r)
            for (int c = -H; c <= H; ++c)
                worst = std::max(worst, (mq.entry(r, c) - shifted.entry(r, c)).max_abs());
    }
    return worst;
}

CompiledBundle::CompiledBundle(std::vector<const SymbolField*> fields) {
    n_fields_ = static_cast<int>(fields.size());
    d_ = fields.front()->block_dim();
    model_ = fields.front()->model();
    kind_ = fields.front()->cov_kind();
    for (int f = 0; f < n_fields_; ++f) {
        bandwidths_.push_back(fields[f]->bandwidth());
        max_bw_ = std::max(max_bw_, bandwidths_.back());
        for (const auto& [k, blk] : fields[f]->generators())
            for (int cell = 0; cell < d_ * d_; ++cell) {
                if (blk.e[cell].is_zero()) continue;
                outs_.push_back({f, k, cell, tape_.add(blk.e[cell])});
            }
    }
}

void CompiledBundle::evaluate(const EvalPoint& base, int window, double t_shift,
                              std::vector<RapidMatrix>& out) const {
    thread_local std::vector<EvalPoint> rows;
    thread_local std::vector<Complex> regs;
    const int count = 2 * window + 1;
    rows.resize(count);
    for (int i = -window; i <= window; ++i) {
        EvalPoint q = base;
        auto xs = model_.orbit({base.x[0], base.x[1]}, i);
        q.x[0] = xs[0];
        q.x[1] = xs[1];
        if (kind_ == CovKind::Cylinder) q.cov[1] += t_shift * i;
        rows[i + window] = q;
    }
    tape_.run(rows.data(), count, regs);
    out.assign(n_fields_, RapidMatrix(window, d_));
    for (const auto& o : outs_) {
        auto& diag = out[o.field].diagonal(o.k);
        const Complex* vals = ExprTape::slot(regs, o.slot, count);
        for (int i = -window; i <= window; ++i) {
            if (i + o.k < -window || i + o.k > window) continue;
            diag[i + window].d = d_;
            diag[i + window].a[o.cell] = vals[i + window];
        }
    }
    for (int f = 0; f < n_fields_; ++f) out[f].set_exact_bandwidth(bandwidths_[f]);
}

}  // namespace shiftindex
