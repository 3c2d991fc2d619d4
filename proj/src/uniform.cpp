#include "shiftindex/uniform.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include <Eigen/Dense>

namespace shiftindex {

RapidMatrix dilated_evaluate(const SymbolField& f, double x, double t, double phi, double R,
                             int window) {
    EvalPoint p;
    p.x[0] = x;
    p.cov[0] = R * std::cos(phi);
    p.cov[1] = t;
    p.cov[2] = R * std::sin(phi);
    return f.evaluate(p, window, /*t_shift=*/1.0);
}

std::map<unsigned, RapidMatrix> dilated_evaluate(const GradedForm& omega, double x, double t,
                                                 double phi, double R, int window) {
    EvalPoint p;
    p.x[0] = x;
    p.cov[0] = R * std::cos(phi);
    p.cov[1] = t;
    p.cov[2] = R * std::sin(phi);
    return omega.evaluate(p, window, /*t_shift=*/1.0);
}

namespace {

double max_norm_over_nodes(const SymbolField& coef, double R, int window) {
    const double xs[2] = {0.313, 2.117};
    double worst = 0.0;
    for (double x : xs)
        for (double t : {0.21, 0.68})
            for (double phi : {0.83, 2.51}) {
                RapidMatrix m = dilated_evaluate(coef, x, t, phi, R, window);
                BandLU lu = m.band_lu();
                worst = std::max(worst, lu.largest_singular_value(40));
            }
    return worst;
}

}  // namespace

OrderFitReport verify_est3(const SymbolField& coef, int i_deg, int j_deg,
                           const std::vector<double>& R_grid, int window) {
    OrderFitReport rep;
    rep.declared = -static_cast<double>(i_deg + j_deg);
    std::vector<double> wnorms;
    for (double R : R_grid) {
        const int W = std::max(window, static_cast<int>(4 * R) + 16);
        rep.R.push_back(R);
        rep.norms.push_back(max_norm_over_nodes(coef, R, W));
        RapidMatrix m = dilated_evaluate(coef, 0.313, 0.21, 0.83, R, W);
        wnorms.push_back(weighted_operator_norm(m, 1.0, rep.declared, R));
    }
    rep.fitted = loglog_slope(rep.R, rep.norms);
    rep.weighted_slope = loglog_slope(rep.R, wnorms);
    rep.pass = std::abs(rep.fitted - rep.declared) <= 0.25;
    return rep;
}

OrderFitReport verify_est4(const SymbolField& a, int ia, int ja, const SymbolField& b, int ib,
                           int jb, const std::vector<double>& R_grid, int window) {
    OrderFitReport rep;
    rep.declared = -static_cast<double>(ia + ib + ja + jb) - 1.0;
    SymbolField prod = a.product(b);
    for (double R : R_grid) {
        const int W = std::max(window, static_cast<int>(4 * R) + 16);
        double worst = 0.0;
        for (double x : {0.313, 2.117})
            for (double t : {0.21, 0.68})
                for (double phi : {0.83, 2.51}) {
                    RapidMatrix lhs = dilated_evaluate(prod, x, t, phi, R, W);
                    RapidMatrix rhs = dilated_evaluate(a, x, t, phi, R, W)
                                          .multiply(dilated_evaluate(b, x, t, phi, R, W));
                    RapidMatrix defect = lhs.subtract(rhs);
                    BandLU lu = defect.band_lu();
                    worst = std::max(worst, lu.largest_singular_value(40));
                }
        rep.R.push_back(R);
        rep.norms.push_back(worst);
    }
    rep.fitted = loglog_slope(rep.R, rep.norms);
    rep.pass = std::abs(rep.fitted - rep.declared) <= 0.25;
    return rep;
}

Complex torus_trace_integral(const GradedForm& omega, double R, const TorusGrid& grid, int window,
                             ExecMode mode) {
    // chart (x, t, phi); the boundary orientation of the covariable circle
    // bundle is -dx^dt^dphi. Ambient pullbacks: dx -> dx, dt -> dt,
    // dxi -> -R sin phi dphi, dtau -> R cos phi dphi
    const double hx = 2.0 * kPi / grid.nx;
    const double ht = 1.0 / grid.nt;
    const double hphi = 2.0 * kPi / grid.nphi;
    const std::int64_t total = static_cast<std::int64_t>(grid.nx) * grid.nt * grid.nphi;
    std::vector<Complex> vals(total);

    struct TopComp {
        unsigned mask;
        const SymbolField* field;
    };
    std::vector<TopComp> tops;
    for (const auto& [mask, f] : omega.components())
        if (__builtin_popcount(mask) == 3) tops.push_back({mask, &f});

    parallel_for(total, mode, [&](std::int64_t idx) {
        const int iphi = static_cast<int>(idx % grid.nphi);
        const int it = static_cast<int>((idx / grid.nphi) % grid.nt);
        const int ix = static_cast<int>(idx / (static_cast<std::int64_t>(grid.nphi) * grid.nt));
        const double x = hx * ix;
        const double t = ht * it;
        const double phi = hphi * iphi;
        double jac[4][3] = {};
        jac[0][0] = 1.0;
        jac[1][2] = -R * std::sin(phi);
        jac[2][1] = 1.0;
        jac[3][2] = R * std::cos(phi);
        Complex acc = 0.0;
        for (const auto& tc : tops) {
            double sub[3][3];
            int r = 0;
            for (int v = 0; v < 4; ++v) {
                if (!(tc.mask & (1u << v))) continue;
                for (int c = 0; c < 3; ++c) sub[r][c] = jac[v][c];
                ++r;
            }
            const double det = sub[0][0] * (sub[1][1] * sub[2][2] - sub[1][2] * sub[2][1]) -
                               sub[0][1] * (sub[1][0] * sub[2][2] - sub[1][2] * sub[2][0]) +
                               sub[0][2] * (sub[1][0] * sub[2][1] - sub[1][1] * sub[2][0]);
            if (det == 0.0) continue;
            auto it0 = tc.field->generators().find(0);
            if (it0 == tc.field->generators().end()) continue;
            // fiber trace with the window doubled until the sum settles
            Complex fiber = 0.0, prev = 0.0;
            int W = window;
            for (int pass = 0; pass < 6; ++pass) {
                fiber = 0.0;
                for (int n = -W; n <= W; ++n) {
                    EvalPoint q;
                    auto xs = tc.field->model().orbit({x, 0.0}, n);
                    q.x[0] = xs[0];
                    q.cov[0] = R * std::cos(phi);
                    q.cov[1] = t + n;
                    q.cov[2] = R * std::sin(phi);
                    fiber += it0->second.eval(q).trace();
                }
                if (pass > 0 && std::abs(fiber - prev) < 1e-10) break;
                prev = fiber;
                W *= 2;
            }
            acc += det * fiber;
        }
        vals[idx] = -acc * hx * ht * hphi;
    });
    return ordered_sum(vals);
}

TraceIdentityReport trace_identity(const GradedForm& omega, const std::vector<double>& R_grid,
                                   const CycleDomain& cylinder_dom, const TorusGrid& grid,
                                   double tol, ExecMode mode) {
    TraceIdentityReport rep;
    TauResult tr = tau(omega, cylinder_dom, false, mode);
    rep.tau_value = tr.value;
    for (double R : R_grid) {
        const int W = static_cast<int>(8 * R);
        const Complex v = torus_trace_integral(omega, R, grid, W, mode);
        rep.R.push_back(R);
        rep.torus_values.push_back(v);
        rep.max_deviation = std::max(rep.max_deviation, std::abs(v - rep.tau_value));
    }
    for (size_t i = 0; i < rep.torus_values.size(); ++i)
        for (size_t j = i + 1; j < rep.torus_values.size(); ++j)
            rep.r_variation =
                std::max(rep.r_variation, std::abs(rep.torus_values[i] - rep.torus_values[j]));
    rep.pass = rep.max_deviation <= tol && rep.r_variation <= tol;
    return rep;
}

namespace {

/// Shared machinery of the mapping-torus integrand kernels.
struct TorusKernel {
    const SymbolField* sigma;
    std::vector<SymbolField> dfields;
    std::unique_ptr<CompiledBundle> bundle;        // sigma + ambient derivatives
    std::unique_ptr<CompiledBundle> bundle_sigma;  // sigma alone
    double plateau_cut = 0.0;
    int d = 2;
    int bw = 1;

    explicit TorusKernel(const SymbolField& s) : sigma(&s) {
        for (int v = 0; v < 4; ++v)
            dfields.push_back(s.derivative(diff_var(v, CovKind::Cylinder, 1)));
        std::vector<const SymbolField*> fs;
        fs.push_back(&s);
        for (auto& f : dfields) fs.push_back(&f);
        bundle = std::make_unique<CompiledBundle>(fs);
        bundle_sigma = std::make_unique<CompiledBundle>(std::vector<const SymbolField*>{&s});
        plateau_cut = s.plateau_cut().value_or(0.0);
        d = s.block_dim();
        bw = std::max(1, std::max(s.bandwidth(), bundle->max_bandwidth()));
    }

    int live_half_range(double R, double phi, int fallback) const {
        if (plateau_cut <= 0.0) return fallback;
        const double c2 = std::cos(phi) * std::cos(phi) / (plateau_cut * plateau_cut) - 1.0;
        if (c2 <= 0.0) return 0;
        return static_cast<int>(std::ceil(R * std::sqrt(c2))) + 1;
    }
};

/// Exact-inverse node value: 3 [tr(Bx Bt Bphi) - tr(Bx Bphi Bt)] with
/// B_c = sigma_R^{-1} M_c; the trace is contracted through the compact
/// support of M_x, so only columns of the live block are solved.
Complex torus_node_exact(const TorusKernel& K, double x, double t, double phi, double R, int W) {
    const int d = K.d;
    const int bw = K.bw;
    EvalPoint p;
    p.x[0] = x;
    p.cov[0] = R * std::cos(phi);
    p.cov[1] = t;
    p.cov[2] = R * std::sin(phi);
    thread_local std::vector<RapidMatrix> evals;
    K.bundle->evaluate(p, W + bw, 1.0, evals);
    RapidMatrix& sv = evals[0];

    RapidMatrix Mx = std::move(evals[1]);
    RapidMatrix Mt = std::move(evals[3]);
    RapidMatrix Mphi = evals[2].scale(-R * std::sin(phi)).add(evals[4].scale(R * std::cos(phi)));

    const int live = std::min(W, K.live_half_range(R, phi, W) + bw);
    if (live == 0 && K.plateau_cut > 0.0) return 0.0;

    BandQR qr = fat_qr(sv, W, false, bw);
    qr.factor();
    const int s = bw * d + (d - 1);
    const int N = (2 * W + 1) * d;
    const int Mrows = N + 2 * s;

    auto matvec_fat = [&](const RapidMatrix& A, const std::vector<Complex>& xv,
                          std::vector<Complex>& y) {
        y.assign(Mrows, Complex{});
        for (const auto& [k, diag] : A.diagonals()) {
            for (int zi = -W - bw; zi <= W + bw; ++zi) {
                const int zj = zi + k;
                if (zj < -W || zj > W) continue;
                const Block& b = diag[zi + (W + bw)];
                if (b.is_zero()) continue;
                for (int ci = 0; ci < d; ++ci) {
                    Complex acc = 0.0;
                    for (int cj = 0; cj < d; ++cj) acc += b.at(ci, cj) * xv[(zj + W) * d + cj];
                    y[(zi + W) * d + ci + s] += acc;
                }
            }
        }
    };

    const int live_cols = (2 * live + 1) * d;
    auto col_index = [&](int z, int c) { return (z + W) * d + c; };

    thread_local std::vector<Complex> rhs, sol, tmp;
    thread_local std::vector<std::vector<Complex>> Z;
    auto solve_cols = [&](const RapidMatrix& Mb, const RapidMatrix& Mc) {
        Z.assign(live_cols, {});
        for (int z = -live; z <= live; ++z)
            for (int c = 0; c < d; ++c) {
                rhs.assign(Mrows, Complex{});
                rhs[col_index(z, c) + s] = 1.0;
                sol.assign(N, Complex{});
                qr.solve(rhs.data(), sol.data());
                matvec_fat(Mc, sol, tmp);
                qr.solve(tmp.data(), sol.data());
                matvec_fat(Mb, sol, tmp);
                qr.solve(tmp.data(), sol.data());
                Z[(z + live) * d + c] = sol;
            }
    };

    Complex T1 = 0.0, T2 = 0.0;
    for (int which = 0; which < 2; ++which) {
        if (which == 0)
            solve_cols(Mt, Mphi);
        else
            solve_cols(Mphi, Mt);
        Complex tr = 0.0;
        for (const auto& [k, diag] : Mx.diagonals()) {
            for (int u = -live; u <= live; ++u) {
                const int v = u + k;
                if (v < -live || v > live) continue;
                const Block& b = diag[u + (W + bw)];
                if (b.is_zero()) continue;
                for (int cu = 0; cu < d; ++cu)
                    for (int cv = 0; cv < d; ++cv) {
                        const Complex mx = b.at(cu, cv);
                        if (mx == Complex{}) continue;
                        tr += mx * Z[(v + live) * d + cv][col_index(u, cu)];
                    }
            }
        }
        (which == 0 ? T1 : T2) = tr;
    }
    return 3.0 * (T1 - T2);
}

/// Transported-inverse node value: sigma_R^{-1} replaced by the dilation of
/// the exact cylinder inverse (rows solved pointwise along the fiber).
Complex torus_node_transport(const TorusKernel& K, double x, double t, double phi, double R,
                             int W, int cyl_window) {
    const int d = K.d;
    const int bw = K.bw;
    EvalPoint p;
    p.x[0] = x;
    p.cov[0] = R * std::cos(phi);
    p.cov[1] = t;
    p.cov[2] = R * std::sin(phi);
    thread_local std::vector<RapidMatrix> evals;
    K.bundle->evaluate(p, W + bw, 1.0, evals);

    RapidMatrix Mx = std::move(evals[1]);
    RapidMatrix Mt = std::move(evals[3]);
    RapidMatrix Mphi = evals[2].scale(-R * std::sin(phi)).add(evals[4].scale(R * std::cos(phi)));

    const int live = std::min(W, K.live_half_range(R, phi, W) + bw);
    if (live == 0 && K.plateau_cut > 0.0) return 0.0;

    RapidMatrix A(W + bw, d);
    const int Wc = cyl_window;
    const int sc = bw * d + (d - 1);
    const int Nc = (2 * Wc + 1) * d;
    const int Mc = Nc + 2 * sc;
    thread_local std::vector<Complex> rhs, row;
    thread_local std::vector<RapidMatrix> cyl_eval;
    for (int i = -(W + bw); i <= W + bw; ++i) {
        const bool inert = K.plateau_cut > 0.0 &&
                           std::abs(R * std::cos(phi)) / std::hypot(R, t + i) <
                               K.plateau_cut - 1e-12;
        EvalPoint q;
        auto xs = K.sigma->model().orbit({x, 0.0}, i);
        q.x[0] = xs[0];
        q.cov[0] = R * std::cos(phi);
        q.cov[1] = t + i;
        q.cov[2] = R * std::sin(phi);
        if (inert) {
            const Block b = K.sigma->entry(q, 0, 0);
            Block binv(d);
            if (d == 1) {
                binv.a[0] = 1.0 / b.a[0];
            } else {
                const Complex det = b.at(0, 0) * b.at(1, 1) - b.at(0, 1) * b.at(1, 0);
                binv.at(0, 0) = b.at(1, 1) / det;
                binv.at(0, 1) = -b.at(0, 1) / det;
                binv.at(1, 0) = -b.at(1, 0) / det;
                binv.at(1, 1) = b.at(0, 0) / det;
            }
            A.set_entry(i, i, binv);
            continue;
        }
        K.bundle_sigma->evaluate(q, Wc + bw, 0.0, cyl_eval);
        BandQR qrt = fat_qr(cyl_eval[0], Wc, /*transpose=*/true, bw);
        qrt.factor();
        for (int c = 0; c < d; ++c) {
            rhs.assign(Mc, Complex{});
            rhs[(0 + Wc) * d + c + sc] = 1.0;
            row.assign(Nc, Complex{});
            qrt.solve(rhs.data(), row.data());
            for (int k = -Wc; k <= Wc; ++k) {
                if (i + k < -(W + bw) || i + k > W + bw) continue;
                Block blk = A.entry(i, i + k);
                blk.d = d;
                bool nz = !blk.is_zero();
                for (int cc = 0; cc < d; ++cc) {
                    const Complex v = row[(k + Wc) * d + cc];
                    blk.at(c, cc) = v;
                    nz = nz || std::abs(v) > 1e-300;
                }
                if (nz) A.set_entry(i, i + k, blk);
            }
        }
    }

    RapidMatrix Bx = A.multiply(Mx);
    RapidMatrix Bt = A.multiply(Mt);
    RapidMatrix Bphi = A.multiply(Mphi);
    auto trace_prod = [&](const RapidMatrix& C, const RapidMatrix& D) {
        Complex tr = 0.0;
        const int WW = C.window();
        for (const auto& [k, diag] : C.diagonals()) {
            for (int n = -WW; n <= WW; ++n) {
                const int m = n + k;
                if (m < -WW || m > WW) continue;
                const Block& cb = diag[n + WW];
                if (cb.is_zero()) continue;
                const Block db = D.entry(m, n);
                if (db.is_zero()) continue;
                tr += (cb * db).trace();
            }
        }
        return tr;
    };
    const Complex T1 = trace_prod(Bx.multiply(Bt), Bphi);
    const Complex T2 = trace_prod(Bx.multiply(Bphi), Bt);
    return 3.0 * (T1 - T2);
}

}  // namespace

MappingTorusResult ind_t_mapping_torus(const SymbolField& cyl_block, const FlatModel& model,
                                       const MappingTorusConfig& cfg, ExecMode mode) {
    MappingTorusResult res;
    TorusKernel K(cyl_block);
    const TorusGrid& g = cfg.grid;
    const double hx = 2.0 * kPi / g.nx;
    const double ht = 1.0 / g.nt;
    const Complex C2 = index_constant(2);
    (void)model;

    // phi quadrature: the integrand vanishes identically outside
    // cos phi > plateau_cut (the x-derivative factor is supported there),
    // so use composite Gauss panels over the support with edges at the
    // plateau transition angles; without a cut, fall back to the trapezoid
    std::vector<std::pair<double, double>> phiq;
    if (K.plateau_cut > 0.0) {
        const double cut = K.plateau_cut;
        const double hi = std::min(1.0, 3.0 * cut);
        const double pstar = std::acos(cut);
        const double pknee = hi < 1.0 ? std::acos(hi) : 0.0;
        const double edges[5] = {-pstar, -pknee, 0.0, pknee, pstar};
        std::vector<double> gn, gw;
        gauss_legendre(std::max(8, g.nphi / 2), gn, gw);
        for (int pan = 0; pan < 4; ++pan) {
            const double a = edges[pan], b = edges[pan + 1];
            if (b - a < 1e-12) continue;
            for (size_t q = 0; q < gn.size(); ++q)
                phiq.emplace_back(0.5 * (a + b) + 0.5 * (b - a) * gn[q],
                                  0.5 * (b - a) * gw[q]);
        }
    } else {
        for (int b = 0; b < g.nphi; ++b)
            phiq.emplace_back(2.0 * kPi * b / g.nphi, 2.0 * kPi / g.nphi);
    }
    const std::int64_t total =
        static_cast<std::int64_t>(g.nx) * g.nt * static_cast<std::int64_t>(phiq.size());

    auto window_for = [&](double R) {
        const double cut = K.plateau_cut > 0.0 ? K.plateau_cut : 0.25;
        return static_cast<int>(std::ceil(R * std::sqrt(1.0 / (cut * cut) - 1.0))) + cfg.pad;
    };

    auto sigma_ok = [&](double R) {
        const int W = window_for(R);
        for (double x : {0.4, 2.2})
            for (double t : {0.3, 0.8})
                for (double phi : {0.7, 2.4}) {
                    RapidMatrix sv = dilated_evaluate(*K.sigma, x, t, phi, R, W + K.bw);
                    BandQR qr = fat_qr(sv, W, false, K.bw);
                    const double smax = qr.largest_singular_value(30);
                    qr.factor();
                    if (qr.smallest_singular_value(30) < cfg.sigma_floor * smax) return false;
                }
        return true;
    };

    auto integrate = [&](double R, bool exact) {
        const int W = window_for(R);
        const std::int64_t nphi = static_cast<std::int64_t>(phiq.size());
        std::vector<Complex> vals(total);
        parallel_for(total, mode, [&](std::int64_t idx) {
            const int iphi = static_cast<int>(idx % nphi);
            const int it = static_cast<int>((idx / nphi) % g.nt);
            const int ix = static_cast<int>(idx / (nphi * g.nt));
            const double x = hx * ix, t = ht * it;
            const double phi = phiq[iphi].first;
            const Complex v = exact ? torus_node_exact(K, x, t, phi, R, W)
                                    : torus_node_transport(K, x, t, phi, R, W, cfg.cyl_window);
            vals[idx] = -v * hx * ht * phiq[iphi].second;  // chart boundary orientation
        });
        return C2 * ordered_sum(vals);
    };

    bool r0_found = false;
    for (double R : cfg.R_transport) {
        if (!sigma_ok(R)) continue;
        if (!r0_found) {
            res.R0 = R;
            r0_found = true;
        }
        res.R.push_back(R);
        res.transport.push_back(integrate(R, false));
    }
    for (double R : cfg.R_exact) {
        if (!sigma_ok(R)) continue;
        res.R_exact.push_back(R);
        res.exact.push_back(integrate(R, true));
    }
    if (!res.exact.empty()) {
        Complex mean = 0.0;
        for (const Complex& v : res.exact) mean += v;
        mean /= static_cast<double>(res.exact.size());
        res.limit = mean;
        for (size_t i = 0; i < res.exact.size(); ++i)
            for (size_t j = i + 1; j < res.exact.size(); ++j)
                res.r_independence =
                    std::max(res.r_independence, std::abs(res.exact[i] - res.exact[j]));
    }
    if (res.R.size() >= 3) {
        res.fit_limit =
            richardson_fit(res.R, res.transport, std::min<int>(3, static_cast<int>(res.R.size()) - 1));
        std::vector<double> lg, dv;
        for (size_t i = 0; i < res.R.size(); ++i) {
            const double dev = std::abs(res.transport[i] - res.limit);
            if (dev > 0) {
                lg.push_back(res.R[i]);
                dv.push_back(dev);
            }
        }
        res.rate = loglog_slope(lg, dv);
    }
    return res;
}

Complex richardson_fit(const std::vector<double>& R, const std::vector<Complex>& vals, int np) {
    const int n = static_cast<int>(R.size());
    Eigen::MatrixXcd A(n, np + 1);
    Eigen::VectorXcd b(n);
    for (int i = 0; i < n; ++i) {
        A(i, 0) = 1.0;
        for (int p = 1; p <= np; ++p) A(i, p) = std::pow(R[i], -p);
        b(i) = vals[i];
    }
    Eigen::VectorXcd sol = A.colPivHouseholderQr().solve(b);
    return sol(0);
}

}  // namespace shiftindex
