#include "shiftindex/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace shiftindex {

namespace {

struct ModeWindow {
    int n = 1, N = 0, d = 1;
    int per_axis() const { return 2 * N + 1; }
    int dim() const {
        int m = per_axis();
        if (n == 2) m *= per_axis();
        return m * d;
    }
    int index(int m1, int m2, int c) const {
        if (n == 1) return (m1 + N) * d + c;
        return ((m1 + N) * per_axis() + (m2 + N)) * d + c;
    }
    bool inside(int m1, int m2) const {
        if (m1 < -N || m1 > N) return false;
        if (n == 2 && (m2 < -N || m2 > N)) return false;
        return true;
    }
};

Complex factor_value(Factor f, const Expr& angular, int m1, int m2, bool reg_plus) {
    const double norm = std::sqrt(static_cast<double>(m1) * m1 + static_cast<double>(m2) * m2);
    switch (f) {
        case Factor::One:
            return 1.0;
        case Factor::Xi1:
            return static_cast<double>(m1);
        case Factor::Xi2:
            return static_cast<double>(m2);
        case Factor::AbsXi:
            return norm;
        case Factor::Pplus:
            if (m1 > 0) return 1.0;
            if (m1 == 0 && m2 == 0) return reg_plus ? 1.0 : 0.0;
            if (m1 == 0) return 0.5;  // n = 2 halfspace edge, unused by the gallery
            return 0.0;
        case Factor::Pminus:
            if (m1 < 0) return 1.0;
            if (m1 == 0 && m2 == 0) return reg_plus ? 0.0 : 1.0;
            if (m1 == 0) return 0.5;
            return 0.0;
        case Factor::Angular: {
            EvalPoint p;
            if (norm > 0.0) {
                p.cov[0] = m1 / norm;
                p.cov[1] = m2 / norm;
            } else {
                p.cov[0] = reg_plus ? 1.0 : -1.0;
                p.cov[1] = 0.0;
            }
            return angular.eval(p);
        }
    }
    return 0.0;
}

Eigen::VectorXd sobolev_weights(const FlatModel& model, int N, int d, double s) {
    ModeWindow w{model.dim, N, d};
    Eigen::VectorXd out(w.dim());
    const int m2lo = model.dim == 2 ? -N : 0;
    const int m2hi = model.dim == 2 ? N : 0;
    for (int m1 = -N; m1 <= N; ++m1)
        for (int m2 = m2lo; m2 <= m2hi; ++m2)
            for (int c = 0; c < d; ++c)
                out(w.index(m1, m2, c)) =
                    std::pow(1.0 + static_cast<double>(m1) * m1 + static_cast<double>(m2) * m2,
                             s / 2.0);
    return out;
}

}  // namespace

BlockOperator BlockOperator::adjoint() const {
    BlockOperator a = *this;
    a.take_adjoint = !take_adjoint;
    return a;
}

Eigen::MatrixXcd assemble_modes(const BlockOperator& D, int Nrow, int Ncol, bool reg_plus) {
    if (D.take_adjoint) {
        BlockOperator base = D;
        base.take_adjoint = false;
        return assemble_modes(base, Ncol, Nrow, reg_plus).adjoint();
    }
    const FlatModel& model = D.model();
    ModeWindow rows{model.dim, Nrow, D.d}, cols{model.dim, Ncol, D.d};
    Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(rows.dim(), cols.dim());
    const int m2lo = model.dim == 2 ? -Ncol : 0;
    const int m2hi = model.dim == 2 ? Ncol : 0;
    for (int bi = 0; bi < D.d; ++bi)
        for (int bj = 0; bj < D.d; ++bj) {
            const ShiftOperator& op = D.entries[bi * D.d + bj];
            for (const auto& term : op.terms) {
                for (int m1 = -Ncol; m1 <= Ncol; ++m1)
                    for (int m2 = m2lo; m2 <= m2hi; ++m2) {
                        const Complex fval =
                            factor_value(term.factor, term.angular, m1, m2, reg_plus);
                        if (fval == Complex{}) continue;
                        const double mdual =
                            m1 * model.theta[0] + (model.dim == 2 ? m2 * model.theta[1] : 0.0);
                        const Complex phase = std::exp(kI * (2.0 * kPi * term.k * mdual));
                        const int col = cols.index(m1, m2, bj);
                        for (const auto& tc : term.coeff.terms) {
                            const int r1 = m1 + tc.freq[0];
                            const int r2 = model.dim == 2 ? m2 + tc.freq[1] : 0;
                            if (!rows.inside(r1, r2)) continue;
                            A(rows.index(r1, r2, bi), col) += tc.amp * fval * phase;
                        }
                    }
            }
        }
    return A;
}

int mode_dim(const FlatModel& m, int N, int d) {
    ModeWindow w{m.dim, N, d};
    return w.dim();
}

FourierCompression assemble(const BlockOperator& D, int N, double s, bool reg_plus) {
    FourierCompression fc;
    fc.N = N;
    fc.n = D.model().dim;
    fc.d = D.d;
    fc.s = s;
    fc.order = D.order();
    Eigen::MatrixXcd raw = assemble_modes(D, N, N, reg_plus);
    Eigen::VectorXd wr = sobolev_weights(D.model(), N, D.d, s - fc.order);
    Eigen::VectorXd wc = sobolev_weights(D.model(), N, D.d, s);
    fc.weighted = wr.asDiagonal() * raw * wc.cwiseInverse().asDiagonal();
    return fc;
}

namespace {

struct KernelCount {
    int dim = 0;
    double gap = 0.0;
};

KernelCount count_small_singulars(const Eigen::MatrixXcd& B, double eps_rel) {
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(B);
    const auto& sv = svd.singularValues();
    const int nsv = static_cast<int>(sv.size());
    const double smax = nsv ? sv(0) : 0.0;
    const double thresh = eps_rel * std::max(smax, 1e-300);
    KernelCount kc;
    for (int i = nsv - 1; i >= 0; --i) {
        if (sv(i) < thresh)
            ++kc.dim;
        else
            break;
    }
    if (kc.dim > 0) {
        const double largest_zero = sv(nsv - kc.dim);
        const double smallest_kept = kc.dim < nsv ? sv(nsv - kc.dim - 1) : smax;
        kc.gap = smallest_kept / std::max(largest_zero, 1e-300);
    } else {
        kc.gap = (nsv ? sv(nsv - 1) : 0.0) / std::max(thresh, 1e-300);
    }
    return kc;
}

}  // namespace

IndexSvdResult index_svd(const BlockOperator& D, double s, const std::vector<int>& N_list,
                         double eps_rel, bool reg_plus) {
    IndexSvdResult res;
    const int bw = D.mode_bandwidth();
    const int ord = D.order();
    const FlatModel& model = D.model();
    for (int N : N_list) {
        Eigen::MatrixXcd A = assemble_modes(D, N + bw, N, reg_plus);
        Eigen::VectorXd wr = sobolev_weights(model, N + bw, D.d, s - ord);
        Eigen::VectorXd wc = sobolev_weights(model, N, D.d, s);
        Eigen::MatrixXcd B = wr.asDiagonal() * A * wc.cwiseInverse().asDiagonal();
        KernelCount ker = count_small_singulars(B, eps_rel);

        // D^* compressed the same way: conjugate transpose with swapped windows
        Eigen::MatrixXcd At = assemble_modes(D, N, N + bw, reg_plus).adjoint();
        Eigen::VectorXd wr2 = sobolev_weights(model, N + bw, D.d, -s);
        Eigen::VectorXd wc2 = sobolev_weights(model, N, D.d, ord - s);
        Eigen::MatrixXcd Bt = wr2.asDiagonal() * At * wc2.cwiseInverse().asDiagonal();
        KernelCount cok = count_small_singulars(Bt, eps_rel);

        res.table.push_back({N, ker.dim, cok.dim, ker.gap, cok.gap});
    }
    const int half = std::max<int>(2, (static_cast<int>(N_list.size()) + 1) / 2);
    const int start = std::max(0, static_cast<int>(N_list.size()) - half);
    bool plateau = true;
    const int cand = res.table[start].ker - res.table[start].coker;
    for (size_t i = start; i < res.table.size(); ++i) {
        if (res.table[i].ker - res.table[i].coker != cand) plateau = false;
        if (res.table[i].gap_ker < 1e3 || res.table[i].gap_coker < 1e3) res.low_confidence = true;
    }
    res.plateau_len = 0;
    for (int i = static_cast<int>(res.table.size()) - 1; i >= 0; --i) {
        if (res.table[i].ker - res.table[i].coker == cand)
            ++res.plateau_len;
        else
            break;
    }
    if (plateau) {
        res.conclusive = true;
        res.index = cand;
        res.message = res.low_confidence ? "plateau with weak spectral gap" : "plateau";
    } else {
        res.message = "finite-section inconclusive: no plateau";
    }
    return res;
}

InverseSymbolData sample_inverse_circle(const SymbolField& sigma, int nx, int window, double tol,
                                        double coeff_cut) {
    if (sigma.model().dim != 1 || sigma.block_dim() != 1)
        throw NumericError("sample_inverse_circle: expects a scalar-block circle symbol");
    (void)tol;
    InverseSymbolData out;
    out.d = 1;
    const int bw = std::max(1, sigma.bandwidth());
    const int Wd = window;
    const int s = bw;  // scalar band half-width, d = 1
    const int N = 2 * Wd + 1;
    const int M = N + 2 * s;
    const int kmax = Wd;
    for (int branch = 0; branch < 2; ++branch) {
        const double xi = branch == 0 ? 1.0 : -1.0;
        std::vector<std::vector<Complex>> rows(nx);
        for (int ix = 0; ix < nx; ++ix) {
            EvalPoint p;
            p.x[0] = 2.0 * kPi * ix / nx;
            p.cov[0] = xi;
            RapidMatrix m = sigma.evaluate(p, Wd + bw);
            BandQR qr = fat_qr(m, Wd, /*transpose=*/true);
            qr.factor();
            std::vector<Complex> rhs(M, Complex{});
            rhs[Wd + s] = 1.0;  // e_0 within the fat row indexing
            rows[ix].assign(N, Complex{});
            qr.solve(rhs.data(), rows[ix].data());
        }
        std::vector<InverseSymbolData::Coeff> coeffs;
        for (int k = -kmax; k <= kmax; ++k) {
            for (int l = -nx / 2 + 1; l <= nx / 2 - 1; ++l) {
                Complex acc = 0.0;
                for (int ix = 0; ix < nx; ++ix) {
                    const double x = 2.0 * kPi * ix / nx;
                    acc += rows[ix][k + Wd] * std::exp(-kI * (static_cast<double>(l) * x));
                }
                acc /= static_cast<double>(nx);
                if (std::abs(acc) > coeff_cut) coeffs.push_back({l, k, acc});
            }
        }
        out.sampled.push_back(std::move(coeffs));
    }
    return out;
}

ParametrixResult build_parametrix(const BlockOperator& D, const InverseSymbolData& inv, int N_ext,
                                  bool reg_plus) {
    const FlatModel& model = D.model();
    const int ord = D.order();
    ModeWindow w{model.dim, N_ext, D.d};
    Eigen::MatrixXcd R = Eigen::MatrixXcd::Zero(w.dim(), w.dim());

    const int m2lo = model.dim == 2 ? -N_ext : 0;
    const int m2hi = model.dim == 2 ? N_ext : 0;

    if (!inv.closed_form) {
        for (int m = -N_ext; m <= N_ext; ++m) {
            const int branch = m > 0 ? 0 : (m < 0 ? 1 : (reg_plus ? 0 : 1));
            const double nrm = m == 0 ? 1.0 : std::pow(std::abs(static_cast<double>(m)), -ord);
            for (const auto& c : inv.sampled[branch]) {
                const int row = m + c.l;
                if (row < -N_ext || row > N_ext) continue;
                const Complex phase = std::exp(kI * (2.0 * kPi * c.k * m * model.theta[0]));
                R(w.index(row, 0, 0), w.index(m, 0, 0)) += c.v * phase * nrm;
            }
        }
    } else {
        // block-scalar closed form: project the inverse entries on an x-grid
        // per mode direction (directions cached by reduced fraction)
        const int nx1 = 48;
        const int nx2 = model.dim == 2 ? 48 : 1;
        const int dd = inv.d;
        std::map<std::pair<int, int>, std::vector<Complex>> cache;
        for (int m1 = -N_ext; m1 <= N_ext; ++m1)
            for (int m2 = m2lo; m2 <= m2hi; ++m2) {
                int g1, g2;
                const int g = std::gcd(std::abs(m1), std::abs(m2));
                if (g > 0) {
                    g1 = m1 / g;
                    g2 = m2 / g;
                } else {
                    g1 = reg_plus ? 1 : -1;
                    g2 = 0;
                }
                auto key = std::make_pair(g1, g2);
                auto it = cache.find(key);
                if (it == cache.end()) {
                    const double norm =
                        std::sqrt(static_cast<double>(g1) * g1 + static_cast<double>(g2) * g2);
                    std::vector<Complex> co(static_cast<size_t>(nx1) * nx2 * dd * dd);
                    std::vector<Complex> vals(static_cast<size_t>(nx1) * nx2);
                    for (int e = 0; e < dd * dd; ++e) {
                        for (int i1 = 0; i1 < nx1; ++i1)
                            for (int i2 = 0; i2 < nx2; ++i2) {
                                EvalPoint p;
                                p.cov[0] = g1 / norm;
                                p.cov[1] = g2 / norm;
                                p.x[0] = 2.0 * kPi * i1 / nx1;
                                p.x[1] = 2.0 * kPi * i2 / nx2;
                                vals[static_cast<size_t>(i1) * nx2 + i2] = inv.closed.e[e].eval(p);
                            }
                        for (int l1 = 0; l1 < nx1; ++l1)
                            for (int l2 = 0; l2 < nx2; ++l2) {
                                Complex acc = 0.0;
                                for (int i1 = 0; i1 < nx1; ++i1)
                                    for (int i2 = 0; i2 < nx2; ++i2) {
                                        const double ph =
                                            2.0 * kPi * (static_cast<double>(l1) * i1 / nx1 +
                                                         static_cast<double>(l2) * i2 / nx2);
                                        acc += vals[static_cast<size_t>(i1) * nx2 + i2] *
                                               std::exp(Complex(0.0, -ph));
                                    }
                                co[(static_cast<size_t>(l1) * nx2 + l2) * dd * dd + e] =
                                    acc / static_cast<double>(nx1 * nx2);
                            }
                    }
                    it = cache.emplace(key, std::move(co)).first;
                }
                const auto& co = it->second;
                const double mm =
                    std::sqrt(static_cast<double>(m1) * m1 + static_cast<double>(m2) * m2);
                const double nrm = mm == 0.0 ? 1.0 : std::pow(mm, -ord);
                for (int l1 = 0; l1 < nx1; ++l1)
                    for (int l2 = 0; l2 < nx2; ++l2) {
                        const int f1 = l1 <= nx1 / 2 ? l1 : l1 - nx1;
                        const int f2 = model.dim == 2 ? (l2 <= nx2 / 2 ? l2 : l2 - nx2) : 0;
                        const int r1 = m1 + f1;
                        const int r2 = model.dim == 2 ? m2 + f2 : 0;
                        if (!w.inside(r1, r2)) continue;
                        for (int e = 0; e < dd * dd; ++e) {
                            const Complex v =
                                co[(static_cast<size_t>(l1) * nx2 + l2) * dd * dd + e];
                            if (std::abs(v) < 1e-14) continue;
                            R(w.index(r1, r2, e / dd), w.index(m1, m2, e % dd)) += v * nrm;
                        }
                    }
            }
    }

    Eigen::MatrixXcd Dm = assemble_modes(D, N_ext, N_ext, reg_plus);
    Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(w.dim(), w.dim());
    Eigen::MatrixXcd S = I - R * Dm;
    ParametrixResult out;
    out.Rp = R + S * R;
    out.N_ext = N_ext;

    Eigen::MatrixXcd S2 = I - out.Rp * Dm;
    std::vector<double> ms, nrms;
    const int probe_lo = std::max(2, N_ext / 4), probe_hi = N_ext / 2;
    for (int m = probe_lo; m <= probe_hi; ++m) {
        const double nn = S2.col(w.index(m, 0, 0)).norm();
        ms.push_back(static_cast<double>(m));
        nrms.push_back(nn);
        out.remainder_norm = std::max(out.remainder_norm, nn);
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (size_t i = 0; i < ms.size(); ++i) {
        if (nrms[i] <= 1e-300) continue;
        const double lx = std::log(ms[i]), ly = std::log(nrms[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++cnt;
    }
    out.remainder_order = cnt >= 2 ? (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx)
                                   : -std::numeric_limits<double>::infinity();
    return out;
}

RegularizerIndex index_regularizer(const BlockOperator& D, const ParametrixResult& par, int N,
                                   bool reg_plus) {
    const FlatModel& model = D.model();
    const int N_ext = par.N_ext;
    ModeWindow w{model.dim, N_ext, D.d};
    Eigen::MatrixXcd Dm = assemble_modes(D, N_ext, N_ext, reg_plus);
    Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(w.dim(), w.dim());
    Eigen::MatrixXcd Sl = I - par.Rp * Dm;
    Eigen::MatrixXcd Sr = I - Dm * par.Rp;

    const int m2lo = model.dim == 2 ? -N : 0;
    const int m2hi = model.dim == 2 ? N : 0;
    // diagonal entries of S^2 restricted to [-N, N]; fixed summation order
    auto trace_sq = [&](const Eigen::MatrixXcd& S, std::vector<double>& diag_abs) {
        std::vector<int> order;
        order.push_back(0);
        for (int m = 1; m <= N; ++m) {
            order.push_back(m);
            order.push_back(-m);
        }
        diag_abs.assign(2 * N + 1, 0.0);
        Complex tr = 0.0;
        for (int m1 : order)
            for (int m2 = m2lo; m2 <= m2hi; ++m2)
                for (int c = 0; c < D.d; ++c) {
                    const int i = w.index(m1, m2, c);
                    Complex acc = 0.0;
                    const int m2elo = model.dim == 2 ? -N_ext : 0;
                    const int m2ehi = model.dim == 2 ? N_ext : 0;
                    for (int m1b = -N_ext; m1b <= N_ext; ++m1b)
                        for (int m2b = m2elo; m2b <= m2ehi; ++m2b)
                            for (int cb = 0; cb < D.d; ++cb) {
                                const int j = w.index(m1b, m2b, cb);
                                acc += S(i, j) * S(j, i);
                            }
                    tr += acc;
                    diag_abs[m1 + N] = std::max(diag_abs[m1 + N], std::abs(acc));
                }
        return tr;
    };
    std::vector<double> dl, dr;
    const Complex value = trace_sq(Sl, dl) - trace_sq(Sr, dr);

    RegularizerIndex out;
    out.raw = value;
    double edge = 0.0;
    for (int m = N - std::max(1, N / 8); m <= N; ++m)
        edge = std::max({edge, dl[m + N], dl[-m + N], dr[m + N], dr[-m + N]});
    out.tail_bound = 2.0 * edge * static_cast<double>(N);
    const double rounded = std::round(value.real());
    out.residual = std::abs(value - Complex(rounded, 0.0));
    if (out.residual <= 0.1) {
        out.conclusive = true;
        out.index = static_cast<int>(rounded);
    }
    return out;
}

}  // namespace shiftindex
