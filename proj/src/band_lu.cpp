#include "shiftindex/band_lu.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>

namespace shiftindex {

BandLU::BandLU(int n, int kl, int ku) { reset(n, kl, ku); }

void BandLU::reset(int n, int kl, int ku) {
    n_ = n;
    kl_ = kl;
    ku_ = ku;
    ldab_ = 2 * kl + ku + 1;
    ab_.assign(static_cast<size_t>(ldab_) * n, Complex{});
    ipiv_.assign(n, 0);
    factored_ = false;
}

Complex& BandLU::at(int i, int j) {
    // entry (i,j) lives in storage row kl + ku + i - j of column j
    return ab(kl_ + ku_ + i - j, j);
}

Complex BandLU::get(int i, int j) const {
    if (j - i > ku_ || i - j > kl_) return Complex{};
    return ab(kl_ + ku_ + i - j, j);
}

void BandLU::factor() {
    // Band LU with partial pivoting; fill-in occupies the extra kl rows
    // above the original band (standard zgbtrf layout).
    const int kv = kl_ + ku_;
    for (int j = 0; j < n_; ++j) {
        const int pmax = std::min(kl_, n_ - 1 - j);
        // pivot search in column j over rows j..j+pmax
        int piv = 0;
        double best = std::abs(ab(kv, j));
        for (int p = 1; p <= pmax; ++p) {
            double v = std::abs(ab(kv + p, j));
            if (v > best) {
                best = v;
                piv = p;
            }
        }
        ipiv_[j] = j + piv;
        if (best == 0.0) continue;  // singular column; leave zeros
        if (piv != 0) {
            // swap rows j and j+piv across the accessible columns
            const int jmax = std::min(n_ - 1, j + kv);
            for (int c = j; c <= jmax; ++c) {
                const int r1 = kv + j - c;
                const int r2 = kv + j + piv - c;
                std::swap(ab_[static_cast<size_t>(c) * ldab_ + r1],
                          ab_[static_cast<size_t>(c) * ldab_ + r2]);
            }
        }
        const Complex pivval = ab(kv, j);
        for (int p = 1; p <= pmax; ++p) {
            const Complex m = ab(kv + p, j) / pivval;
            ab(kv + p, j) = m;  // store multiplier
            if (m == Complex{}) continue;
            const int jmax = std::min(n_ - 1, j + kv);
            for (int c = j + 1; c <= jmax; ++c) {
                ab_[static_cast<size_t>(c) * ldab_ + (kv + j + p - c)] -=
                    m * ab_[static_cast<size_t>(c) * ldab_ + (kv + j - c)];
            }
        }
    }
    factored_ = true;
}

void BandLU::solve(Complex* b) const {
    const int kv = kl_ + ku_;
    // forward: apply pivots and L
    for (int j = 0; j < n_; ++j) {
        if (ipiv_[j] != j) std::swap(b[j], b[ipiv_[j]]);
        const Complex bj = b[j];
        if (bj == Complex{}) continue;
        const int pmax = std::min(kl_, n_ - 1 - j);
        for (int p = 1; p <= pmax; ++p) b[j + p] -= ab(kv + p, j) * bj;
    }
    // back substitution with U (band of width kv above diagonal)
    for (int i = n_ - 1; i >= 0; --i) {
        Complex s = b[i];
        const int jmax = std::min(n_ - 1, i + kv);
        for (int j = i + 1; j <= jmax; ++j) s -= ab_[static_cast<size_t>(j) * ldab_ + (kv + i - j)] * b[j];
        const Complex d = ab(kv, i);
        b[i] = (d == Complex{}) ? Complex{} : s / d;
    }
}

void BandLU::solve_transpose(Complex* b) const {
    const int kv = kl_ + ku_;
    // A^T = U^T L^T P, so first solve U^T z = b (forward), then L^T w = z
    // (backward), then undo the row permutation.
    for (int i = 0; i < n_; ++i) {
        Complex s = b[i];
        const int jmin = std::max(0, i - kv);
        for (int j = jmin; j < i; ++j) s -= ab_[static_cast<size_t>(i) * ldab_ + (kv + j - i)] * b[j];
        const Complex d = ab(kv, i);
        b[i] = (d == Complex{}) ? Complex{} : s / d;
    }
    for (int j = n_ - 1; j >= 0; --j) {
        const int pmax = std::min(kl_, n_ - 1 - j);
        Complex s = b[j];
        for (int p = 1; p <= pmax; ++p) s -= ab(kv + p, j) * b[j + p];
        b[j] = s;
        if (ipiv_[j] != j) std::swap(b[j], b[ipiv_[j]]);
    }
}

void BandLU::apply(const Complex* x, Complex* y) const {
    const int kv = kl_ + ku_;
    for (int i = 0; i < n_; ++i) {
        Complex s = 0.0;
        const int j0 = std::max(0, i - kl_);
        const int j1 = std::min(n_ - 1, i + ku_);
        for (int j = j0; j <= j1; ++j) s += ab_[static_cast<size_t>(j) * ldab_ + (kv + i - j)] * x[j];
        y[i] = s;
    }
}

void BandLU::apply_adjoint(const Complex* x, Complex* y) const {
    const int kv = kl_ + ku_;
    for (int j = 0; j < n_; ++j) {
        Complex s = 0.0;
        const int i0 = std::max(0, j - ku_);
        const int i1 = std::min(n_ - 1, j + kl_);
        for (int i = i0; i <= i1; ++i) s += std::conj(ab_[static_cast<size_t>(j) * ldab_ + (kv + i - j)]) * x[i];
        y[j] = s;
    }
}

namespace {

/// Largest singular value of an abstract operator by Golub-Kahan-Lanczos
/// bidiagonalization with full reorthogonalization.
template <class ApplyFn, class ApplyAdjFn>
double gk_lanczos_sigma_max(int n, int steps, std::uint64_t seed, ApplyFn&& op,
                            ApplyAdjFn&& op_adj) {
    steps = std::min(steps, n);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);

    std::vector<std::vector<Complex>> V, U;
    std::vector<double> alpha, beta;
    std::vector<Complex> v(n), u(n), w(n);
    for (auto& z : v) z = Complex(dist(rng), dist(rng));
    double nv = 0.0;
    for (auto& z : v) nv += std::norm(z);
    nv = std::sqrt(nv);
    if (nv == 0.0) return 0.0;
    for (auto& z : v) z /= nv;

    auto reorth = [n](std::vector<Complex>& x, const std::vector<std::vector<Complex>>& basis) {
        for (const auto& q : basis) {
            Complex dot = 0.0;
            for (int i = 0; i < n; ++i) dot += std::conj(q[i]) * x[i];
            for (int i = 0; i < n; ++i) x[i] -= dot * q[i];
        }
    };

    for (int k = 0; k < steps; ++k) {
        V.push_back(v);
        op(v.data(), u.data());
        if (k > 0)
            for (int i = 0; i < n; ++i) u[i] -= beta.back() * U.back()[i];
        reorth(u, U);
        double a = 0.0;
        for (auto& z : u) a += std::norm(z);
        a = std::sqrt(a);
        alpha.push_back(a);
        if (a < 1e-300) break;
        for (auto& z : u) z /= a;
        U.push_back(u);

        op_adj(u.data(), w.data());
        for (int i = 0; i < n; ++i) w[i] -= a * v[i];
        reorth(w, V);
        double b = 0.0;
        for (auto& z : w) b += std::norm(z);
        b = std::sqrt(b);
        beta.push_back(b);
        if (b < 1e-300) break;
        v = w;
        for (auto& z : v) z /= b;
    }

    const int k = static_cast<int>(alpha.size());
    if (k == 0) return 0.0;
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < k; ++i) {
        B(i, i) = alpha[i];
        if (i + 1 < k) B(i, i + 1) = beta[i];
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(B);
    return svd.singularValues()(0);
}

}  // namespace

double BandLU::smallest_singular_value(int iters, std::uint64_t seed) const {
    // sigma_min(A) = 1 / sigma_max(A^{-1})
    const double s = gk_lanczos_sigma_max(
        n_, std::max(iters, 40), seed,
        [this](const Complex* x, Complex* y) {
            std::copy(x, x + n_, y);
            solve(y);
        },
        [this](const Complex* x, Complex* y) {
            // A^{-*} x = conj(A^T \ conj(x))
            for (int i = 0; i < n_; ++i) y[i] = std::conj(x[i]);
            solve_transpose(y);
            for (int i = 0; i < n_; ++i) y[i] = std::conj(y[i]);
        });
    return s == 0.0 ? 0.0 : 1.0 / s;
}

double BandLU::largest_singular_value(int iters, std::uint64_t seed) const {
    std::vector<Complex> tmp(n_);
    return gk_lanczos_sigma_max(
        n_, std::max(iters, 40), seed,
        [this](const Complex* x, Complex* y) { apply(x, y); },
        [this](const Complex* x, Complex* y) { apply_adjoint(x, y); });
}

// ---------------------------------------------------------------------------
// BandQR

BandQR::BandQR(int rows, int cols, int band)
    : m_(rows), n_(cols), s_(band), shift_((rows - cols) / 2) {
    width_ = 3 * s_ + 3;
    orig_.assign(static_cast<size_t>(m_) * (2 * s_ + 1), Complex{});
    r_.assign(static_cast<size_t>(n_) * width_, Complex{});
}

int BandQR::col_lo(int i) const { return i - shift_ - s_; }

Complex& BandQR::at(int i, int j) {
    return orig_[static_cast<size_t>(i) * (2 * s_ + 1) + (j - col_lo(i))];
}

void BandQR::apply(const Complex* x, Complex* y) const {
    for (int i = 0; i < m_; ++i) {
        Complex acc = 0.0;
        const int lo = col_lo(i);
        const Complex* row = &orig_[static_cast<size_t>(i) * (2 * s_ + 1)];
        for (int o = 0; o <= 2 * s_; ++o) {
            const int j = lo + o;
            if (j < 0 || j >= n_) continue;
            acc += row[o] * x[j];
        }
        y[i] = acc;
    }
}

void BandQR::apply_adjoint(const Complex* y, Complex* x) const {
    for (int j = 0; j < n_; ++j) x[j] = 0.0;
    for (int i = 0; i < m_; ++i) {
        const int lo = col_lo(i);
        const Complex* row = &orig_[static_cast<size_t>(i) * (2 * s_ + 1)];
        for (int o = 0; o <= 2 * s_; ++o) {
            const int j = lo + o;
            if (j < 0 || j >= n_) continue;
            x[j] += std::conj(row[o]) * y[i];
        }
    }
}

void BandQR::factor() {
    rots_.clear();
    rots_.reserve(static_cast<size_t>(m_) * (2 * s_ + 2));
    std::vector<Complex> w(width_ + 1, Complex{});
    for (int i = 0; i < m_; ++i) {
        // load row i into the working row anchored at its first valid column
        int jw = std::max(0, col_lo(i));
        std::fill(w.begin(), w.end(), Complex{});
        const Complex* row = &orig_[static_cast<size_t>(i) * (2 * s_ + 1)];
        for (int o = 0; o <= 2 * s_; ++o) {
            const int j = col_lo(i) + o;
            if (j < 0 || j >= n_) continue;
            w[j - jw] = row[o];
        }
        // eliminate leading entries against the R rows
        while (jw < n_) {
            // find current leading entry
            int lead = -1;
            for (int o = 0; o < width_ && jw + o < n_; ++o)
                if (w[o] != Complex{}) {
                    lead = o;
                    break;
                }
            if (lead < 0) break;
            if (lead > 0) {
                // re-anchor to the leading column
                for (int o = 0; o + lead <= width_; ++o) w[o] = (o + lead <= width_) ? w[o + lead] : Complex{};
                for (int o = width_ + 1 - lead; o <= width_; ++o) w[o] = Complex{};
                jw += lead;
                if (jw >= n_) break;
            }
            Complex* rrow = &r_[static_cast<size_t>(jw) * width_];
            const Complex a = rrow[0];
            const Complex b = w[0];
            // complex Givens (zrotg convention): [c s; -conj(s) c] (a,b) = (r,0)
            Complex c, s;
            const double na = std::abs(a), nb = std::abs(b);
            if (na == 0.0) {
                c = 0.0;
                s = 1.0;
            } else {
                const double r = std::hypot(na, nb);
                c = na / r;
                s = (a / na) * std::conj(b) / r;
            }
            rots_.push_back({jw, 0.0f, c, s, i});
            // apply to the aligned row pair over [jw, jw + width)
            for (int o = 0; o < width_; ++o) {
                const Complex ra = rrow[o];
                const Complex wb = w[o];
                rrow[o] = c * ra + s * wb;
                w[o] = -std::conj(s) * ra + c.real() * wb;
            }
            // the leading entry is eliminated exactly; discard rounding
            // residue and advance one column
            for (int o = 0; o < width_; ++o) w[o] = w[o + 1];
            w[width_ - 1] = Complex{};
            w[width_] = Complex{};
            ++jw;
        }
    }
    factored_ = true;
}

void BandQR::solve(const Complex* b, Complex* x) const {
    std::vector<Complex> rby(n_, Complex{});
    Complex bw = 0.0;
    int cur = -1;
    for (const Rot& r : rots_) {
        if (r.src != cur) {
            cur = r.src;
            bw = b[cur];
        }
        const Complex a = rby[r.col];
        rby[r.col] = r.c * a + r.s * bw;
        bw = -std::conj(r.s) * a + r.c.real() * bw;
    }
    for (int j = n_ - 1; j >= 0; --j) {
        Complex acc = rby[j];
        const Complex* rrow = &r_[static_cast<size_t>(j) * width_];
        const int kmax = std::min(n_ - 1 - j, width_ - 1);
        for (int o = 1; o <= kmax; ++o) acc -= rrow[o] * x[j + o];
        x[j] = (rrow[0] == Complex{}) ? Complex{} : acc / rrow[0];
    }
}

void BandQR::r_backsolve(Complex* x) const {
    for (int j = n_ - 1; j >= 0; --j) {
        Complex acc = x[j];
        const Complex* rrow = &r_[static_cast<size_t>(j) * width_];
        const int kmax = std::min(n_ - 1 - j, width_ - 1);
        for (int o = 1; o <= kmax; ++o) acc -= rrow[o] * x[j + o];
        x[j] = (rrow[0] == Complex{}) ? Complex{} : acc / rrow[0];
    }
}

void BandQR::r_forwardsolve_adjoint(Complex* x) const {
    // solves R^* y = x in place (R^* lower triangular)
    for (int j = 0; j < n_; ++j) {
        Complex acc = x[j];
        const int omin = std::max(0, j - (width_ - 1));
        for (int p = omin; p < j; ++p) {
            const Complex rij = r_[static_cast<size_t>(p) * width_ + (j - p)];
            acc -= std::conj(rij) * x[p];
        }
        const Complex d = r_[static_cast<size_t>(j) * width_];
        x[j] = (d == Complex{}) ? Complex{} : acc / std::conj(d);
    }
}

double BandQR::smallest_singular_value(int iters, std::uint64_t seed) const {
    // sigma_min(A)^2 = 1 / lambda_max((A^* A)^{-1}), (A^*A)^{-1} = R^{-1} R^{-*}
    const double lam = gk_lanczos_sigma_max(
        n_, std::max(iters, 40), seed,
        [this](const Complex* x, Complex* y) {
            std::copy(x, x + n_, y);
            r_forwardsolve_adjoint(y);
            r_backsolve(y);
        },
        [this](const Complex* x, Complex* y) {
            std::copy(x, x + n_, y);
            r_forwardsolve_adjoint(y);
            r_backsolve(y);
        });
    return lam == 0.0 ? 0.0 : 1.0 / std::sqrt(lam);
}

double BandQR::largest_singular_value(int iters, std::uint64_t seed) const {
    std::vector<Complex> ym(m_);
    const double lam = gk_lanczos_sigma_max(
        n_, std::max(iters, 40), seed,
        [this, &ym](const Complex* x, Complex* y) {
            apply(x, ym.data());
            apply_adjoint(ym.data(), y);
        },
        [this, &ym](const Complex* x, Complex* y) {
            apply(x, ym.data());
            apply_adjoint(ym.data(), y);
        });
    return std::sqrt(lam);
}

}  // namespace shiftindex
