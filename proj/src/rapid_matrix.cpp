#include "shiftindex/rapid_matrix.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace shiftindex {

RapidMatrix::RapidMatrix(int window, int block_dim) : W_(window), d_(block_dim) {}

RapidMatrix RapidMatrix::identity(int window, int block_dim) {
    RapidMatrix m(window, block_dim);
    auto& diag = m.diagonal(0);
    for (auto& b : diag) b = Block::identity(block_dim);
    m.set_exact_bandwidth(0);
    return m;
}

RapidMatrix RapidMatrix::diagonal(int window, const std::vector<Complex>& values) {
    RapidMatrix m(window, 1);
    auto& diag = m.diagonal(0);
    for (int n = -window; n <= window; ++n) diag[n + window] = Block::scalar(values[n + window]);
    m.set_exact_bandwidth(0);
    return m;
}

RapidMatrix RapidMatrix::shift(int window, int k, int block_dim) {
    RapidMatrix m(window, block_dim);
    auto& diag = m.diagonal(k);
    for (int n = -window; n <= window; ++n) {
        if (n + k >= -window && n + k <= window) diag[n + window] = Block::identity(block_dim);
    }
    m.set_exact_bandwidth(std::abs(k));
    return m;
}

Block RapidMatrix::entry(int row, int col) const {
    auto it = diagonals_.find(col - row);
    if (it == diagonals_.end() || row < -W_ || row > W_) return Block::zero(d_);
    return it->second[row + W_];
}

void RapidMatrix::set_entry(int row, int col, const Block& b) {
    diagonal(col - row)[row + W_] = b;
}

std::vector<Block>& RapidMatrix::diagonal(int k) {
    auto it = diagonals_.find(k);
    if (it == diagonals_.end()) {
        it = diagonals_.emplace(k, std::vector<Block>(2 * W_ + 1, Block::zero(d_))).first;
    }
    return it->second;
}

double RapidMatrix::seminorm(int N) const {
    if (diagonals_.empty()) throw NumericError("seminorm: empty window");
    double s = 0.0;
    for (const auto& [k, diag] : diagonals_) {
        const double w = std::pow(1.0 + std::abs(k), N);
        for (const Block& b : diag) s = std::max(s, b.max_abs() * w);
    }
    return s;
}

double RapidMatrix::max_abs() const {
    double s = 0.0;
    for (const auto& [k, diag] : diagonals_)
        for (const Block& b : diag) s = std::max(s, b.max_abs());
    return s;
}

int RapidMatrix::max_offset() const {
    int m = 0;
    for (const auto& [k, diag] : diagonals_) {
        for (const Block& b : diag) {
            if (!b.is_zero()) {
                m = std::max(m, std::abs(k));
                break;
            }
        }
    }
    return m;
}

DecayCertificate RapidMatrix::certificate() const {
    DecayCertificate cert;
    cert.C.resize(kNMax);
    for (int N = 1; N <= kNMax; ++N) cert.C[N - 1] = seminorm(N);

    // least squares of log(max |a_k|) against log(1 + |k|) over offsets
    // with nonzero data
    std::vector<double> xs, ys;
    double overall = 0.0;
    int kmax = 0;
    for (const auto& [k, diag] : diagonals_) {
        double m = 0.0;
        for (const Block& b : diag) m = std::max(m, b.max_abs());
        if (m > 0.0) {
            xs.push_back(std::log(1.0 + std::abs(k)));
            ys.push_back(std::log(m));
            overall = std::max(overall, m);
            kmax = std::max(kmax, std::abs(k));
        }
    }
    if (xs.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (size_t i = 0; i < xs.size(); ++i) {
            sx += xs[i];
            sy += ys[i];
            sxx += xs[i] * xs[i];
            sxy += xs[i] * ys[i];
        }
        const double nn = static_cast<double>(xs.size());
        const double denom = nn * sxx - sx * sx;
        cert.fit_slope = (denom != 0.0) ? (nn * sxy - sx * sy) / denom : 0.0;
    }
    // edge ratio: largest entry on the outer quarter of stored offsets
    double edge = 0.0;
    for (const auto& [k, diag] : diagonals_) {
        if (std::abs(k) < std::max(1, 3 * kmax / 4)) continue;
        for (const Block& b : diag) edge = std::max(edge, b.max_abs());
    }
    cert.edge_ratio = (overall > 0.0) ? edge / overall : 0.0;
    cert.decaying = (kmax <= 1) || cert.edge_ratio < 1e-6 || cert.fit_slope < -1.0;
    return cert;
}

RapidMatrix RapidMatrix::multiply(const RapidMatrix& other, double* truncation_error) const {
    RapidMatrix r(W_, d_);
    for (const auto& [k1, diag1] : diagonals_) {
        for (const auto& [k2, diag2] : other.diagonals_) {
            const int k = k1 + k2;
            if (std::abs(k) > 2 * W_) continue;
            auto& out = r.diagonal(k);
            // (ab)_k(n) = sum_{k1} a_{k1}(n) b_{k2}(n + k1)
            for (int n = -W_; n <= W_; ++n) {
                const int m = n + k1;
                if (m < -W_ || m > W_) continue;
                if (n + k < -W_ || n + k > W_) continue;
                const Block& a = diag1[n + W_];
                if (a.is_zero()) continue;
                const Block& b = diag2[m + W_];
                if (b.is_zero()) continue;
                out[n + W_] = out[n + W_] + a * b;
            }
        }
    }
    if (exact_bandwidth_ && other.exact_bandwidth_)
        r.set_exact_bandwidth(*exact_bandwidth_ + *other.exact_bandwidth_);
    if (truncation_error) {
        // contributions through intermediate indices outside the window are
        // dropped; bound them by the outermost-entry magnitudes
        auto edge_mass = [](const RapidMatrix& mm) {
            double e = 0.0;
            for (const auto& [k, diag] : mm.diagonals_) {
                const int W = mm.W_;
                for (int n = -W; n <= W; ++n) {
                    if (std::abs(n) < W - std::max(1, W / 8)) continue;
                    e = std::max(e, diag[n + W].max_abs());
                }
            }
            return e;
        };
        const double bw = static_cast<double>(std::max(max_offset(), other.max_offset()) + 1);
        *truncation_error = bw * (edge_mass(*this) * other.max_abs() + edge_mass(other) * max_abs());
        if (exact_bandwidth_ && other.exact_bandwidth_ &&
            *exact_bandwidth_ + *other.exact_bandwidth_ <= 2 * W_)
            *truncation_error = 0.0;  // no interior index can leave the window silently
    }
    return r;
}

RapidMatrix RapidMatrix::add(const RapidMatrix& other) const {
    RapidMatrix r = *this;
    for (const auto& [k, diag] : other.diagonals_) {
        auto& out = r.diagonal(k);
        for (int i = 0; i < static_cast<int>(diag.size()); ++i) out[i] = out[i] + diag[i];
    }
    if (exact_bandwidth_ && other.exact_bandwidth_)
        r.set_exact_bandwidth(std::max(*exact_bandwidth_, *other.exact_bandwidth_));
    else
        r.set_exact_bandwidth(std::nullopt);
    return r;
}

RapidMatrix RapidMatrix::subtract(const RapidMatrix& other) const {
    return add(other.scale(-1.0));
}

RapidMatrix RapidMatrix::scale(Complex z) const {
    RapidMatrix r = *this;
    for (auto& [k, diag] : r.diagonals_)
        for (auto& b : diag) b = b * z;
    return r;
}

RapidMatrix RapidMatrix::adjoint_matrix() const {
    RapidMatrix r(W_, d_);
    for (const auto& [k, diag] : diagonals_) {
        auto& out = r.diagonal(-k);
        // (a*)_{i, i-k} = conj(a_{i-k+k, ...}): (a*)_{ij} = conj(a_{ji})
        for (int n = -W_; n <= W_; ++n) {
            const int row = n + k;  // adjoint entry (row, row - k) <- a entry (n, n+k)
            if (row < -W_ || row > W_) continue;
            out[row + W_] = diag[n + W_].adjoint();
        }
    }
    r.set_exact_bandwidth(exact_bandwidth_);
    return r;
}

RapidMatrix RapidMatrix::conjugate_shift(int n, int* lost) const {
    const int newW = std::max(0, W_ - std::abs(n));
    if (lost) *lost = W_ - newW;
    RapidMatrix r(newW, d_);
    for (const auto& [k, diag] : diagonals_) {
        auto& out = r.diagonal(k);
        for (int m = -newW; m <= newW; ++m) {
            const int src = m + n;
            if (src < -W_ || src > W_) continue;
            if (src + k < -W_ || src + k > W_) continue;
            out[m + newW] = diag[src + W_];
        }
    }
    r.set_exact_bandwidth(exact_bandwidth_);
    return r;
}

double RapidMatrix::inner_deviation_from_identity() const {
    const int H = W_ / 2;
    double s = 0.0;
    for (const auto& [k, diag] : diagonals_) {
        for (int n = -H; n <= H; ++n) {
            if (n + k < -H || n + k > H) continue;
            Block b = diag[n + W_];
            if (k == 0)
                for (int i = 0; i < d_; ++i) b.at(i, i) -= 1.0;
            s = std::max(s, b.max_abs());
        }
    }
    return s;
}

std::vector<Complex> RapidMatrix::dense() const {
    const int dim = dense_dim();
    std::vector<Complex> m(static_cast<size_t>(dim) * dim, Complex{});
    for (const auto& [k, diag] : diagonals_) {
        for (int n = -W_; n <= W_; ++n) {
            const int col = n + k;
            if (col < -W_ || col > W_) continue;
            const Block& b = diag[n + W_];
            for (int i = 0; i < d_; ++i)
                for (int j = 0; j < d_; ++j)
                    m[static_cast<size_t>((n + W_) * d_ + i) * dim + (col + W_) * d_ + j] = b.at(i, j);
        }
    }
    return m;
}

BandLU RapidMatrix::band_lu() const {
    int bw = 0;
    for (const auto& [k, diag] : diagonals_) {
        bool nz = false;
        for (const Block& b : diag)
            if (!b.is_zero()) {
                nz = true;
                break;
            }
        if (nz) bw = std::max(bw, std::abs(k));
    }
    const int scalar_bw = bw * d_ + (d_ - 1);
    BandLU lu(dense_dim(), scalar_bw, scalar_bw);
    for (const auto& [k, diag] : diagonals_) {
        for (int n = -W_; n <= W_; ++n) {
            const int col = n + k;
            if (col < -W_ || col > W_) continue;
            const Block& b = diag[n + W_];
            if (b.is_zero()) continue;
            for (int i = 0; i < d_; ++i)
                for (int j = 0; j < d_; ++j) {
                    const Complex v = b.at(i, j);
                    if (v != Complex{}) lu.at((n + W_) * d_ + i, (col + W_) * d_ + j) = v;
                }
        }
    }
    return lu;
}

BandQR fat_qr(const RapidMatrix& a, int domain_W, bool transpose, int band_override) {
    const int W = a.window();
    const int d = a.block_dim();
    const int bw = std::max(a.max_offset(), band_override);
    if (domain_W + bw > W)
        throw NumericError("fat_qr: domain window too large for the stored data", domain_W);
    const int s = bw * d + (d - 1);
    const int N = (2 * domain_W + 1) * d;
    const int M = N + 2 * s;
    BandQR qr(M, N, s);
    // scalar position of Z-index (z, component c) relative to the domain
    auto pos = [&](int z, int c) { return (z + domain_W) * d + c; };
    for (const auto& [k, diag] : a.diagonals()) {
        for (int zi = -domain_W - bw; zi <= domain_W + bw; ++zi) {
            if (zi < -W || zi > W) continue;
            const int zj = zi + k;
            if (zj < -W || zj > W) continue;
            const Block& b = diag[zi + W];
            if (b.is_zero()) continue;
            for (int ci = 0; ci < d; ++ci)
                for (int cj = 0; cj < d; ++cj) {
                    const Complex v = b.at(ci, cj);
                    if (v == Complex{}) continue;
                    if (!transpose) {
                        // row index in fat storage = pos + s
                        const int col = pos(zj, cj);
                        if (col < 0 || col >= N) continue;
                        qr.at(pos(zi, ci) + s, col) += v;
                    } else {
                        const int col = pos(zi, ci);
                        if (col < 0 || col >= N) continue;
                        qr.at(pos(zj, cj) + s, col) += v;
                    }
                }
        }
    }
    return qr;
}

double window_sigma_min(const RapidMatrix& a) {
    const int Wd = std::max(1, a.window() - a.max_offset());
    BandQR qr = fat_qr(a, Wd);
    qr.factor();
    return qr.smallest_singular_value();
}

double window_sigma_max(const RapidMatrix& a) {
    const int Wd = std::max(1, a.window() - a.max_offset());
    BandQR qr = fat_qr(a, Wd);
    return qr.largest_singular_value();
}

SigmaTrend window_sigma_trend(const RapidMatrix& a) {
    const int Wd = std::max(1, a.window() - a.max_offset());
    std::vector<double> ws, sigmas;
    for (int W : {std::max(2, Wd / 4), std::max(3, Wd / 2), Wd}) {
        BandQR qr = fat_qr(a, W);
        qr.factor();
        ws.push_back(static_cast<double>(W));
        sigmas.push_back(qr.smallest_singular_value());
    }
    SigmaTrend t;
    t.sigma_min = sigmas.back();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (size_t i = 0; i < ws.size(); ++i) {
        if (sigmas[i] <= 0.0) {
            t.slope = -10.0;
            return t;
        }
        const double lx = std::log(ws[i]), ly = std::log(sigmas[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    const double denom = n * sxx - sx * sx;
    t.slope = (denom != 0.0) ? (n * sxy - sx * sy) / denom : 0.0;
    return t;
}

InvertResult invert(const RapidMatrix& a, double tol) {
    const int W = a.window();
    const int d = a.block_dim();
    const int bw = a.max_offset();
    const int Wd = std::max(1, W - bw);

    BandQR qr = fat_qr(a, Wd);
    const double smax = qr.largest_singular_value();
    qr.factor();
    const double smin = qr.smallest_singular_value();
    const double thresh = tol * std::max(smax, 1e-300);
    if (smin <= thresh)
        throw NumericError("invert: window block singular within tolerance", smin);
    if (Wd >= 12) {
        const SigmaTrend trend = window_sigma_trend(a);
        if (trend.slope < -0.4 && trend.sigma_min < 0.2 * smax)
            throw NumericError("invert: smallest singular value collapses as the window grows",
                               trend.sigma_min);
    }

    // inverse columns by least-squares band solves
    const int N = (2 * Wd + 1) * d;
    const int s = bw * d + (d - 1);
    const int M = N + 2 * s;
    RapidMatrix r(W, d);
    std::vector<Complex> rhs(M), x(N);
    for (int col = 0; col < N; ++col) {
        std::fill(rhs.begin(), rhs.end(), Complex{});
        rhs[col + s] = 1.0;
        qr.solve(rhs.data(), x.data());
        const int zj = col / d - Wd, cj = col % d;
        for (int zi = -Wd; zi <= Wd; ++zi)
            for (int ci = 0; ci < d; ++ci) {
                const Complex v = x[(zi + Wd) * d + ci];
                if (std::abs(v) > 1e-300) {
                    Block b = r.entry(zi, zj);
                    b.d = d;
                    b.at(ci, cj) = v;
                    r.set_entry(zi, zj, b);
                }
            }
    }

    // one Neumann correction against the band operator: r' = r (2 - a r)
    RapidMatrix ar = a.multiply(r);
    RapidMatrix two_minus = RapidMatrix::identity(W, d).scale(2.0).subtract(ar);
    RapidMatrix rr = r.multiply(two_minus);

    InvertResult res;
    res.smallest_singular = smin;
    res.inverse = rr;
    res.residual_left = a.multiply(rr).inner_deviation_from_identity();
    res.residual_right = rr.multiply(a).inner_deviation_from_identity();
    res.certificate = rr.certificate();
    if (res.residual_left > tol * 100 && res.residual_right > tol * 100)
        throw NumericError("invert: residual exceeds tolerance", res.residual_left);
    if (!res.certificate.decaying)
        throw NumericError("invert: computed inverse fails decay certification",
                           res.certificate.edge_ratio);
    return res;
}

}  // namespace shiftindex
