#include "shiftindex/weighted.hpp"

#include <algorithm>
#include <cmath>

namespace shiftindex {

double weighted_operator_norm(const RapidMatrix& a, double s, double k, double R, int iters) {
    // B = W_{s-k} a W_s^{-1} with W_sigma = diag((n^2+R^2)^{sigma/2});
    // power iteration on B* B using the band structure of a.
    const int W = a.window();
    const int d = a.block_dim();
    RapidMatrix b(W, d);
    for (const auto& [off, diag] : a.diagonals()) {
        auto& out = b.diagonal(off);
        for (int n = -W; n <= W; ++n) {
            const int col = n + off;
            if (col < -W || col > W) continue;
            const Block& blk = diag[n + W];
            if (blk.is_zero()) continue;
            const double wr = std::pow(static_cast<double>(n) * n + R * R, (s - k) / 2.0);
            const double wc = std::pow(static_cast<double>(col) * col + R * R, -s / 2.0);
            out[n + W] = blk * Complex(wr * wc, 0.0);
        }
    }
    BandLU lu = b.band_lu();
    return lu.largest_singular_value(iters);
}

double family_order_norm(const RFamily& f, double s, int k, const std::vector<double>& R_grid) {
    if (R_grid.empty()) throw NumericError("family_order_norm: empty R grid");
    double worst = 0.0;
    for (double R : R_grid) {
        if (R < 1.0) throw NumericError("family_order_norm: R grid must lie in [1, inf)", R);
        RapidMatrix a = f.sampler(R);
        worst = std::max(worst, weighted_operator_norm(a, s, static_cast<double>(k), R));
    }
    return worst;
}

TraceResult weighted_trace(const RapidMatrix& a) {
    const int W = a.window();
    // fit the diagonal order: log |a_nn| vs log sqrt(1+n^2)
    std::vector<double> xs, ys;
    for (int n = -W; n <= W; ++n) {
        const double v = std::abs(a.entry(n, n).trace());
        if (v > 0.0 && std::abs(n) >= std::max(1, W / 4)) {
            xs.push_back(std::sqrt(1.0 + static_cast<double>(n) * n));
            ys.push_back(v);
        }
    }
    double order = 0.0;
    if (xs.size() >= 4) order = loglog_slope(xs, ys);
    if (xs.empty()) order = -1e9;  // identically zero tail: trivially summable
    if (order >= -1.0 && !xs.empty()) {
        // a flat or growing diagonal is not summable
        double edge = 0.0;
        for (int n = W - std::max(1, W / 8); n <= W; ++n)
            edge = std::max(edge, std::abs(a.entry(n, n).trace()));
        if (edge > 0.0)
            throw NumericError("weighted_trace: diagonal order >= -1, not summable", order);
    }

    TraceResult r;
    r.diag_order = order;
    // fixed summation order: ascending |n|, positive first
    Complex s = a.entry(0, 0).trace();
    for (int n = 1; n <= W; ++n) {
        s += a.entry(n, n).trace();
        s += a.entry(-n, -n).trace();
    }
    r.value = s;
    // tail: 2 * C * integral_W^inf r^order dr with C from the edge entries
    double edge = 0.0;
    for (int n = W - std::max(1, W / 16); n <= W; ++n)
        edge = std::max(edge, std::abs(a.entry(n, n).trace()) *
                                  std::pow(std::sqrt(1.0 + static_cast<double>(n) * n), -order));
    if (order < -1.0 && order > -1e8)
        r.tail_bound = 2.0 * edge * std::pow(static_cast<double>(W), order + 1.0) / (-order - 1.0);
    return r;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        if (x[i] <= 0.0 || std::abs(y[i]) <= 0.0) continue;
        const double lx = std::log(x[i]);
        const double ly = std::log(std::abs(y[i]));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    if (n < 2) return 0.0;
    const double denom = n * sxx - sx * sx;
    return (denom != 0.0) ? (n * sxy - sx * sy) / denom : 0.0;
}

double shift_weight_constant(int n_range, int R_max, int k_range) {
    double sup = 0.0;
    for (int R = 1; R <= R_max; ++R) {
        const double R2 = static_cast<double>(R) * R;
        for (int k = -k_range; k <= k_range; ++k) {
            const double kk = 1.0 + static_cast<double>(k) * k;
            for (int n = -n_range; n <= n_range; ++n) {
                const double num = (static_cast<double>(n) + k) * (n + k) + R2;
                const double den = (static_cast<double>(n) * n + R2) * kk;
                sup = std::max(sup, num / den);
            }
        }
    }
    return sup;
}

}  // namespace shiftindex
