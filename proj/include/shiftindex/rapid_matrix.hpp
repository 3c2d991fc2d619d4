#pragma once

#include <map>
#include <optional>
#include <vector>

#include "shiftindex/band_lu.hpp"
#include "shiftindex/core.hpp"

namespace shiftindex {

/// Certificate of off-diagonal decay: seminorm table C_N for the retained
/// N, plus a log-log least-squares fit of the per-offset entry maxima.
struct DecayCertificate {
    std::vector<double> C;   // C[N-1] = sup |a_ij| (1+|i-j|)^N, N = 1..N_max
    double fit_slope = 0.0;  // slope of log max|a_k| vs log(1+|k|)
    double edge_ratio = 0.0; // max entry on the outermost offsets / overall max
    bool decaying = false;
};

/// Element of the rapid-decay matrix algebra on the sequence space over Z,
/// with entries that are d x d blocks (d = 1 scalar, d = 2 for doubled
/// sequence spaces). Stored by diagonals over the window n in [-W, W]:
/// entry (i, j) = diagonals[j - i] evaluated at row index i.
class RapidMatrix {
  public:
    static constexpr int kNMax = 8;  // retained seminorm exponents

    RapidMatrix() = default;
    RapidMatrix(int window, int block_dim);

    static RapidMatrix identity(int window, int block_dim = 1);
    /// diag(f(n)) over the window.
    static RapidMatrix diagonal(int window, const std::vector<Complex>& values);
    /// The shift: ones on offset +k (entry (n, n+k) = 1).
    static RapidMatrix shift(int window, int k, int block_dim = 1);

    int window() const { return W_; }
    int block_dim() const { return d_; }
    std::optional<int> exact_bandwidth() const { return exact_bandwidth_; }
    void set_exact_bandwidth(std::optional<int> b) { exact_bandwidth_ = b; }

    bool has_diagonal(int k) const { return diagonals_.count(k) > 0; }
    const std::map<int, std::vector<Block>>& diagonals() const { return diagonals_; }

    /// Block at (row, col); zero outside stored data or the window.
    Block entry(int row, int col) const;
    void set_entry(int row, int col, const Block& b);
    /// Mutable diagonal k (created on demand), indexed by row + W.
    std::vector<Block>& diagonal(int k);

    bool row_in_window(int n) const { return n >= -W_ && n <= W_; }

    /// sup |a_ij| (1+|i-j|)^N over stored entries. N >= 0.
    double seminorm(int N) const;

    DecayCertificate certificate() const;

    /// Largest |entry| over everything stored.
    double max_abs() const;

    /// Truncated product; exact bandwidths add when both are present.
    /// truncation_error, when non-null, receives a bound for the dropped
    /// out-of-window contributions.
    RapidMatrix multiply(const RapidMatrix& other, double* truncation_error = nullptr) const;

    RapidMatrix add(const RapidMatrix& other) const;
    RapidMatrix subtract(const RapidMatrix& other) const;
    RapidMatrix scale(Complex z) const;
    RapidMatrix adjoint_matrix() const;

    /// T^{-n} a T^{n}: entry (i,j) of the result = a_{i+n, j+n}. The window
    /// shrinks by |n| (rows sampling outside the original window are
    /// dropped); `lost` reports the shrink.
    RapidMatrix conjugate_shift(int n, int* lost = nullptr) const;

    /// Sup-norm of (this - identity) over the inner half window.
    double inner_deviation_from_identity() const;

    /// Dense assembly of the window block, row-major, dim (2W+1) * d.
    std::vector<Complex> dense() const;
    int dense_dim() const { return (2 * W_ + 1) * d_; }

    /// Band LU over the window; bandwidth from the stored diagonals.
    /// Out-of-window entries are treated as zero.
    BandLU band_lu() const;

    int max_offset() const;

  private:
    int W_ = 0;
    int d_ = 1;
    std::optional<int> exact_bandwidth_;
    // diagonals_[k][n + W] = block at (n, n+k); slots with either index
    // outside [-W, W] stay zero.
    std::map<int, std::vector<Block>> diagonals_;
};

struct InvertResult {
    RapidMatrix inverse;
    double residual_left = 0.0;   // || a r - 1 || inner half window
    double residual_right = 0.0;  // || r a - 1 ||
    double smallest_singular = 0.0;
    DecayCertificate certificate;
};

/// Inverse within the algebra: least-squares window inversion (fat-codomain
/// band QR, which selects the decaying bilateral branch) followed by one
/// Neumann correction step against the full band operator. Throws
/// NumericError when the window block is singular within tolerance, when
/// the smallest singular value keeps collapsing as the window grows, or
/// when the computed inverse fails decay certification.
InvertResult invert(const RapidMatrix& a, double tol = 1e-8);

/// Rectangular band window of a: domain columns [-domain_W, domain_W],
/// codomain rows extended by the scalar bandwidth. transpose gives the same
/// construction for a^T (used for inverse-row extraction). Requires
/// domain_W + bandwidth <= window.
BandQR fat_qr(const RapidMatrix& a, int domain_W, bool transpose = false,
              int band_override = -1);

/// Smallest/largest singular value of the bilateral-consistent window.
double window_sigma_min(const RapidMatrix& a);
double window_sigma_max(const RapidMatrix& a);

/// sigma_min at windows ~W/4, ~W/2, W and the fitted log-log slope vs W;
/// a clearly negative slope signals spectrum touching zero.
struct SigmaTrend {
    double sigma_min = 0.0;
    double slope = 0.0;
};
SigmaTrend window_sigma_trend(const RapidMatrix& a);

}  // namespace shiftindex
