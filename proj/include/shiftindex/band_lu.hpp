#pragma once

#include <vector>

#include "shiftindex/core.hpp"

namespace shiftindex {

/// LU factorization with partial pivoting of a complex band matrix,
/// LAPACK-style band storage. Rows/columns are 0..n-1; entries with
/// |i-j| > bw are implicitly zero. Supports solves with A and A^T.
class BandLU {
  public:
    BandLU() = default;
    BandLU(int n, int kl, int ku);

    void reset(int n, int kl, int ku);
    int n() const { return n_; }

    Complex& at(int i, int j);      // only within the band, before factor()
    Complex get(int i, int j) const;

    void factor();
    bool factored() const { return factored_; }

    void solve(Complex* b) const;            // A x = b, in place
    void solve_transpose(Complex* b) const;  // A^T x = b, in place

    void solve(std::vector<Complex>& b) const { solve(b.data()); }
    void solve_transpose(std::vector<Complex>& b) const { solve_transpose(b.data()); }

    /// Estimate of the smallest singular value by inverse power iteration
    /// on A*A (uses both solve and solve_transpose). Requires factored().
    double smallest_singular_value(int iters = 30, std::uint64_t seed = 7) const;

    /// Largest singular value of the stored band matrix by power iteration.
    /// Valid only before factor() overwrites the band.
    double largest_singular_value(int iters = 30, std::uint64_t seed = 11) const;

    void apply(const Complex* x, Complex* y) const;            // y = A x (unfactored)
    void apply_adjoint(const Complex* x, Complex* y) const;    // y = A* x (unfactored)

  private:
    int n_ = 0, kl_ = 0, ku_ = 0;
    int ldab_ = 0;               // rows of band storage = 2*kl + ku + 1
    std::vector<Complex> ab_;    // column-major band storage
    std::vector<int> ipiv_;
    bool factored_ = false;

    Complex& ab(int storage_row, int col) { return ab_[static_cast<size_t>(col) * ldab_ + storage_row]; }
    const Complex& ab(int storage_row, int col) const {
        return ab_[static_cast<size_t>(col) * ldab_ + storage_row];
    }
};

/// Least-squares solver for a rectangular band matrix (rows M >= cols N,
/// bandwidth s around the shifted diagonal), via Givens QR. This is the
/// finite model of a bilateral band operator that selects the decaying
/// solution branch: the extra rows pin the boundary, so truncation does
/// not manufacture spurious growing solutions the way a square section
/// does.
class BandQR {
  public:
    /// M rows, N cols; row i couples to columns [i - shift - s, i - shift + s]
    /// where shift = (M - N) / 2 (rows extend the column window symmetrically).
    BandQR(int rows, int cols, int band);

    int rows() const { return m_; }
    int cols() const { return n_; }

    Complex& at(int i, int j);  // before factor()
    void factor();

    /// minimize || A x - b ||; b has length rows(), x length cols().
    void solve(const Complex* b, Complex* x) const;

    /// y = A x for the original entries (usable before and after factor()).
    void apply(const Complex* x, Complex* y) const;
    void apply_adjoint(const Complex* y, Complex* x) const;

    /// Smallest singular value of the rectangular matrix (Lanczos).
    double smallest_singular_value(int iters = 60, std::uint64_t seed = 7) const;
    double largest_singular_value(int iters = 60, std::uint64_t seed = 11) const;

  private:
    int m_ = 0, n_ = 0, s_ = 0, shift_ = 0;
    int width_ = 0;  // working row width, 3s + 3
    // original band, row-major: row i covers columns [start(i), start(i)+2s]
    std::vector<Complex> orig_;
    // R factor rows: row j covers columns [j, j + width)
    std::vector<Complex> r_;
    struct Rot {
        int col;          // pivot column / R row
        float pad;        // alignment
        Complex c, s;     // rotation coefficients
        int src;          // which working row the rotation consumed (-1: R row move)
    };
    std::vector<Rot> rots_;  // replayed in order on RHS vectors
    bool factored_ = false;

    int col_lo(int i) const;  // first column row i touches
    void r_backsolve(Complex* x) const;
    void r_forwardsolve_adjoint(Complex* x) const;
};

}  // namespace shiftindex
