#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace shiftindex {

using Complex = std::complex<double>;

constexpr double kPi = 3.14159265358979323846;
constexpr Complex kI{0.0, 1.0};

/// Small dense d x d complex block, d in {1,2}. Stored row-major in a
/// fixed-size array so vectors of blocks stay contiguous.
struct Block {
    int d = 1;
    Complex a[4] = {};

    Block() = default;
    explicit Block(int dim) : d(dim) {}
    static Block scalar(Complex z) {
        Block b(1);
        b.a[0] = z;
        return b;
    }
    static Block identity(int dim) {
        Block b(dim);
        for (int i = 0; i < dim; ++i) b.a[i * dim + i] = 1.0;
        return b;
    }
    static Block zero(int dim) { return Block(dim); }

    Complex& at(int i, int j) { return a[i * d + j]; }
    Complex at(int i, int j) const { return a[i * d + j]; }

    Block operator+(const Block& o) const {
        Block r(d);
        for (int i = 0; i < d * d; ++i) r.a[i] = a[i] + o.a[i];
        return r;
    }
    Block operator-(const Block& o) const {
        Block r(d);
        for (int i = 0; i < d * d; ++i) r.a[i] = a[i] - o.a[i];
        return r;
    }
    Block operator*(const Block& o) const {
        Block r(d);
        for (int i = 0; i < d; ++i)
            for (int k = 0; k < d; ++k) {
                const Complex aik = a[i * d + k];
                if (aik == Complex{}) continue;
                for (int j = 0; j < d; ++j) r.a[i * d + j] += aik * o.a[k * d + j];
            }
        return r;
    }
    Block operator*(Complex z) const {
        Block r(d);
        for (int i = 0; i < d * d; ++i) r.a[i] = a[i] * z;
        return r;
    }
    Block adjoint() const {
        Block r(d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) r.a[i * d + j] = std::conj(a[j * d + i]);
        return r;
    }
    Complex trace() const {
        Complex t = 0.0;
        for (int i = 0; i < d; ++i) t += a[i * d + i];
        return t;
    }
    double max_abs() const {
        double m = 0.0;
        for (int i = 0; i < d * d; ++i) m = std::max(m, std::abs(a[i]));
        return m;
    }
    bool is_zero(double tol = 0.0) const { return max_abs() <= tol; }
};

/// Error carrying a measured quantity (e.g. the offending singular value).
struct NumericError : std::runtime_error {
    double measured;
    explicit NumericError(const std::string& what, double value = 0.0)
        : std::runtime_error(what), measured(value) {}
};

/// Evaluation mode for grid kernels. Serial is the reproducibility
/// reference; parallel fills independent slots and reduces in the same
/// fixed order, so both modes produce identical bits.
enum class ExecMode { Serial, Parallel };

void parallel_for(std::int64_t n, ExecMode mode, const std::function<void(std::int64_t)>& fn);

/// Ordered sum of per-node values (the deterministic reduction).
inline Complex ordered_sum(const std::vector<Complex>& v) {
    Complex s = 0.0;
    for (const Complex& z : v) s += z;
    return s;
}

inline double ordered_sum(const std::vector<double>& v) {
    double s = 0.0;
    for (double z : v) s += z;
    return s;
}

}  // namespace shiftindex
