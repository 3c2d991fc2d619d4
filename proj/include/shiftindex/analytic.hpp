#pragma once

#include <Eigen/Dense>
#include <string>

#include "shiftindex/geometry.hpp"

namespace shiftindex {

/// d x d system of shift operators (d = 1 for scalar operators); all
/// entries share the model.
struct BlockOperator {
    int d = 1;
    std::vector<ShiftOperator> entries;  // row-major, d * d
    bool take_adjoint = false;           // assemble the conjugate transpose

    static BlockOperator scalar(ShiftOperator D) {
        BlockOperator b;
        b.d = 1;
        b.entries.push_back(std::move(D));
        return b;
    }
    const FlatModel& model() const { return entries.front().model; }
    int order() const {
        int o = 0;
        for (const auto& e : entries) o = std::max(o, e.order());
        return o;
    }
    int mode_bandwidth() const {
        int b = 0;
        for (const auto& e : entries) b = std::max(b, e.coeff_bandwidth());
        return b;
    }
    BlockOperator adjoint() const;
};

/// Exact compression of a shift operator to the Fourier-mode window
/// [-N, N]^n in Sobolev-weighted bases; `weighted` is the square window.
struct FourierCompression {
    int N = 0;
    int n = 1;
    int d = 1;
    double s = 0.0;
    int order = 0;
    Eigen::MatrixXcd weighted;
};

/// Raw (unweighted) rectangular matrix: rows = modes [-Nrow, Nrow]^n,
/// cols = modes [-Ncol, Ncol]^n, each blown up by the block dimension.
/// m = 0 covariable directions are regularized by reg_plus (affects
/// P+/P-/Angular factors only).
Eigen::MatrixXcd assemble_modes(const BlockOperator& D, int Nrow, int Ncol,
                                bool reg_plus = true);

FourierCompression assemble(const BlockOperator& D, int N, double s, bool reg_plus = true);

/// Number of scalar rows of an N-window (block included).
int mode_dim(const FlatModel& m, int N, int d);

struct IndexSvdResult {
    bool conclusive = false;
    bool low_confidence = false;
    int index = 0;
    int plateau_len = 0;
    std::string message;
    struct PerN {
        int N = 0;
        int ker = 0, coker = 0;
        double gap_ker = 0.0, gap_coker = 0.0;
    };
    std::vector<PerN> table;
};

/// Finite-section index: epsilon-kernel dimensions of the fat rectangular
/// compressions of D and D^*, requiring a plateau over the top half of
/// N_list and spectral gaps >= 1e3.
IndexSvdResult index_svd(const BlockOperator& D, double s, const std::vector<int>& N_list,
                         double eps_rel = 1e-6, bool reg_plus = true);

/// Inverse-symbol data used by the quantization: either sampled rows of the
/// inverse of an S-valued symbol on the circle (n = 1), or a closed-form
/// expression block (block-scalar symbols, any n).
struct InverseSymbolData {
    // n = 1 sampled route: fourier[branch][k] = Fourier coefficients in x of
    // the inverse generator at offset k; branch 0: xi = +1, 1: xi = -1.
    struct Coeff {
        int l;        // frequency
        int k;        // sequence offset
        Complex v;
    };
    std::vector<std::vector<Coeff>> sampled;  // per branch
    // closed-form route (generators must have no shift part)
    bool closed_form = false;
    ExprBlock closed;  // d x d inverse entries as expressions of (x, xi)
    int d = 1;
};

/// Sample the inverse of an S-valued circle symbol (n = 1) on an x-grid and
/// return the Fourier data of its generator rows.
InverseSymbolData sample_inverse_circle(const SymbolField& sigma, int nx, int window,
                                        double tol, double coeff_cut = 1e-13);

struct ParametrixResult {
    Eigen::MatrixXcd Rp;          // refined parametrix on the extended window
    int N_ext = 0;
    double remainder_norm = 0.0;  // || (1 - R'D) e_m || on a probe band
    double remainder_order = 0.0; // fitted decay exponent of the remainder
};

/// Quantize the inverse symbol (midpoint rule: covariable = sign of the
/// mode), scale by |m|^{-order}, and refine once: R' = R + (1 - RD) R.
ParametrixResult build_parametrix(const BlockOperator& D, const InverseSymbolData& inv,
                                  int N_ext, bool reg_plus = true);

struct RegularizerIndex {
    bool conclusive = false;
    int index = 0;
    Complex raw;          // tr (1-R'D)^2 - tr (1-DR')^2
    double residual = 0.0;  // distance to the nearest integer
    double tail_bound = 0.0;
};

/// Calderon-Fedosov trace index: tr (1 - R'D)^2 - tr (1 - DR')^2 computed
/// on the window with a decay-based tail bound. Conclusive when the value
/// sits within 0.1 of an integer.
RegularizerIndex index_regularizer(const BlockOperator& D, const ParametrixResult& par, int N,
                                   bool reg_plus = true);

}  // namespace shiftindex
