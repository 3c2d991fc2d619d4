#pragma once

#include "shiftindex/topo.hpp"
#include "shiftindex/weighted.hpp"

namespace shiftindex {

/// Mapping-torus node (x, t, phi): the sphere point (R cos phi, t, R sin phi)
/// with row i of the fiber sampling (x + 2 pi i theta, R cos phi, t + i,
/// R sin phi). Evaluation of a cylinder field there.
RapidMatrix dilated_evaluate(const SymbolField& f, double x, double t, double phi, double R,
                             int window);

/// Components of a dilated graded form at a node: ambient masks with the
/// h_R scaling of dxi/dtau absorbed into the chart pullback by the caller.
std::map<unsigned, RapidMatrix> dilated_evaluate(const GradedForm& omega, double x, double t,
                                                 double phi, double R, int window);

struct OrderFitReport {
    double fitted = 0.0;    // slope of log norm vs log R
    double declared = 0.0;  // expected order
    bool pass = false;      // within +-0.25
    std::vector<double> R;
    std::vector<double> norms;
    double weighted_slope = 0.0;  // slope of the weighted family norm / R^j
};

/// est3: a coefficient field of bidegree (i, j) dilates to a family of
/// order -(i + j); fits the measured operator-norm exponent over R.
OrderFitReport verify_est3(const SymbolField& coef, int i_deg, int j_deg,
                           const std::vector<double>& R_grid, int window);

/// est4: the dilation defect (a'a)_R - a'_R a_R is one order lower than the
/// product; fits the defect exponent, declared -(i+i'+j+j') - 1.
OrderFitReport verify_est4(const SymbolField& a, int ia, int ja, const SymbolField& b, int ib,
                           int jb, const std::vector<double>& R_grid, int window);

struct TraceIdentityReport {
    Complex tau_value{};           // cylinder side
    std::vector<double> R;
    std::vector<Complex> torus_values;
    double max_deviation = 0.0;    // |torus(R) - tau|
    double r_variation = 0.0;      // max |torus(R) - torus(R')|
    bool pass = false;
};

struct TorusGrid {
    int nx = 32;
    int nt = 8;
    int nphi = 32;
};

/// trace4: the mapping-torus trace integral of omega_R equals tau(omega)
/// for every R. The fiber window doubles from 8R until the value settles.
TraceIdentityReport trace_identity(const GradedForm& omega, const std::vector<double>& R_grid,
                                   const CycleDomain& cylinder_dom, const TorusGrid& grid,
                                   double tol, ExecMode mode = ExecMode::Serial);

/// Torus-side integral of [omega_R]_top alone (no cylinder comparison).
Complex torus_trace_integral(const GradedForm& omega, double R, const TorusGrid& grid, int window,
                             ExecMode mode = ExecMode::Serial);

struct MappingTorusConfig {
    std::vector<double> R_transport = {2, 3, 4, 6, 8};  // asymptotic route
    std::vector<double> R_exact = {4, 8};               // exact-inverse route
    TorusGrid grid;
    int pad = 32;            // window pad beyond the plateau support
    int cyl_window = 24;     // window for cylinder-inverse row solves
    double sigma_floor = 1e-3;  // invertibility threshold for R0
};

struct MappingTorusResult {
    std::vector<double> R;            // transport grid actually used (>= R0)
    std::vector<Complex> transport;   // values with the transported inverse
    std::vector<double> R_exact;
    std::vector<Complex> exact;       // values with the exact window inverse
    Complex limit{};                  // exact-route value (R-independent)
    double r_independence = 0.0;      // spread of the exact values
    double rate = 0.0;                // fitted exponent of |transport - limit|
    Complex fit_limit{};              // Richardson limit of the transport data
    double R0 = 1.0;                  // first sampled R with invertible symbol
};

/// Both evaluations of the mapping-torus index integral: the transported
/// inverse (converges at rate 1/R) and the exact window inverse (constant
/// in R); the limit is certified by the exact route.
MappingTorusResult ind_t_mapping_torus(const SymbolField& cyl_block, const FlatModel& model,
                                       const MappingTorusConfig& cfg,
                                       ExecMode mode = ExecMode::Serial);

/// Least-squares fit of data = L + sum_p c_p R^{-p}, powers 1..np.
Complex richardson_fit(const std::vector<double>& R, const std::vector<Complex>& vals, int np);

}  // namespace shiftindex
