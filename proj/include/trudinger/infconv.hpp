#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "trudinger/grid.hpp"
#include "trudinger/pde.hpp"

namespace trudinger {

struct InfConvParams {
    double epsilon = 0.0;
    double delta_eps = 0.0;
    double q = 2.0;

    void validate() const;
    double eps_pow() const;  // epsilon^{q-1}, the space penalty scale
};

/// Regularized field u_eps(x,t) = min over grid nodes (y,s) of
/// u(y,s) + |y-x|^q/(q eps^{q-1}) + |s-t|^2/(2 delta_eps), with the
/// minimizer and the two penalty addends kept per node.
struct InfConvResult {
    GridFunction u_eps;
    std::vector<double> argmin_x, argmin_t;          // minimizer coordinates
    std::vector<double> penalty_space, penalty_time;  // the two penalty addends
    IndexBox xi_eps;   // nodes whose search window fits inside the grid
    InfConvParams params;
    double r_eps = 0.0;      // spatial window radius (q eps^{q-1} osc)^{1/q}
    double t_eps = 0.0;      // temporal window radius (2 delta_eps osc)^{1/2}
    double osc = 0.0;        // oscillation of the input over the whole grid
    double u_abs_max = 0.0;  // sup |u| of the input

    size_t idx(int i, int j) const {
        return static_cast<size_t>(j) * u_eps.grid().nx + i;
    }
};

/// delta_eps = (omega_t^{-1}(eps^{q-1}))^2 / (2 osc).
double delta_from_modulus(const ModulusOfContinuity& omega_t, double epsilon,
                          double q, double osc);

/// Exhaustive window minimization; ties resolved toward smaller |y-x|, then
/// smaller |s-t|, then the smaller node index pair. Deterministic for any
/// thread count.
InfConvResult inf_convolve(const GridFunction& u, const InfConvParams& params,
                           int threads = 1);

// --- structure checks ------------------------------------------------------

struct PenaltyBoundsReport {
    long long n_checked = 0;
    long long time_violations = 0;
    long long space_violations = 0;
    double worst_time_margin = 0.0;   // min over nodes of bound - lhs
    double worst_space_margin = 0.0;
    bool pass = false;
};

/// Verifies at every Xi_eps node that the time penalty stays below
/// eps^{q-1} and the spatial offset below q^{1/q} eps^{(q-1)/q}
/// omega_x^{1/q}(offset), with additive slack 1e-12 (1 + sup|u|).
PenaltyBoundsReport check_penalty_bounds(const InfConvResult& result,
                                         const ModulusOfContinuity& omega_x,
                                         const ModulusOfContinuity& omega_t);

struct SemiconcavityReport {
    long long n_checked = 0;
    long long violations = 0;
    double worst_margin = 0.0;  // min over checks of tol - value; >= 0 when clean
    double tol = 0.0;
    int worst_i = -1, worst_j = -1;
    bool pass = false;
};

/// Second differences and midpoint concavity of
/// v = u_eps - C|x|^2 - t^2/delta_eps, C = (q-1) r_eps^{q-2}/eps^{q-1},
/// at interior Xi_eps nodes.
SemiconcavityReport semiconcavity_check(const InfConvResult& result);

struct JetInfo {
    double theta = 0.0, eta = 0.0;        // closed forms from the minimizer
    double fd_theta = 0.0, fd_eta = 0.0;  // centered differences of u_eps
    double d2xx = 0.0;
    double curv_x = 0.0, curv_t = 0.0;    // first-derivative error scales
    double hessian_bound = 0.0;
    bool fd_ok = false, hessian_ok = false, ok = false;
};

/// Closed-form first-order jet at an interior Xi_eps node plus the
/// finite-difference cross-check (factor-5 O(dx), O(dt) envelopes).
JetInfo jet_extract(const InfConvResult& result, int i, int j);

struct ElementaryInequality {
    double lhs = 0.0;
    double bound = 0.0;
    bool ok = false;
};

/// |(a+s)^{(2-p)/2} - a^{(2-p)/2}| against (|p-2|/2) m^{-p/2} s.
ElementaryInequality elementary_inequality_check(double a, double s, double p, double m);

// --- first-order error model ---------------------------------------------

struct ErrorConstants {
    int N = 1;
    double m = 1.0;
    double M = 1.0;
    double C = 1.0;  // the unpinned multiplicative constant
};

struct ErrorModel {
    std::function<double(double)> h;  // continuous, nonincreasing, h(inf) -> 0
    double E_eps = 0.0;
    double C0 = 0.0;
    std::vector<std::pair<double, double>> h_table;  // includes the s = 0 limit
};

/// h(s) = omega_x^{1/2}(C0^2 / s) with the s -> 0 limit at 0.
std::function<double(double)> h_curve(const ModulusOfContinuity& omega_x, double C0);

ErrorModel error_model(const ModulusOfContinuity& omega_x, double epsilon, double p,
                       double q, const ErrorConstants& consts);

/// G = 0 at zero gradient, else -E_eps (g^p h(g) + g^{max(0,p-2)}).
double error_term_G(double grad_norm, const ErrorModel& model, double p);

// --- error-augmented weak inequality --------------------------------------

struct AugmentedWeakReport {
    std::vector<double> values;  // one per test function
    double min_value = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

/// For each nonnegative phi supported in Xi_eps, the quadrature of
/// -u_eps^{p-1} dphi/dt + flux(Du_eps).dphi/dx - phi G(|Du_eps|); passes when
/// the battery minimum clears -tol with
/// tol = tol_factor (dx+dt) |phi|_C1 scale |supp phi|.
AugmentedWeakReport augmented_weak_check(const InfConvResult& result,
                                         const ErrorModel& model, const Params& params,
                                         std::span<const GridFunction> testfns,
                                         double tol_factor = 1.0);

// --- serialization ---------------------------------------------------------
//
// <base>.gridfun          u_eps values
// <base>.argmin.gridfun   offsets (x_eps - x) stacked over (t_eps - t) planes
// <base>.json             {epsilon, delta_eps, q, xi_eps_bounds}

void write_infconv(const std::filesystem::path& base, const InfConvResult& result);
InfConvResult read_infconv(const std::filesystem::path& base);

}  // namespace trudinger
