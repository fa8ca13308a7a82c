#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "trudinger/grid.hpp"

namespace trudinger {

/// Equation and positivity parameters. q follows the penalty-exponent rule:
/// q = 2 for p >= 2 and q > p/(p-1) for 1 < p < 2.
struct Params {
    double p = 2.0;
    double q = 2.0;
    /// Flux regularization delta of (delta + |Du|^2)^{(p-2)/2} Du.
    /// Negative means automatic: 0 for p >= 2, dx^2 for 1 < p < 2.
    double delta_reg = -1.0;
    double m = 1.0;
    double M = 1.0;

    static Params make(double p, double m, double M);
    void validate() const;
    double resolved_delta(double dx) const;
};

struct SolverConfig {
    double newton_tol = 1e-11;
    int newton_max_iter = 60;
    double damping = 1.0;  // in (0, 1]
    /// Project Newton iterates into the data range; with it off a
    /// nonpositive iterate aborts the step.
    bool clip_to_bounds = true;

    void validate() const;
};

struct NewtonError : std::runtime_error {
    NewtonError(const std::string& msg, double residual_, int time_index_)
        : std::runtime_error(msg), residual(residual_), time_index(time_index_) {}
    double residual;
    int time_index;  // -1 outside a time march
};

/// Divergence-form stencil: node i gets (F_{i+1/2} - F_{i-1/2})/dx with
/// F_{i+1/2} = (delta + D+u^2)^{(p-2)/2} D+u, D+u = (u_{i+1}-u_i)/dx.
/// Endpoints of the returned slice are 0; boundary handling is the caller's.
std::vector<double> p_laplacian(std::span<const double> u, const Params& params,
                                double dx);

/// One Newton linearization of the implicit step in the conserved variable
/// w = u^{p-1}: residual R_i = w_i - w_prev_i - dt*(div flux)_i on interior
/// nodes, plus the tridiagonal Jacobian dR/dw. Exposed for scheme-level
/// tests (at p = 2 this is exactly the backward-Euler heat system).
struct NewtonSystem {
    std::vector<double> lower, diag, upper;  // interior rows 1..nx-2
    std::vector<double> residual;
};
NewtonSystem newton_system(std::span<const double> w, std::span<const double> w_prev,
                           double dt, double dx, const Params& params);

/// Backward Euler on w = u^{p-1} with Dirichlet endpoint values imposed
/// exactly; damped Newton until the residual inf-norm is below newton_tol.
std::vector<double> step_implicit(std::span<const double> u_n, double dt,
                                  const Params& params,
                                  std::pair<double, double> bc,
                                  const SolverConfig& config, double dx);

struct DirichletBc {
    std::function<double(double)> left, right;  // values at time t

    static DirichletBc constant(double l, double r) {
        return {[l](double) { return l; }, [r](double) { return r; }};
    }
};

struct SolveResult {
    GridFunction u;
    std::vector<int> newton_iters;  // one entry per time step
    double max_residual = 0.0;
};

/// Time march over grid.nt-1 implicit steps starting from u0 (one value per
/// space node, the j = 0 slice).
SolveResult solve(std::span<const double> u0, const DirichletBc& bc,
                  const SpaceTimeGrid& grid, const Params& params,
                  const SolverConfig& config);

/// Trapezoid quadrature of integral(-u^{p-1} dphi/dt + flux(Du) . dphi/dx).
/// phi uses centered differences (one-sided at the first/last slice where it
/// vanishes), Du the forward differences of the solver flux. Nonnegative
/// value certifies discrete supersolution behavior against this phi.
double weak_residual(const GridFunction& u, const GridFunction& testfn,
                     const Params& params);

struct ComparisonReport {
    double max_violation = 0.0;  // max over interior nodes of (u - v)+
    int i = -1, j = -1;          // first node attaining it, time-major order
};

/// Discrete comparison: requires u <= v on the parabolic boundary (bottom
/// slice and lateral columns), reports the worst interior excess of u over v.
ComparisonReport comparison_check(const GridFunction& u, const GridFunction& v);

}  // namespace trudinger
