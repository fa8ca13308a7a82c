#pragma once

#include <span>
#include <vector>

#include "trudinger/grid.hpp"
#include "trudinger/pde.hpp"

namespace trudinger {

/// Explicit space-time barrier pinned at a probe point: the upper field is
/// min(u0 + A + Theta (t - t0) + K |x - center|^beta, M) with
/// beta = p/(p-1), A = (s0 - t0)^{1/2}, K = max(M, L^beta A^{1-beta}/beta),
/// Theta = C_Theta K^{p-1}.
struct BarrierSpec {
    double u0 = 0.0;
    double t0 = 0.0, s0 = 0.0;
    double A = 0.0;
    double beta = 2.0;
    double K = 0.0;
    double Theta = 0.0;
    double C_Theta = 1.0;
    double M = 1.0;
    double m = 0.0;  // floor of the lower barrier
    double L = 0.0;
    double p = 2.0;
    double center_x = 0.0;

    /// Radius of the untruncated region {upper < M} at time t (0 once fully
    /// truncated).
    double rho(double t) const;
};

struct SpaceTimePoint {
    double x = 0.0, t = 0.0;
};

double eval_upper(const BarrierSpec& spec, double x, double t);
double eval_lower(const BarrierSpec& spec, double x, double t);

GridFunction upper_barrier_field(const BarrierSpec& spec, const SpaceTimeGrid& grid);
GridFunction lower_barrier_field(const BarrierSpec& spec, const SpaceTimeGrid& grid);

struct BarrierResidualReport {
    double min_residual = 0.0;
    double x = 0.0, t = 0.0;  // location of the minimum
    long long n_sampled = 0;
    long long n_skipped = 0;  // truncated or inside the free-boundary buffer
};

/// Closed-form pointwise residual d/dt(upper^{p-1}) - p-Laplacian(upper)
/// = (p-1) phi^{p-2} Theta - (K beta)^{p-1} on the free region; sample
/// points may not touch the dx-buffer around the center line.
BarrierResidualReport supersolution_residual(const BarrierSpec& spec,
                                             std::span<const SpaceTimePoint> points,
                                             double dx_buffer);

/// Fills the constants from (t0, s0, L) and doubles C_Theta until the
/// residual is nonnegative over u's nodes in [t0, s0] (outside the buffers).
BarrierSpec make_barrier(const GridFunction& u, int center_i, double t0, double s0,
                         double L, const Params& params);

struct TimeHolderReport {
    BarrierSpec spec;
    bool domination_ok = false;  // upper barrier above u on the parabolic boundary
    double worst_boundary_gap = 0.0;
    double interior_max_violation = 0.0;
    double bound = 0.0;     // A + Theta (s0 - t0), after truncation
    double measured = 0.0;  // u(x0, s0) - u(x0, t0)
    bool ok = false;
    bool lower_domination_ok = false;
    double lower_interior_max_violation = 0.0;
    double measured_lower = 0.0;
    bool lower_ok = false;
    double tol = 0.0;
};

/// Comparison of a solver field against the two barriers on the sub-cylinder
/// around the probe node: domination on the parabolic boundary, pointwise
/// ordering inside, and the resulting two-sided time-increment bound.
TimeHolderReport barrier_time_holder(const GridFunction& u, int x0_node, double t0,
                                     double s0, double L, const Params& params,
                                     double tol = 1e-7);

}  // namespace trudinger
