#include "trudinger/barrier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace trudinger {

double BarrierSpec::rho(double t) const {
    const double num = M - u0 - A - Theta * (t - t0);
    if (num <= 0.0) return 0.0;
    return std::pow(num / K, 1.0 / beta);
}

namespace {

double upper_untruncated(const BarrierSpec& spec, double x, double t) {
    return spec.u0 + spec.A + spec.Theta * (t - spec.t0) +
           spec.K * std::pow(std::abs(x - spec.center_x), spec.beta);
}

void require_time(const BarrierSpec& spec, double t) {
    if (t < spec.t0 - 1e-12 * (1.0 + std::abs(spec.t0)))
        throw std::invalid_argument("barrier is defined for t >= t0");
}

}  // namespace

double eval_upper(const BarrierSpec& spec, double x, double t) {
    require_time(spec, t);
    return std::min(upper_untruncated(spec, x, t), spec.M);
}

double eval_lower(const BarrierSpec& spec, double x, double t) {
    require_time(spec, t);
    return std::max(spec.u0 - spec.A - spec.Theta * (t - spec.t0) -
                        spec.K * std::pow(std::abs(x - spec.center_x), spec.beta),
                    spec.m);
}

GridFunction upper_barrier_field(const BarrierSpec& spec, const SpaceTimeGrid& grid) {
    return GridFunction::sampled(grid,
                                 [&](double x, double t) { return eval_upper(spec, x, t); });
}

GridFunction lower_barrier_field(const BarrierSpec& spec, const SpaceTimeGrid& grid) {
    return GridFunction::sampled(grid,
                                 [&](double x, double t) { return eval_lower(spec, x, t); });
}

BarrierResidualReport supersolution_residual(const BarrierSpec& spec,
                                             std::span<const SpaceTimePoint> points,
                                             double dx_buffer) {
    if (!(dx_buffer > 0.0)) throw std::invalid_argument("need dx_buffer > 0");
    BarrierResidualReport rep;
    rep.min_residual = std::numeric_limits<double>::infinity();
    const double div_term = std::pow(spec.K * spec.beta, spec.p - 1.0);
    for (const SpaceTimePoint& pt : points) {
        require_time(spec, pt.t);
        const double r = std::abs(pt.x - spec.center_x);
        if (r < dx_buffer * (1.0 - 1e-12))
            throw std::invalid_argument("region touching the singular center line");
        const double phi = upper_untruncated(spec, pt.x, pt.t);
        if (phi >= spec.M || std::abs(r - spec.rho(pt.t)) < 0.5 * dx_buffer) {
            ++rep.n_skipped;
            continue;
        }
        const double res =
            (spec.p - 1.0) * std::pow(phi, spec.p - 2.0) * spec.Theta - div_term;
        ++rep.n_sampled;
        if (res < rep.min_residual) {
            rep.min_residual = res;
            rep.x = pt.x;
            rep.t = pt.t;
        }
    }
    return rep;
}

BarrierSpec make_barrier(const GridFunction& u, int center_i, double t0, double s0,
                         double L, const Params& params) {
    const SpaceTimeGrid& g = u.grid();
    if (center_i < 0 || center_i >= g.nx)
        throw std::invalid_argument("probe node outside the grid");
    if (!(s0 > t0)) throw std::invalid_argument("need t0 < s0");
    if (t0 < g.t_min - 1e-12 || s0 > g.t_max + 1e-12)
        throw std::invalid_argument("barrier window outside the time range");
    if (!(L >= 0.0)) throw std::invalid_argument("need L >= 0");
    if (!u.positive()) throw std::invalid_argument("barrier needs positive data");

    // Snap t0 to its node to read the probe value.
    const int j0 = static_cast<int>(std::lround((t0 - g.t_min) / g.dt()));

    BarrierSpec spec;
    spec.p = params.p;
    spec.m = params.m;
    spec.M = params.M;
    spec.L = L;
    spec.center_x = g.x(center_i);
    spec.t0 = t0;
    spec.s0 = s0;
    spec.u0 = u(center_i, j0);
    spec.A = std::sqrt(s0 - t0);
    spec.beta = params.p / (params.p - 1.0);
    spec.K = std::max(params.M,
                      std::pow(L, spec.beta) * std::pow(spec.A, 1.0 - spec.beta) / spec.beta);

    // Sample lattice for the escalation: grid nodes in [t0, s0] away from the
    // center line.
    std::vector<SpaceTimePoint> pts;
    for (int j = 0; j < g.nt; ++j) {
        const double t = g.t(j);
        if (t < t0 || t > s0 + 1e-12 * (1.0 + std::abs(s0))) continue;
        for (int i = 0; i < g.nx; ++i) {
            if (std::abs(g.x(i) - spec.center_x) < g.dx() * (1.0 - 1e-12)) continue;
            pts.push_back({g.x(i), t});
        }
    }

    spec.C_Theta = 1.0;
    for (int k = 0; k < 64; ++k) {
        spec.Theta = spec.C_Theta * std::pow(spec.K, spec.p - 1.0);
        const auto rep = supersolution_residual(spec, pts, g.dx());
        if (rep.n_sampled == 0 || rep.min_residual >= 0.0) return spec;
        spec.C_Theta *= 2.0;
    }
    throw std::runtime_error("barrier escalation failed to certify the residual");
}

TimeHolderReport barrier_time_holder(const GridFunction& u, int x0_node, double t0,
                                     double s0, double L, const Params& params,
                                     double tol) {
    const SpaceTimeGrid& g = u.grid();
    TimeHolderReport rep;
    rep.tol = tol;
    rep.spec = make_barrier(u, x0_node, t0, s0, L, params);

    const int j0 = static_cast<int>(std::lround((t0 - g.t_min) / g.dt()));
    const int j1 = static_cast<int>(std::lround((s0 - g.t_min) / g.dt()));
    if (j0 == j1) throw std::invalid_argument("t0 and s0 snap to the same slice");

    // Largest symmetric ball around the probe that stays on the grid.
    const double cx = g.x(x0_node);
    const double radius = std::min(cx - g.x_min, g.x_max - cx);
    int i_lo = x0_node, i_hi = x0_node;
    while (i_lo > 0 && cx - g.x(i_lo - 1) <= radius * (1.0 + 1e-12)) --i_lo;
    while (i_hi + 1 < g.nx && g.x(i_hi + 1) - cx <= radius * (1.0 + 1e-12)) ++i_hi;
    if (i_hi - i_lo < 2) throw std::invalid_argument("probe too close to the boundary");

    const auto upper = [&](int i, int j) { return eval_upper(rep.spec, g.x(i), g.t(j)); };
    const auto lower = [&](int i, int j) { return eval_lower(rep.spec, g.x(i), g.t(j)); };

    // Parabolic boundary: bottom slice plus lateral columns.
    rep.worst_boundary_gap = std::numeric_limits<double>::infinity();
    auto visit_boundary = [&](int i, int j) {
        rep.worst_boundary_gap = std::min(rep.worst_boundary_gap, upper(i, j) - u(i, j));
    };
    for (int i = i_lo; i <= i_hi; ++i) visit_boundary(i, j0);
    for (int j = j0; j <= j1; ++j) {
        visit_boundary(i_lo, j);
        visit_boundary(i_hi, j);
    }
    rep.domination_ok = rep.worst_boundary_gap >= -tol;

    double lower_gap = std::numeric_limits<double>::infinity();
    for (int i = i_lo; i <= i_hi; ++i) lower_gap = std::min(lower_gap, u(i, j0) - lower(i, j0));
    for (int j = j0; j <= j1; ++j) {
        lower_gap = std::min(lower_gap, u(i_lo, j) - lower(i_lo, j));
        lower_gap = std::min(lower_gap, u(i_hi, j) - lower(i_hi, j));
    }
    rep.lower_domination_ok = lower_gap >= -tol;

    if (!rep.domination_ok || !rep.lower_domination_ok) return rep;

    for (int j = j0 + 1; j <= j1; ++j)
        for (int i = i_lo + 1; i < i_hi; ++i) {
            rep.interior_max_violation =
                std::max(rep.interior_max_violation, u(i, j) - upper(i, j));
            rep.lower_interior_max_violation =
                std::max(rep.lower_interior_max_violation, lower(i, j) - u(i, j));
        }

    rep.bound = eval_upper(rep.spec, cx, g.t(j1)) - rep.spec.u0;
    rep.measured = u(x0_node, j1) - u(x0_node, j0);
    rep.measured_lower = -rep.measured;
    rep.ok = rep.interior_max_violation <= tol && rep.measured <= rep.bound + tol;
    rep.lower_ok =
        rep.lower_interior_max_violation <= tol && rep.measured_lower <= rep.bound + tol;
    return rep;
}

}  // namespace trudinger
