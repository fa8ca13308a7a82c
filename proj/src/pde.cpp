#include "trudinger/pde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "trudinger/num.hpp"

namespace trudinger {

Params Params::make(double p, double m, double M) {
    Params prm;
    prm.p = p;
    prm.q = p >= 2.0 ? 2.0 : p / (p - 1.0) + 1.0;
    prm.m = m;
    prm.M = M;
    prm.validate();
    return prm;
}

void Params::validate() const {
    if (!(p > 1.0)) throw std::invalid_argument("p must exceed 1");
    if (p >= 2.0) {
        if (q != 2.0) throw std::invalid_argument("q must equal 2 for p >= 2");
    } else if (!(q > p / (p - 1.0))) {
        throw std::invalid_argument("q must exceed p/(p-1) for 1 < p < 2");
    }
    if (!(m > 0.0) || !(M >= m)) throw std::invalid_argument("need 0 < m <= M");
}

double Params::resolved_delta(double dx) const {
    if (delta_reg >= 0.0) return delta_reg;
    return p >= 2.0 ? 0.0 : dx * dx;
}

void SolverConfig::validate() const {
    if (!(newton_tol > 0.0)) throw std::invalid_argument("newton_tol must be positive");
    if (newton_max_iter < 1) throw std::invalid_argument("newton_max_iter must be >= 1");
    if (!(damping > 0.0) || damping > 1.0)
        throw std::invalid_argument("damping must lie in (0, 1]");
}

namespace {

// flux(s) = (delta + s^2)^{(p-2)/2} s and its derivative
// (delta + s^2)^{(p-4)/2} (delta + (p-1) s^2).
inline double flux(double s, double p, double delta) {
    if (s == 0.0 && delta == 0.0) return 0.0;
    return std::pow(delta + s * s, 0.5 * (p - 2.0)) * s;
}

inline double flux_deriv(double s, double p, double delta) {
    const double a = delta + s * s;
    if (a == 0.0) return 0.0;  // p > 2 limit; p < 2 always runs with delta > 0
    // Written so the p = 2 case collapses to exactly 1.
    return std::pow(a, 0.5 * (p - 2.0)) * ((delta + (p - 1.0) * s * s) / a);
}

inline double inf_norm(std::span<const double> v) {
    double n = 0.0;
    for (double x : v) n = std::max(n, std::abs(x));
    return n;
}

// Thomas solve, in place on copies.
std::vector<double> solve_tridiagonal(std::vector<double> lower, std::vector<double> diag,
                                      std::vector<double> upper, std::vector<double> rhs) {
    const size_t n = diag.size();
    for (size_t k = 1; k < n; ++k) {
        const double w = lower[k] / diag[k - 1];
        diag[k] -= w * upper[k - 1];
        rhs[k] -= w * rhs[k - 1];
    }
    std::vector<double> x(n);
    x[n - 1] = rhs[n - 1] / diag[n - 1];
    for (size_t k = n - 1; k-- > 0;) x[k] = (rhs[k] - upper[k] * x[k + 1]) / diag[k];
    return x;
}

}  // namespace

std::vector<double> p_laplacian(std::span<const double> u, const Params& params,
                                double dx) {
    if (u.size() < 3) throw std::invalid_argument("slice needs >= 3 nodes");
    const double delta = params.resolved_delta(dx);
    const size_t n = u.size();
    std::vector<double> out(n, 0.0);
    double f_left = flux((u[1] - u[0]) / dx, params.p, delta);
    for (size_t i = 1; i + 1 < n; ++i) {
        const double f_right = flux((u[i + 1] - u[i]) / dx, params.p, delta);
        out[i] = (f_right - f_left) / dx;
        f_left = f_right;
    }
    return out;
}

NewtonSystem newton_system(std::span<const double> w, std::span<const double> w_prev,
                           double dt, double dx, const Params& params) {
    const int n = static_cast<int>(w.size());
    if (n < 3) throw std::invalid_argument("slice needs >= 3 nodes");
    const double p = params.p;
    const double delta = params.resolved_delta(dx);
    const double r = dt / (dx * dx);
    const double inv_pm1 = 1.0 / (p - 1.0);

    NewtonSystem sys;
    sys.lower.assign(n - 2, 0.0);
    sys.diag.assign(n - 2, 0.0);
    sys.upper.assign(n - 2, 0.0);
    sys.residual.assign(n - 2, 0.0);

    std::vector<double> u(n), dudw(n);
    for (int i = 0; i < n; ++i) {
        u[i] = std::pow(w[i], inv_pm1);
        dudw[i] = inv_pm1 * std::pow(w[i], inv_pm1 - 1.0);
    }
    for (int i = 1; i + 1 < n; ++i) {
        const double sl = (u[i] - u[i - 1]) / dx;
        const double sr = (u[i + 1] - u[i]) / dx;
        const int k = i - 1;
        sys.residual[k] = w[i] - w_prev[i] - (dt / dx) * (flux(sr, p, delta) - flux(sl, p, delta));
        const double gl = flux_deriv(sl, p, delta);
        const double gr = flux_deriv(sr, p, delta);
        sys.lower[k] = -r * gl * dudw[i - 1];
        sys.diag[k] = 1.0 + r * (gl + gr) * dudw[i];
        sys.upper[k] = -r * gr * dudw[i + 1];
    }
    return sys;
}

namespace {

struct StepStats {
    int iters = 0;
    double residual = 0.0;
};

}  // namespace

static std::vector<double> step_implicit_impl(std::span<const double> u_n, double dt,
                                              const Params& params,
                                              std::pair<double, double> bc,
                                              const SolverConfig& config, double dx,
                                              StepStats& stats) {
    params.validate();
    config.validate();
    const int n = static_cast<int>(u_n.size());
    if (n < 3) throw std::invalid_argument("slice needs >= 3 nodes");
    if (!(dt > 0.0) || !(dx > 0.0)) throw std::invalid_argument("need dt, dx > 0");
    for (double v : u_n)
        if (!(v > 0.0)) throw std::invalid_argument("step_implicit needs strictly positive data");
    if (!(bc.first > 0.0) || !(bc.second > 0.0))
        throw std::invalid_argument("step_implicit needs strictly positive boundary values");

    const double p = params.p;
    double data_lo = std::min(bc.first, bc.second);
    double data_hi = std::max(bc.first, bc.second);
    for (double v : u_n) {
        data_lo = std::min(data_lo, v);
        data_hi = std::max(data_hi, v);
    }
    const double w_lo = std::pow(data_lo, p - 1.0);
    const double w_hi = std::pow(data_hi, p - 1.0);

    std::vector<double> w_prev(n), w(n);
    for (int i = 0; i < n; ++i) w_prev[i] = std::pow(u_n[i], p - 1.0);
    w = w_prev;
    w[0] = std::pow(bc.first, p - 1.0);
    w[n - 1] = std::pow(bc.second, p - 1.0);
    w_prev[0] = w[0];
    w_prev[n - 1] = w[n - 1];

    auto guard_positivity = [&](std::vector<double>& cand) {
        for (int i = 1; i + 1 < n; ++i) {
            if (config.clip_to_bounds) {
                cand[i] = std::clamp(cand[i], w_lo, w_hi);
            } else if (!(cand[i] > 0.0)) {
                throw NewtonError("positivity lost", std::numeric_limits<double>::quiet_NaN(), -1);
            }
        }
    };

    NewtonSystem sys = newton_system(w, w_prev, dt, dx, params);
    double res_norm = inf_norm(sys.residual);
    stats.iters = 0;
    for (int it = 0; it < config.newton_max_iter && res_norm > config.newton_tol; ++it) {
        ++stats.iters;
        const auto dw = solve_tridiagonal(sys.lower, sys.diag, sys.upper, sys.residual);
        double lambda = config.damping;
        std::vector<double> w_try;
        NewtonSystem sys_try;
        double res_try = std::numeric_limits<double>::infinity();
        for (int back = 0; back < 40; ++back) {
            w_try = w;
            for (int i = 1; i + 1 < n; ++i) w_try[i] -= lambda * dw[i - 1];
            guard_positivity(w_try);
            sys_try = newton_system(w_try, w_prev, dt, dx, params);
            res_try = inf_norm(sys_try.residual);
            if (res_try < res_norm || res_try <= config.newton_tol) break;
            lambda *= 0.5;
        }
        if (res_try >= res_norm && res_try > config.newton_tol) {
            throw NewtonError("Newton stalled, residual " + format_double(res_try),
                              res_try, -1);
        }
        w = std::move(w_try);
        sys = std::move(sys_try);
        res_norm = res_try;
    }
    if (res_norm > config.newton_tol)
        throw NewtonError("Newton did not converge, residual " + format_double(res_norm),
                          res_norm, -1);
    stats.residual = res_norm;

    std::vector<double> u_next(n);
    const double inv_pm1 = 1.0 / (p - 1.0);
    for (int i = 0; i < n; ++i) u_next[i] = std::pow(w[i], inv_pm1);
    u_next[0] = bc.first;
    u_next[n - 1] = bc.second;
    for (double v : u_next)
        if (!(v > 0.0)) throw NewtonError("positivity lost", res_norm, -1);
    return u_next;
}

std::vector<double> step_implicit(std::span<const double> u_n, double dt,
                                  const Params& params, std::pair<double, double> bc,
                                  const SolverConfig& config, double dx) {
    StepStats stats;
    return step_implicit_impl(u_n, dt, params, bc, config, dx, stats);
}

SolveResult solve(std::span<const double> u0, const DirichletBc& bc,
                  const SpaceTimeGrid& grid, const Params& params,
                  const SolverConfig& config) {
    grid.validate();
    params.validate();
    if (static_cast<int>(u0.size()) != grid.nx)
        throw std::invalid_argument("u0 size does not match grid");
    const double range_slack = 1e-12 * (1.0 + params.M);
    auto in_range = [&](double v) {
        return v >= params.m - range_slack && v <= params.M + range_slack;
    };
    for (double v : u0)
        if (!in_range(v)) throw std::invalid_argument("initial data leaves [m, M]");
    for (int j = 0; j < grid.nt; ++j)
        if (!in_range(bc.left(grid.t(j))) || !in_range(bc.right(grid.t(j))))
            throw std::invalid_argument("boundary values leave [m, M]");

    std::vector<double> values;
    values.reserve(static_cast<size_t>(grid.size()));
    std::vector<double> cur(u0.begin(), u0.end());
    cur[0] = bc.left(grid.t(0));
    cur[grid.nx - 1] = bc.right(grid.t(0));
    values.insert(values.end(), cur.begin(), cur.end());

    std::vector<int> iters;
    iters.reserve(static_cast<size_t>(grid.nt - 1));
    double max_res = 0.0;
    for (int j = 1; j < grid.nt; ++j) {
        const double t_next = grid.t(j);
        StepStats stats;
        std::vector<double> next;
        try {
            next = step_implicit_impl(cur, grid.dt(), params,
                                      {bc.left(t_next), bc.right(t_next)}, config,
                                      grid.dx(), stats);
        } catch (const NewtonError& e) {
            throw NewtonError(std::string(e.what()) + " at time index " + std::to_string(j),
                              e.residual, j);
        }
        values.insert(values.end(), next.begin(), next.end());
        cur = std::move(next);
        iters.push_back(stats.iters);
        max_res = std::max(max_res, stats.residual);
    }
    GridFunction u(grid, std::move(values));
    return {std::move(u), std::move(iters), max_res};
}

double weak_residual(const GridFunction& u, const GridFunction& testfn,
                     const Params& params) {
    const SpaceTimeGrid& g = u.grid();
    if (!(testfn.grid() == g)) throw std::invalid_argument("test function grid mismatch");
    for (int i = 0; i < g.nx; ++i)
        if (testfn(i, 0) != 0.0 || testfn(i, g.nt - 1) != 0.0)
            throw std::invalid_argument("test function must vanish on the first and last slice");
    for (int j = 0; j < g.nt; ++j)
        if (testfn(0, j) != 0.0 || testfn(g.nx - 1, j) != 0.0)
            throw std::invalid_argument("test function must vanish at the space endpoints");

    const double dx = g.dx(), dt = g.dt();
    const double p = params.p;
    const double delta = params.resolved_delta(dx);
    double sum = 0.0;
    for (int j = 0; j < g.nt; ++j) {
        const double wj = (j == 0 || j == g.nt - 1) ? 0.5 : 1.0;
        for (int i = 0; i < g.nx; ++i) {
            const double wi = (i == 0 || i == g.nx - 1) ? 0.5 : 1.0;
            double dphidt;
            if (j == 0)
                dphidt = (testfn(i, 1) - testfn(i, 0)) / dt;
            else if (j == g.nt - 1)
                dphidt = (testfn(i, j) - testfn(i, j - 1)) / dt;
            else
                dphidt = (testfn(i, j + 1) - testfn(i, j - 1)) / (2.0 * dt);
            double dphidx;
            if (i == 0)
                dphidx = (testfn(1, j) - testfn(0, j)) / dx;
            else if (i == g.nx - 1)
                dphidx = (testfn(i, j) - testfn(i - 1, j)) / dx;
            else
                dphidx = (testfn(i + 1, j) - testfn(i - 1, j)) / (2.0 * dx);
            const double du =
                i + 1 < g.nx ? (u(i + 1, j) - u(i, j)) / dx : (u(i, j) - u(i - 1, j)) / dx;
            const double term =
                -std::pow(u(i, j), p - 1.0) * dphidt + flux(du, p, delta) * dphidx;
            sum += wi * wj * term;
        }
    }
    return sum * dx * dt;
}

ComparisonReport comparison_check(const GridFunction& u, const GridFunction& v) {
    const SpaceTimeGrid& g = u.grid();
    if (!(v.grid() == g)) throw std::invalid_argument("comparison_check needs a common grid");
    const double slack =
        1e-12 * (1.0 + std::max(std::abs(u.max_value()), std::abs(v.max_value())));
    auto on_parabolic_boundary = [&](int i, int j) {
        return j == 0 || i == 0 || i == g.nx - 1;
    };
    for (int j = 0; j < g.nt; ++j)
        for (int i = 0; i < g.nx; ++i)
            if (on_parabolic_boundary(i, j) && u(i, j) > v(i, j) + slack)
                throw std::invalid_argument(
                    "boundary ordering violated at node (i=" + std::to_string(i) +
                    ", j=" + std::to_string(j) + ")");

    ComparisonReport rep;
    for (int j = 1; j < g.nt; ++j)
        for (int i = 1; i + 1 < g.nx; ++i) {
            const double excess = u(i, j) - v(i, j);
            if (excess > rep.max_violation) {
                rep.max_violation = excess;
                rep.i = i;
                rep.j = j;
            }
        }
    return rep;
}

}  // namespace trudinger
