#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "trudinger/pde.hpp"

using namespace trudinger;

namespace {

std::vector<double> sample_space(const SpaceTimeGrid& g, double (*f)(double)) {
    std::vector<double> v(static_cast<size_t>(g.nx));
    for (int i = 0; i < g.nx; ++i) v[static_cast<size_t>(i)] = f(g.x(i));
    return v;
}

GridFunction bump_testfn(const SpaceTimeGrid& g) {
    // Product of squared sines, zeroed on the boundary nodes by index.
    std::vector<double> v(static_cast<size_t>(g.size()), 0.0);
    for (int j = 1; j + 1 < g.nt; ++j)
        for (int i = 1; i + 1 < g.nx; ++i) {
            const double sx = std::sin(M_PI * (g.x(i) - g.x_min) / (g.x_max - g.x_min));
            const double st = std::sin(M_PI * (g.t(j) - g.t_min) / (g.t_max - g.t_min));
            v[static_cast<size_t>(j) * g.nx + i] = sx * sx * st * st;
        }
    return GridFunction(g, std::move(v));
}

}  // namespace

TEST_CASE("params: q rule and delta defaults") {
    const Params p3 = Params::make(3.0, 1.0, 2.0);
    CHECK(p3.q == 2.0);
    CHECK(p3.resolved_delta(0.1) == 0.0);

    const Params p15 = Params::make(1.5, 1.0, 2.0);
    CHECK(p15.q > 1.5 / 0.5);
    CHECK(p15.resolved_delta(0.1) == doctest::Approx(0.01));

    Params bad = p3;
    bad.q = 3.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = p15;
    bad.q = 2.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = p3;
    bad.m = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("p-laplacian stencil: linear data gives zero flux divergence") {
    SpaceTimeGrid g{0.0, 1.0, 0.0, 1.0, 41, 2};
    const auto u = sample_space(g, [](double x) { return 1.0 + 0.5 * x; });
    for (double p : {1.5, 2.0, 3.0, 4.0}) {
        Params prm = Params::make(p, 0.5, 2.0);
        prm.delta_reg = 0.0;
        const auto lap = p_laplacian(u, prm, g.dx());
        for (int i = 1; i + 1 < g.nx; ++i)
            CHECK(std::abs(lap[static_cast<size_t>(i)]) <= 1e-11);
    }
    CHECK_THROWS_AS(p_laplacian(std::vector<double>{1.0, 2.0}, Params::make(2, 1, 2), 0.1),
                    std::invalid_argument);
}

TEST_CASE("p-laplacian stencil: quadratic exactness at p = 2") {
    SpaceTimeGrid g{0.0, 1.0, 0.0, 1.0, 21, 2};
    const auto u = sample_space(g, [](double x) { return x * x; });
    const auto lap = p_laplacian(u, Params::make(2.0, 0.1, 2.0), g.dx());
    for (int i = 1; i + 1 < g.nx; ++i)
        CHECK(lap[static_cast<size_t>(i)] == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("p-laplacian stencil against the symbolic p = 3 oracle") {
    // For u = x^2 with x > 0: d/dx(|2x| 2x) = 8x. The midpoint flux makes the
    // stencil exact on this profile up to rounding.
    SpaceTimeGrid g{0.5, 1.5, 0.0, 1.0, 51, 2};
    const auto u = sample_space(g, [](double x) { return x * x; });
    Params prm = Params::make(3.0, 0.1, 3.0);
    prm.delta_reg = 0.0;
    const auto lap = p_laplacian(u, prm, g.dx());
    for (int i = 1; i + 1 < g.nx; ++i)
        CHECK(lap[static_cast<size_t>(i)] ==
              doctest::Approx(8.0 * g.x(i)).epsilon(1e-9));
}

TEST_CASE("implicit step: constants are fixed points for every p") {
    SpaceTimeGrid g{0.0, 1.0, 0.0, 1.0, 31, 2};
    const std::vector<double> u0(31, 2.5);
    for (double p : {1.5, 2.0, 3.0, 4.0}) {
        const auto u1 = step_implicit(u0, 0.05, Params::make(p, 1.0, 3.0), {2.5, 2.5},
                                      SolverConfig{}, g.dx());
        for (double v : u1) CHECK(v == doctest::Approx(2.5).epsilon(1e-14));
    }
}

TEST_CASE("implicit step: positive linear profiles are stationary") {
    SpaceTimeGrid g{0.0, 1.0, 0.0, 1.0, 31, 2};
    const auto u0 = sample_space(g, [](double x) { return 1.0 + 0.5 * x; });
    for (double p : {1.5, 2.0, 3.0, 4.0}) {
        const auto u1 = step_implicit(u0, 0.02, Params::make(p, 0.5, 2.0),
                                      {u0.front(), u0.back()}, SolverConfig{}, g.dx());
        for (int i = 0; i < g.nx; ++i)
            CHECK(u1[static_cast<size_t>(i)] ==
                  doctest::Approx(u0[static_cast<size_t>(i)]).epsilon(1e-13));
    }
}

TEST_CASE("implicit step against the closed-form heat flow") {
    SpaceTimeGrid g{0.0, 1.0, 0.0, 1.0, 101, 2};
    const auto u0 = sample_space(g, [](double x) { return 2.0 + std::sin(M_PI * x); });
    const double dt = 1e-3;
    const auto u1 =
        step_implicit(u0, dt, Params::make(2.0, 1.0, 3.0), {2.0, 2.0}, SolverConfig{}, g.dx());
    const double decay = std::exp(-M_PI * M_PI * dt);
    double err = 0.0;
    for (int i = 0; i < g.nx; ++i)
        err = std::max(err, std::abs(u1[static_cast<size_t>(i)] -
                                     (2.0 + decay * std::sin(M_PI * g.x(i)))));
    // Backward Euler: O(dt^2 + dt dx^2) per step.
    CHECK(err <= 100.0 * (dt * dt + dt * g.dx() * g.dx()));
}

TEST_CASE("step errors: bad data and exhausted iterations") {
    SpaceTimeGrid g{0.0, 1.0, 0.0, 1.0, 11, 2};
    std::vector<double> u0(11, 1.0);
    u0[5] = -0.5;
    CHECK_THROWS_AS(step_implicit(u0, 0.01, Params::make(2, 1, 2), {1.0, 1.0},
                                  SolverConfig{}, g.dx()),
                    std::invalid_argument);

    SolverConfig strict;
    strict.newton_max_iter = 1;
    strict.newton_tol = 1e-14;
    SpaceTimeGrid g2{0.0, 1.0, 0.0, 1.0, 41, 2};
    const auto kink = sample_space(g2, [](double x) { return 1.0 + std::abs(x - 0.5); });
    CHECK_THROWS_AS(step_implicit(kink, 0.5, Params::make(4.0, 1.0, 2.0),
                                  {kink.front(), kink.back()}, strict, g2.dx()),
                    NewtonError);
    try {
        step_implicit(kink, 0.5, Params::make(4.0, 1.0, 2.0), {kink.front(), kink.back()},
                      strict, g2.dx());
    } catch (const NewtonError& e) {
        CHECK(e.residual > strict.newton_tol);
    }
}

TEST_CASE("solve: constant and linear fields, iteration log") {
    SpaceTimeGrid g{0.0, 1.0, 0.0, 0.2, 31, 11};
    const std::vector<double> c0(31, 2.0);
    const auto constant =
        solve(c0, DirichletBc::constant(2.0, 2.0), g, Params::make(3.0, 1.0, 3.0),
              SolverConfig{});
    CHECK(constant.newton_iters.size() == 10);
    for (int j = 0; j < g.nt; ++j)
        for (int i = 0; i < g.nx; ++i)
            CHECK(constant.u(i, j) == doctest::Approx(2.0).epsilon(1e-14));

    const auto line = sample_space(g, [](double x) { return 1.0 + x; });
    for (double p : {1.5, 3.0}) {
        const auto res = solve(line, DirichletBc::constant(line.front(), line.back()), g,
                               Params::make(p, 1.0, 2.0), SolverConfig{});
        for (int j = 0; j < g.nt; ++j)
            for (int i = 0; i < g.nx; ++i)
                CHECK(res.u(i, j) ==
                      doctest::Approx(line[static_cast<size_t>(i)]).epsilon(1e-12));
        CHECK(res.max_residual <= SolverConfig{}.newton_tol);
    }
}

TEST_CASE("solve: manufactured heat solution converges") {
    SpaceTimeGrid g{0.0, 1.0, 0.0, 0.1, 51, 251};
    const auto u0 = sample_space(g, [](double x) { return 2.0 + std::sin(M_PI * x); });
    const auto res = solve(u0, DirichletBc::constant(2.0, 2.0), g,
                           Params::make(2.0, 1.0, 3.0), SolverConfig{});
    double err = 0.0;
    for (int i = 0; i < g.nx; ++i)
        err = std::max(err, std::abs(res.u(i, g.nt - 1) -
                                     (2.0 + std::exp(-M_PI * M_PI * 0.1) *
                                                std::sin(M_PI * g.x(i)))));
    CHECK(err <= 2e-3);
}

TEST_CASE("solve rejects data leaving [m, M]") {
    SpaceTimeGrid g{0.0, 1.0, 0.0, 0.1, 11, 5};
    const std::vector<double> too_high(11, 3.5);
    CHECK_THROWS_AS(solve(too_high, DirichletBc::constant(3.5, 3.5), g,
                          Params::make(2.0, 1.0, 3.0), SolverConfig{}),
                    std::invalid_argument);
    const std::vector<double> fine(11, 2.0);
    CHECK_THROWS_AS(solve(fine, DirichletBc::constant(0.5, 2.0), g,
                          Params::make(2.0, 1.0, 3.0), SolverConfig{}),
                    std::invalid_argument);
}

TEST_CASE("solve propagates step failures with the time index") {
    SpaceTimeGrid g{0.0, 1.0, 0.0, 1.0, 41, 3};
    const auto kink = sample_space(g, [](double x) { return 1.0 + std::abs(x - 0.5); });
    SolverConfig strict;
    strict.newton_max_iter = 1;
    strict.newton_tol = 1e-14;
    try {
        solve(kink, DirichletBc::constant(kink.front(), kink.back()), g,
              Params::make(4.0, 1.0, 2.0), strict);
        FAIL("expected NewtonError");
    } catch (const NewtonError& e) {
        CHECK(e.time_index == 1);
    }
}

TEST_CASE("discrete maximum principle on random positive data") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> dist(1.0, 3.0);
    SpaceTimeGrid g{0.0, 1.0, 0.0, 0.1, 41, 21};
    for (double p : {1.5, 3.0}) {
        std::vector<double> u0(static_cast<size_t>(g.nx));
        for (double& v : u0) v = dist(rng);
        const double lo = *std::min_element(u0.begin(), u0.end());
        const double hi = *std::max_element(u0.begin(), u0.end());
        const auto res = solve(u0, DirichletBc::constant(u0.front(), u0.back()), g,
                               Params::make(p, 1.0, 3.0), SolverConfig{});
        const double slack = 10.0 * SolverConfig{}.newton_tol;
        CHECK(res.u.min_value() >= lo - slack);
        CHECK(res.u.max_value() <= hi + slack);
    }
}

TEST_CASE("order preservation for ordered data pairs") {
    SpaceTimeGrid g{0.0, 1.0, 0.0, 0.1, 41, 21};
    const auto lo_data = sample_space(g, [](double x) { return 2.0 + std::abs(x - 0.4); });
    auto hi_data = lo_data;
    for (double& v : hi_data) v += 0.1;
    const Params prm = Params::make(3.0, 1.0, 3.0);
    const auto lo_res =
        solve(lo_data, DirichletBc::constant(lo_data.front(), lo_data.back()), g, prm,
              SolverConfig{});
    const auto hi_res =
        solve(hi_data, DirichletBc::constant(hi_data.front(), hi_data.back()), g, prm,
              SolverConfig{});
    const auto rep = comparison_check(lo_res.u, hi_res.u);
    CHECK(rep.max_violation <= 10.0 * SolverConfig{}.newton_tol);
}

TEST_CASE("conservation surrogate: interior w-mass change telescopes to the fluxes") {
    // Even-symmetric data about the midpoint; the identity below is exact for
    // the scheme up to Newton residuals.
    SpaceTimeGrid g{0.0, 1.0, 0.0, 0.05, 41, 6};
    const auto u0 = sample_space(g, [](double x) {
        const double r = std::abs(x - 0.5);
        return 2.0 + std::cos(M_PI * r);
    });
    const Params prm = Params::make(3.0, 0.5, 3.5);
    const SolverConfig cfg;
    const auto res = solve(u0, DirichletBc::constant(u0.front(), u0.back()), g, prm, cfg);

    const double dx = g.dx(), dt = g.dt();
    const double delta = prm.resolved_delta(dx);
    auto flux = [&](double s) {
        return (s == 0.0 && delta == 0.0) ? 0.0
                                          : std::pow(delta + s * s, 0.5 * (prm.p - 2.0)) * s;
    };
    for (int j = 1; j < g.nt; ++j) {
        double change = 0.0;
        for (int i = 1; i + 1 < g.nx; ++i)
            change += (std::pow(res.u(i, j), prm.p - 1.0) -
                       std::pow(res.u(i, j - 1), prm.p - 1.0)) *
                      dx;
        const double f_left = flux((res.u(1, j) - res.u(0, j)) / dx);
        const double f_right = flux((res.u(g.nx - 1, j) - res.u(g.nx - 2, j)) / dx);
        const double boundary_term = dt * (f_right - f_left);
        CHECK(std::abs(change - boundary_term) <=
              g.nx * dx * 2.0 * cfg.newton_tol + 1e-12);
    }
}

TEST_CASE("p = 2 newton system is exactly the backward-Euler heat matrix") {
    SpaceTimeGrid g{0.0, 1.0, 0.0, 1.0, 21, 2};
    const auto u = sample_space(g, [](double x) { return 2.0 + 0.3 * std::sin(3.0 * x); });
    const double dt = 0.01;
    Params prm = Params::make(2.0, 1.0, 3.0);
    const auto sys = newton_system(u, u, dt, g.dx(), prm);
    const double r = dt / (g.dx() * g.dx());
    for (size_t k = 0; k < sys.diag.size(); ++k) {
        CHECK(sys.diag[k] == 1.0 + 2.0 * r);
        CHECK(sys.lower[k] == -r);
        CHECK(sys.upper[k] == -r);
    }
}

TEST_CASE("weak residual: constants annihilate every admissible test function") {
    SpaceTimeGrid g{0.0, 1.0, 0.0, 1.0, 21, 21};
    const auto u = GridFunction::sampled(g, [](double, double) { return 2.0; });
    const auto phi = bump_testfn(g);
    for (double p : {1.5, 2.0, 3.0})
        CHECK(std::abs(weak_residual(u, phi, Params::make(p, 1.0, 3.0))) <= 1e-11);
}

TEST_CASE("weak residual vanishes under refinement for solver output") {
    // dt proportional to dx^2 so both error components refine together.
    const Params prm = Params::make(2.0, 1.0, 3.0);
    const int nxs[] = {21, 41, 81};
    const int nts[] = {101, 401, 1601};
    std::vector<double> hs, rs;
    for (int level = 0; level < 3; ++level) {
        SpaceTimeGrid g{0.0, 1.0, 0.0, 0.1, nxs[level], nts[level]};
        std::vector<double> u0(static_cast<size_t>(g.nx));
        for (int i = 0; i < g.nx; ++i)
            u0[static_cast<size_t>(i)] = 2.0 + std::sin(M_PI * g.x(i));
        const auto res = solve(u0, DirichletBc::constant(2.0, 2.0), g, prm, SolverConfig{});
        rs.push_back(std::abs(weak_residual(res.u, bump_testfn(g), prm)));
        hs.push_back(g.dx());
    }
    CHECK(rs[1] < rs[0]);
    CHECK(rs[2] < rs[1]);
    const double slope = std::log(rs[0] / rs[2]) / std::log(hs[0] / hs[2]);
    CHECK(slope >= 1.5);
    CHECK(slope <= 2.6);
}

TEST_CASE("weak residual rejects test functions touching the boundary") {
    SpaceTimeGrid g{0.0, 1.0, 0.0, 1.0, 11, 11};
    const auto u = GridFunction::sampled(g, [](double, double) { return 2.0; });
    const auto bad = GridFunction::sampled(g, [](double, double) { return 1.0; });
    CHECK_THROWS_AS(weak_residual(u, bad, Params::make(2, 1, 3)), std::invalid_argument);
}

TEST_CASE("comparison check: identical fields, violations, boundary errors") {
    SpaceTimeGrid g{0.0, 1.0, 0.0, 1.0, 11, 11};
    const auto u = GridFunction::sampled(g, [](double x, double t) { return 2.0 + x * t; });
    const auto rep = comparison_check(u, u);
    CHECK(rep.max_violation == 0.0);
    CHECK(rep.i == -1);

    // Interior bump in u above v: reported with its first node.
    auto vals = std::vector<double>(u.values().begin(), u.values().end());
    vals[5 * 11 + 5] += 0.5;
    const GridFunction bumped(g, vals);
    const auto rep2 = comparison_check(bumped, u);
    CHECK(rep2.max_violation == doctest::Approx(0.5));
    CHECK(rep2.i == 5);
    CHECK(rep2.j == 5);

    // Ordering violated on the bottom slice.
    auto bad = std::vector<double>(u.values().begin(), u.values().end());
    bad[3] += 1.0;
    CHECK_THROWS_AS(comparison_check(GridFunction(g, bad), u), std::invalid_argument);
}
