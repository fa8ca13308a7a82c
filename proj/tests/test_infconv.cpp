#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "trudinger/energy.hpp"
#include "trudinger/infconv.hpp"
#include "trudinger/pde.hpp"

using namespace trudinger;

namespace {

// Closed-form envelope of |x| under the quadratic penalty.
double huber(double x, double eps) {
    return std::abs(x) <= eps ? x * x / (2.0 * eps) : std::abs(x) - 0.5 * eps;
}

GridFunction kink_field(int nx, int nt) {
    SpaceTimeGrid g{0.0, 1.0, 0.0, 1.0, nx, nt};
    return GridFunction::sampled(g,
                                 [](double x, double) { return 2.0 + std::abs(x - 0.5); });
}

int node_at(const SpaceTimeGrid& g, double x, bool space) {
    const double h = space ? g.dx() : g.dt();
    const double lo = space ? g.x_min : g.t_min;
    return static_cast<int>(std::lround((x - lo) / h));
}

double reconstruction_gap(const GridFunction& u, const InfConvResult& res) {
    const SpaceTimeGrid& g = u.grid();
    double worst = 0.0;
    for (int j = 0; j < g.nt; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const size_t k = res.idx(i, j);
            const int iy = node_at(g, res.argmin_x[k], true);
            const int js = node_at(g, res.argmin_t[k], false);
            const double rebuilt = u(iy, js) + res.penalty_space[k] + res.penalty_time[k];
            worst = std::max(worst, std::abs(res.u_eps(i, j) - rebuilt) /
                                        (1.0 + std::abs(res.u_eps(i, j))));
        }
    return worst;
}

}  // namespace

TEST_CASE("delta rule evaluates the inverse-modulus formula") {
    const auto id = ModulusOfContinuity::identity(10.0);
    for (double eps : {0.5, 0.25, 0.125}) {
        CHECK(delta_from_modulus(id, eps, 2.0, 0.5) ==
              doctest::Approx(eps * eps).epsilon(1e-14));
        CHECK(delta_from_modulus(id, eps, 3.0, 0.5) ==
              doctest::Approx(std::pow(eps, 4)).epsilon(1e-13));
    }
    const auto twice = ModulusOfContinuity::linear(2.0, 10.0);
    CHECK(delta_from_modulus(twice, 0.25, 2.0, 1.0) ==
          doctest::Approx(0.25 * 0.25 / 8.0).epsilon(1e-14));

    CHECK_THROWS_WITH_AS(delta_from_modulus(ModulusOfContinuity::identity(0.1), 0.5, 2.0, 1.0),
                         "epsilon too large for modulus", std::invalid_argument);
    CHECK_THROWS_AS(delta_from_modulus(ModulusOfContinuity::zero(1.0), 0.1, 2.0, 1.0),
                    std::invalid_argument);
}

TEST_CASE("inf-convolution of a constant is the constant") {
    SpaceTimeGrid g{0.0, 1.0, 0.0, 1.0, 21, 11};
    const auto u = GridFunction::sampled(g, [](double, double) { return 5.0; });
    const auto res = inf_convolve(u, {0.1, 0.01, 2.0});
    for (int j = 0; j < g.nt; ++j)
        for (int i = 0; i < g.nx; ++i) {
            CHECK(res.u_eps(i, j) == 5.0);
            CHECK(res.argmin_x[res.idx(i, j)] == g.x(i));
            CHECK(res.argmin_t[res.idx(i, j)] == g.t(j));
            CHECK(res.penalty_space[res.idx(i, j)] == 0.0);
            CHECK(res.penalty_time[res.idx(i, j)] == 0.0);
        }
}

TEST_CASE("space-only quadratic envelope matches Huber and a fine-grid oracle") {
    SpaceTimeGrid g{-1.0, 1.0, 0.0, 1.0, 201, 3};
    const auto u = GridFunction::sampled(g, [](double x, double) { return std::abs(x); });
    for (double eps : {0.1, 0.2}) {
        const auto res = inf_convolve(u, {eps, 1e12, 2.0});
        const int j = 1;
        for (int i = 0; i < g.nx; ++i) {
            const double x = g.x(i);
            // Brute-force oracle on a 10x finer candidate grid.
            double oracle = std::numeric_limits<double>::infinity();
            const int fine = 10 * (g.nx - 1);
            for (int k = 0; k <= fine; ++k) {
                const double y = -1.0 + 2.0 * k / fine;
                oracle = std::min(oracle, std::abs(y) + (y - x) * (y - x) / (2.0 * eps));
            }
            CHECK(res.u_eps(i, j) >= oracle - 1e-12);
            CHECK(std::abs(res.u_eps(i, j) - oracle) <= g.dx());
            CHECK(std::abs(res.u_eps(i, j) - huber(x, eps)) <= g.dx());
        }
    }
}

TEST_CASE("epsilon below the grid resolution is rejected") {
    const auto u = kink_field(11, 5);  // dx = 0.1, osc = 0.5
    // r(eps) = sqrt(2 eps osc) < dx needs eps < dx^2 / (2 osc) = 0.01.
    CHECK_THROWS_WITH_AS(inf_convolve(u, {0.005, 1e-4, 2.0}),
                         "epsilon below grid resolution", std::invalid_argument);
}

TEST_CASE("u_eps stays below u and rebuilds exactly on random fields") {
    std::mt19937_64 rng(411);
    std::uniform_real_distribution<double> dist(1.0, 3.0);
    for (int trial = 0; trial < 10; ++trial) {
        SpaceTimeGrid g{0.0, 1.0, 0.0, 0.5, 31, 11};
        std::vector<double> v(static_cast<size_t>(g.size()));
        for (double& x : v) x = dist(rng);
        const GridFunction u(g, std::move(v));
        const auto res = inf_convolve(u, {0.3, 0.05, 2.0});
        for (int j = 0; j < g.nt; ++j)
            for (int i = 0; i < g.nx; ++i) CHECK(res.u_eps(i, j) <= u(i, j) + 1e-12);
        CHECK(reconstruction_gap(u, res) <= 1e-14);
    }
}

TEST_CASE("monotone in epsilon and convergent along a dyadic sweep") {
    const auto u = kink_field(101, 21);
    const double osc = oscillation(u);
    const auto id = ModulusOfContinuity::identity(10.0);

    std::vector<InfConvResult> family;
    for (int k = 3; k <= 7; ++k) {
        const double eps = std::pow(2.0, -k);
        family.push_back(inf_convolve(u, {eps, delta_from_modulus(id, eps, 2.0, osc), 2.0}));
    }
    // Larger epsilon sits below smaller epsilon, everywhere.
    for (size_t a = 0; a + 1 < family.size(); ++a) {
        const auto& big = family[a];      // eps = 2^{-3-a}
        const auto& small = family[a + 1];
        for (int j = 0; j < u.grid().nt; ++j)
            for (int i = 0; i < u.grid().nx; ++i)
                CHECK(big.u_eps(i, j) <= small.u_eps(i, j) + 1e-13);
    }
    // sup over the coarsest Xi_eps of (u - u_eps) decreases to near zero.
    const IndexBox box = family.front().xi_eps;
    REQUIRE_FALSE(box.empty());
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& member : family) {
        double gap = 0.0;
        for (int j = box.j_lo; j <= box.j_hi; ++j)
            for (int i = box.i_lo; i <= box.i_hi; ++i)
                gap = std::max(gap, u(i, j) - member.u_eps(i, j));
        CHECK(gap <= prev + 1e-13);
        prev = gap;
    }
    CHECK(prev <= 0.2);
}

TEST_CASE("penalty bounds hold on the kink with its exact moduli") {
    const auto u = kink_field(101, 21);
    const double osc = oscillation(u);
    const auto omega_x = ModulusOfContinuity({{0.0, 0.0}, {0.5, 0.5}, {1.0, 0.5}});
    const auto omega_t = ModulusOfContinuity::identity(10.0);
    for (int k = 3; k <= 7; ++k) {
        const double eps = std::pow(2.0, -k);
        const auto res =
            inf_convolve(u, {eps, delta_from_modulus(omega_t, eps, 2.0, osc), 2.0});
        REQUIRE_FALSE(res.xi_eps.empty());
        const auto rep = check_penalty_bounds(res, omega_x, omega_t);
        CHECK(rep.pass);
        CHECK(rep.time_violations == 0);
        CHECK(rep.space_violations == 0);
    }
}

TEST_CASE("penalty bounds with strict margins for a field Lipschitz in space and time") {
    SpaceTimeGrid g{0.0, 1.0, 0.0, 1.0, 81, 81};
    const auto u =
        GridFunction::sampled(g, [](double x, double t) { return 2.0 + x + 0.5 * t; });
    const double osc = oscillation(u);
    const auto omega_x = ModulusOfContinuity::identity(2.0);
    const auto omega_t = ModulusOfContinuity::linear(0.5, 2.0);
    const double eps = 0.03;
    const auto res = inf_convolve(u, {eps, delta_from_modulus(omega_t, eps, 2.0, osc), 2.0});
    REQUIRE_FALSE(res.xi_eps.empty());
    const auto rep = check_penalty_bounds(res, omega_x, omega_t);
    CHECK(rep.pass);
    CHECK(rep.worst_time_margin > 0.0);
    CHECK(rep.worst_space_margin > 0.0);
}

TEST_CASE("quartic space penalty (the 1 < p < 2 regime, q = 4)") {
    const auto u = kink_field(101, 101);
    const double osc = oscillation(u);
    const auto omega_x = ModulusOfContinuity({{0.0, 0.0}, {0.5, 0.5}, {1.0, 0.5}});
    const auto omega_t = ModulusOfContinuity::identity(10.0);
    const double q = 4.0;
    for (double eps : {0.25, 0.18}) {
        const auto res =
            inf_convolve(u, {eps, delta_from_modulus(omega_t, eps, q, osc), q});
        REQUIRE(res.xi_eps.nx() >= 5);
        for (int j = 0; j < u.grid().nt; ++j)
            for (int i = 0; i < u.grid().nx; ++i)
                CHECK(res.u_eps(i, j) <= u(i, j) + 1e-12);
        CHECK(reconstruction_gap(u, res) <= 1e-14);
        const auto pen = check_penalty_bounds(res, omega_x, omega_t);
        CHECK(pen.pass);
        CHECK(semiconcavity_check(res).pass);
        const auto jet = jet_extract(res, (res.xi_eps.i_lo + res.xi_eps.i_hi) / 2,
                                     (res.xi_eps.j_lo + res.xi_eps.j_hi) / 2);
        CHECK(jet.ok);
    }
}

TEST_CASE("penalty check rejects a delta that ignores the modulus rule") {
    const auto u = kink_field(41, 11);
    const auto res = inf_convolve(u, {0.125, 0.5, 2.0});
    CHECK_THROWS_AS(
        check_penalty_bounds(res, ModulusOfContinuity::identity(10.0),
                             ModulusOfContinuity::identity(10.0)),
        std::invalid_argument);
}

TEST_CASE("semiconcavity of the regularized field") {
    SUBCASE("constant field: the paraboloid itself") {
        SpaceTimeGrid g{0.0, 1.0, 0.0, 1.0, 31, 31};
        const auto u = GridFunction::sampled(g, [](double, double) { return 2.0; });
        const auto res = inf_convolve(u, {0.1, 0.01, 2.0});
        const auto rep = semiconcavity_check(res);
        CHECK(rep.pass);
    }
    SUBCASE("kink field") {
        const auto u = kink_field(101, 21);
        const auto res = inf_convolve(u, {0.125, 0.02, 2.0});
        const auto rep = semiconcavity_check(res);
        CHECK(rep.pass);
        CHECK(rep.violations == 0);
    }
    SUBCASE("solver output at p = 3") {
        SpaceTimeGrid g{0.0, 1.0, 0.0, 0.25, 41, 41};
        std::vector<double> u0(static_cast<size_t>(g.nx));
        for (int i = 0; i < g.nx; ++i)
            u0[static_cast<size_t>(i)] = 2.0 + std::abs(g.x(i) - 0.5);
        const auto sol = solve(u0, DirichletBc::constant(u0.front(), u0.back()), g,
                               Params::make(3.0, 1.0, 3.0), SolverConfig{});
        const auto res = inf_convolve(sol.u, {0.125, 0.01, 2.0});
        REQUIRE(res.xi_eps.nx() >= 3);
        REQUIRE(res.xi_eps.nt() >= 3);
        CHECK(semiconcavity_check(res).pass);
    }
}

TEST_CASE("jets: constants, the Huber field, and the kink") {
    SUBCASE("constant") {
        SpaceTimeGrid g{0.0, 1.0, 0.0, 1.0, 21, 21};
        const auto u = GridFunction::sampled(g, [](double, double) { return 3.0; });
        const auto res = inf_convolve(u, {0.2, 0.05, 2.0});
        const auto jet =
            jet_extract(res, (res.xi_eps.i_lo + res.xi_eps.i_hi) / 2,
                        (res.xi_eps.j_lo + res.xi_eps.j_hi) / 2);
        CHECK(jet.theta == 0.0);
        CHECK(jet.eta == 0.0);
        CHECK(jet.ok);
    }
    SUBCASE("Huber slopes at |x| > eps and the flat center") {
        SpaceTimeGrid g{-1.0, 1.0, 0.0, 1.0, 201, 21};
        const auto u =
            GridFunction::sampled(g, [](double x, double) { return std::abs(x); });
        const double eps = 0.1;
        const auto res = inf_convolve(u, {eps, eps * eps, 2.0});
        const int j = (res.xi_eps.j_lo + res.xi_eps.j_hi) / 2;

        const int i_right = node_at(g, 0.5, true);
        const auto jet_r = jet_extract(res, i_right, j);
        CHECK(jet_r.eta == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(jet_r.ok);

        const int i_mid = node_at(g, 0.0, true);
        const auto jet_m = jet_extract(res, i_mid, j);
        CHECK(jet_m.eta == 0.0);
        CHECK(res.argmin_x[res.idx(i_mid, j)] == 0.0);
        CHECK(jet_m.ok);
    }
    SUBCASE("node outside Xi_eps is rejected") {
        const auto u = kink_field(41, 11);
        const auto res = inf_convolve(u, {0.125, 0.02, 2.0});
        CHECK_THROWS_AS(jet_extract(res, 0, 0), std::invalid_argument);
    }
}

TEST_CASE("elementary inequality") {
    SUBCASE("p = 2 collapses the left side") {
        const auto rep = elementary_inequality_check(1.7, 0.3, 2.0, 1.0);
        CHECK(rep.lhs == 0.0);
        CHECK(rep.ok);
    }
    SUBCASE("worked p = 4 value") {
        const auto rep = elementary_inequality_check(1.0, 0.5, 4.0, 1.0);
        CHECK(rep.lhs == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
        CHECK(rep.bound == doctest::Approx(0.5).epsilon(1e-14));
        CHECK(rep.ok);
    }
    SUBCASE("p = 1.5 sweep") {
        for (int k = 1; k < 100; ++k) {
            const auto rep = elementary_inequality_check(0.5, 0.01 * k, 1.5, 0.5);
            CHECK(rep.ok);
        }
    }
    SUBCASE("preconditions") {
        CHECK_THROWS_AS(elementary_inequality_check(0.4, 0.1, 2.0, 0.5),
                        std::invalid_argument);
        CHECK_THROWS_AS(elementary_inequality_check(1.0, 0.0, 2.0, 0.5),
                        std::invalid_argument);
        CHECK_THROWS_AS(elementary_inequality_check(1.0, 0.1, 2.0, 0.0),
                        std::invalid_argument);
    }
}

TEST_CASE("error model: degenerate, tabulated, and swept") {
    SUBCASE("flat modulus gives h = 0 and E = C max(0, eps)") {
        const auto model = error_model(ModulusOfContinuity::zero(1.0), 0.01, 3.0, 2.0,
                                       {1, 1.0, 2.0, 1.0});
        CHECK(model.h(0.0) == 0.0);
        CHECK(model.h(5.0) == 0.0);
        CHECK(model.E_eps == doctest::Approx(0.01));
    }
    SUBCASE("h from the capped identity modulus") {
        const auto omega = ModulusOfContinuity::identity(1.0);  // min(s, 1)
        const auto h = h_curve(omega, 1.0);
        CHECK(h(0.25) == doctest::Approx(1.0));
        CHECK(h(1.0) == doctest::Approx(1.0));
        CHECK(h(4.0) == doctest::Approx(0.5));
        CHECK(h(0.0) == doctest::Approx(1.0));  // the s -> 0 limit
        double prev = h(0.0);
        for (const auto& [s, v] : error_model(omega, 0.1, 3.0, 2.0, {1, 1, 2, 1}).h_table) {
            CHECK(v <= prev + 1e-15);
            prev = v;
        }
    }
    SUBCASE("E_eps decreases along a decreasing epsilon sweep, both branches") {
        const auto omega = ModulusOfContinuity::identity(1.0);
        for (double p : {1.5, 3.0}) {
            const double q = p >= 2.0 ? 2.0 : 4.0;
            double prev = std::numeric_limits<double>::infinity();
            for (double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
                const double e = error_model(omega, eps, p, q, {1, 1, 2, 1}).E_eps;
                CHECK(e < prev);
                prev = e;
            }
        }
    }
}

TEST_CASE("error term G") {
    ErrorModel model;
    model.h = [](double) { return 0.5; };
    model.E_eps = 0.1;
    CHECK(error_term_G(0.0, model, 3.0) == 0.0);
    CHECK(error_term_G(2.0, model, 3.0) == doctest::Approx(-0.6).epsilon(1e-14));
    model.E_eps = 0.0;
    CHECK(error_term_G(7.0, model, 3.0) == 0.0);
    CHECK_THROWS_AS(error_term_G(-1.0, model, 3.0), std::invalid_argument);
}

namespace {

// Smooth bump supported strictly inside the box, with a grid-independent
// C1 norm.
GridFunction xi_bump(const SpaceTimeGrid& g, const IndexBox& box) {
    std::vector<double> v(static_cast<size_t>(g.size()), 0.0);
    for (int j = box.j_lo + 1; j < box.j_hi; ++j)
        for (int i = box.i_lo + 1; i < box.i_hi; ++i) {
            const double fx = static_cast<double>(i - box.i_lo) / (box.i_hi - box.i_lo);
            const double ft = static_cast<double>(j - box.j_lo) / (box.j_hi - box.j_lo);
            const double sx = std::sin(M_PI * fx), st = std::sin(M_PI * ft);
            v[static_cast<size_t>(j) * g.nx + i] = sx * sx * st * st;
        }
    return GridFunction(g, std::move(v));
}

GridFunction bump_outside(const SpaceTimeGrid& g, const IndexBox& box) {
    std::vector<double> v(static_cast<size_t>(g.size()), 0.0);
    const int i = box.i_lo - 1;
    const int j = (box.j_lo + box.j_hi) / 2;
    v[static_cast<size_t>(j) * g.nx + i] = 1.0;
    return GridFunction(g, std::move(v));
}

}  // namespace

TEST_CASE("augmented weak inequality") {
    SUBCASE("constant field integrates to zero") {
        SpaceTimeGrid g{0.0, 1.0, 0.0, 1.0, 31, 31};
        const auto u = GridFunction::sampled(g, [](double, double) { return 2.0; });
        const auto res = inf_convolve(u, {0.15, 0.02, 2.0});
        REQUIRE(res.xi_eps.nx() >= 7);
        ErrorModel model;
        model.h = [](double) { return 0.0; };
        model.E_eps = 0.0;
        const GridFunction phis[] = {xi_bump(g, res.xi_eps)};
        const auto rep = augmented_weak_check(res, model, Params::make(2.0, 1.0, 3.0), phis);
        CHECK(rep.pass);
        CHECK(std::abs(rep.values[0]) <= 1e-10);
    }
    SUBCASE("inf-convolution of a p = 2 solver solution passes") {
        SpaceTimeGrid g{0.0, 1.0, 0.0, 0.3, 61, 61};
        std::vector<double> u0(static_cast<size_t>(g.nx));
        for (int i = 0; i < g.nx; ++i)
            u0[static_cast<size_t>(i)] = 2.0 + std::sin(M_PI * g.x(i));
        const Params prm = Params::make(2.0, 1.0, 3.0);
        const auto sol = solve(u0, DirichletBc::constant(2.0, 2.0), g, prm, SolverConfig{});
        const auto omega_x = optimal_modulus(sol.u, Direction::space);
        const double eps = 0.04;
        const auto res = inf_convolve(sol.u, {eps, eps * eps, 2.0});
        REQUIRE(res.xi_eps.nx() >= 7);
        REQUIRE(res.xi_eps.nt() >= 7);
        const auto model = error_model(omega_x, eps, prm.p, prm.q, {1, prm.m, prm.M, 1.0});
        const GridFunction phis[] = {xi_bump(g, res.xi_eps)};
        const auto rep = augmented_weak_check(res, model, prm, phis);
        CHECK(rep.pass);
    }
    SUBCASE("a strict subsolution is flagged") {
        // A deepening dip: d/dt u - lap u = -2 sin(pi x)(1 + t pi^2) < 0 inside.
        SpaceTimeGrid g{0.0, 1.0, 0.0, 1.0, 121, 121};
        const auto u = GridFunction::sampled(g, [](double x, double t) {
            return 3.0 - 2.0 * t * std::sin(M_PI * x);
        });
        const Params prm = Params::make(2.0, 0.5, 3.0);
        const double eps = 0.02;
        const auto res = inf_convolve(u, {eps, eps * eps, 2.0});
        REQUIRE(res.xi_eps.nx() >= 7);
        ErrorModel model;
        model.h = [](double) { return 0.0; };
        model.E_eps = 0.0;
        const GridFunction phis[] = {xi_bump(g, res.xi_eps)};
        const auto rep = augmented_weak_check(res, model, prm, phis);
        CHECK_FALSE(rep.pass);
        CHECK(rep.min_value < -rep.tolerance);
    }
    SUBCASE("support leaking outside Xi_eps is rejected") {
        SpaceTimeGrid g{0.0, 1.0, 0.0, 1.0, 31, 31};
        const auto u = GridFunction::sampled(g, [](double, double) { return 2.0; });
        const auto res = inf_convolve(u, {0.15, 0.02, 2.0});
        const auto wide = bump_outside(g, res.xi_eps);
        ErrorModel model;
        model.h = [](double) { return 0.0; };
        model.E_eps = 0.0;
        const GridFunction phis[] = {wide};
        CHECK_THROWS_AS(augmented_weak_check(res, model, Params::make(2.0, 1.0, 3.0), phis),
                        std::invalid_argument);
    }
}

TEST_CASE("serialization round trip") {
    const auto u = kink_field(41, 11);
    const auto res = inf_convolve(u, {0.125, 0.02, 2.0});
    const auto base = std::filesystem::temp_directory_path() / "trud_infconv_rt";
    write_infconv(base, res);
    const auto back = read_infconv(base);

    CHECK(back.params.epsilon == res.params.epsilon);
    CHECK(back.params.delta_eps == res.params.delta_eps);
    CHECK(back.xi_eps.i_lo == res.xi_eps.i_lo);
    CHECK(back.xi_eps.j_hi == res.xi_eps.j_hi);
    const SpaceTimeGrid& g = u.grid();
    for (int j = 0; j < g.nt; ++j)
        for (int i = 0; i < g.nx; ++i) {
            CHECK(back.u_eps(i, j) == res.u_eps(i, j));
            const size_t k = res.idx(i, j);
            CHECK(back.argmin_x[k] == doctest::Approx(res.argmin_x[k]).epsilon(1e-12));
            CHECK(back.penalty_space[k] ==
                  doctest::Approx(res.penalty_space[k]).epsilon(1e-12));
        }
    CHECK(reconstruction_gap(u, back) <= 1e-13);
}
