#include "trudinger/infconv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "trudinger/num.hpp"

namespace trudinger {

void InfConvParams::validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
    if (!(delta_eps > 0.0)) throw std::invalid_argument("delta_eps must be positive");
    if (!(q >= 2.0)) throw std::invalid_argument("q must be >= 2");
}

double InfConvParams::eps_pow() const { return std::pow(epsilon, q - 1.0); }

double delta_from_modulus(const ModulusOfContinuity& omega_t, double epsilon, double q,
                          double osc) {
    if (!(osc > 0.0)) throw std::invalid_argument("delta_from_modulus needs osc > 0");
    if (!omega_t.strictly_increasing())
        throw std::invalid_argument("delta_from_modulus needs a strictly increasing omega_t");
    const double target = std::pow(epsilon, q - 1.0);
    if (target > omega_t.cap())
        throw std::invalid_argument("epsilon too large for modulus");
    const double s = omega_t.inverse(target);
    return s * s / (2.0 * osc);
}

InfConvResult inf_convolve(const GridFunction& u, const InfConvParams& params,
                           int threads) {
    params.validate();
    const SpaceTimeGrid& g = u.grid();
    const double dx = g.dx(), dt = g.dt();
    const double eps_pow = params.eps_pow();
    const double osc = oscillation(u);
    const double r_eps = std::pow(params.q * eps_pow * osc, 1.0 / params.q);
    const double t_eps = std::sqrt(2.0 * params.delta_eps * osc);
    if (osc > 0.0 && r_eps < dx)
        throw std::invalid_argument("epsilon below grid resolution");

    // Window radii in nodes, one extra to absorb discreteness; candidates
    // beyond the exact radii cannot win (their penalty alone exceeds osc).
    auto radius_nodes = [](double radius, double h, int n) {
        double k = std::ceil(radius / h) + 1.0;
        return k >= n ? n : static_cast<int>(k);
    };
    const int kx = radius_nodes(r_eps, dx, g.nx);
    const int kt = radius_nodes(t_eps, dt, g.nt);

    InfConvResult res{
        GridFunction(g, std::vector<double>(static_cast<size_t>(g.size()), 0.0)),
        std::vector<double>(static_cast<size_t>(g.size())),
        std::vector<double>(static_cast<size_t>(g.size())),
        std::vector<double>(static_cast<size_t>(g.size())),
        std::vector<double>(static_cast<size_t>(g.size())),
        IndexBox{kx, g.nx - 1 - kx, kt, g.nt - 1 - kt},
        params,
        r_eps,
        t_eps,
        osc,
        std::max(std::abs(u.min_value()), std::abs(u.max_value()))};

    std::vector<double> vals(static_cast<size_t>(g.size()));
    auto worker = [&](int j_begin, int j_end) {
        for (int j = j_begin; j < j_end; ++j) {
            const double t = g.t(j);
            const int js_lo = std::max(0, j - kt), js_hi = std::min(g.nt - 1, j + kt);
            for (int i = 0; i < g.nx; ++i) {
                const double x = g.x(i);
                const int iy_lo = std::max(0, i - kx), iy_hi = std::min(g.nx - 1, i + kx);
                double best = std::numeric_limits<double>::infinity();
                double best_dy = 0.0, best_ds = 0.0;
                double best_ps = 0.0, best_pt = 0.0;
                int best_iy = -1, best_js = -1;
                for (int iy = iy_lo; iy <= iy_hi; ++iy) {
                    const double dy = std::abs(g.x(iy) - x);
                    const double ps = std::pow(dy, params.q) / (params.q * eps_pow);
                    for (int js = js_lo; js <= js_hi; ++js) {
                        const double ds = std::abs(g.t(js) - t);
                        const double pt = ds * ds / (2.0 * params.delta_eps);
                        const double cand = u(iy, js) + ps + pt;
                        bool take = cand < best;
                        if (!take && cand == best) {
                            take = dy < best_dy ||
                                   (dy == best_dy &&
                                    (ds < best_ds ||
                                     (ds == best_ds &&
                                      (iy < best_iy || (iy == best_iy && js < best_js)))));
                        }
                        if (take) {
                            best = cand;
                            best_dy = dy;
                            best_ds = ds;
                            best_ps = ps;
                            best_pt = pt;
                            best_iy = iy;
                            best_js = js;
                        }
                    }
                }
                const size_t k = static_cast<size_t>(j) * g.nx + i;
                vals[k] = best;
                res.argmin_x[k] = g.x(best_iy);
                res.argmin_t[k] = g.t(best_js);
                res.penalty_space[k] = best_ps;
                res.penalty_time[k] = best_pt;
            }
        }
    };
    parallel_for_chunks(g.nt, threads, worker);
    res.u_eps = GridFunction(g, std::move(vals));
    return res;
}

PenaltyBoundsReport check_penalty_bounds(const InfConvResult& result,
                                         const ModulusOfContinuity& omega_x,
                                         const ModulusOfContinuity& omega_t) {
    const InfConvParams& prm = result.params;
    // The time bound below presumes the delta_eps rule; recheck it when the
    // inverse is defined (constant inputs have osc = 0 and skip this).
    if (result.osc > 0.0 && omega_t.strictly_increasing() &&
        prm.eps_pow() <= omega_t.cap()) {
        const double expected = delta_from_modulus(omega_t, prm.epsilon, prm.q, result.osc);
        if (std::abs(expected - prm.delta_eps) > 1e-9 * expected)
            throw std::invalid_argument(
                "delta_eps was not produced by the modulus rule for this omega_t");
    }

    const SpaceTimeGrid& g = result.u_eps.grid();
    const double slack = 1e-12 * (1.0 + result.u_abs_max);
    const double time_bound = prm.eps_pow();
    const double space_coef =
        std::pow(prm.q, 1.0 / prm.q) * std::pow(prm.epsilon, (prm.q - 1.0) / prm.q);

    PenaltyBoundsReport rep;
    rep.worst_time_margin = std::numeric_limits<double>::infinity();
    rep.worst_space_margin = rep.worst_time_margin;
    const IndexBox& xi = result.xi_eps;
    for (int j = xi.j_lo; j <= xi.j_hi; ++j) {
        for (int i = xi.i_lo; i <= xi.i_hi; ++i) {
            const size_t k = result.idx(i, j);
            ++rep.n_checked;
            const double tm = time_bound + slack - result.penalty_time[k];
            rep.worst_time_margin = std::min(rep.worst_time_margin, tm);
            if (tm < 0.0) ++rep.time_violations;

            const double offset = std::abs(result.argmin_x[k] - g.x(i));
            const double sm =
                space_coef * std::pow(omega_x(offset), 1.0 / prm.q) + slack - offset;
            rep.worst_space_margin = std::min(rep.worst_space_margin, sm);
            if (sm < 0.0) ++rep.space_violations;
        }
    }
    rep.pass = rep.n_checked > 0 && rep.time_violations == 0 && rep.space_violations == 0;
    return rep;
}

SemiconcavityReport semiconcavity_check(const InfConvResult& result) {
    const IndexBox& xi = result.xi_eps;
    if (xi.nx() < 3 || xi.nt() < 3)
        throw std::invalid_argument("Xi_eps needs >= 3 nodes per direction");
    const SpaceTimeGrid& g = result.u_eps.grid();
    const InfConvParams& prm = result.params;
    const double C = (prm.q - 1.0) * std::pow(result.r_eps, prm.q - 2.0) / prm.eps_pow();

    auto v = [&](int i, int j) {
        const double x = g.x(i), t = g.t(j);
        return result.u_eps(i, j) - C * x * x - t * t / prm.delta_eps;
    };

    double vmax = 0.0;
    for (int j = xi.j_lo; j <= xi.j_hi; ++j)
        for (int i = xi.i_lo; i <= xi.i_hi; ++i) vmax = std::max(vmax, std::abs(v(i, j)));

    SemiconcavityReport rep;
    rep.tol = 1e-9 * (1.0 + vmax);
    rep.worst_margin = std::numeric_limits<double>::infinity();
    auto record = [&](double value, int i, int j) {
        ++rep.n_checked;
        const double margin = rep.tol - value;
        if (margin < rep.worst_margin) {
            rep.worst_margin = margin;
            rep.worst_i = i;
            rep.worst_j = j;
        }
        if (value > rep.tol) ++rep.violations;
    };

    const double dx2 = g.dx() * g.dx(), dt2 = g.dt() * g.dt();
    for (int j = xi.j_lo; j <= xi.j_hi; ++j) {
        for (int i = xi.i_lo; i <= xi.i_hi; ++i) {
            if (i > xi.i_lo && i < xi.i_hi)
                record((v(i + 1, j) - 2.0 * v(i, j) + v(i - 1, j)) / dx2, i, j);
            if (j > xi.j_lo && j < xi.j_hi)
                record((v(i, j + 1) - 2.0 * v(i, j) + v(i, j - 1)) / dt2, i, j);
        }
    }
    // Midpoint concavity at all even gaps along both axes.
    for (int j = xi.j_lo; j <= xi.j_hi; ++j)
        for (int i = xi.i_lo; i <= xi.i_hi; ++i) {
            const int kx_max = std::min(i - xi.i_lo, xi.i_hi - i);
            for (int k = 2; k <= kx_max; ++k)
                record(0.5 * (v(i + k, j) + v(i - k, j)) - v(i, j), i, j);
            const int kt_max = std::min(j - xi.j_lo, xi.j_hi - j);
            for (int k = 2; k <= kt_max; ++k)
                record(0.5 * (v(i, j + k) + v(i, j - k)) - v(i, j), i, j);
        }
    rep.pass = rep.violations == 0;
    return rep;
}

JetInfo jet_extract(const InfConvResult& result, int i, int j) {
    const IndexBox& xi = result.xi_eps;
    if (i <= xi.i_lo || i >= xi.i_hi || j <= xi.j_lo || j >= xi.j_hi)
        throw std::invalid_argument("node outside the interior of Xi_eps");
    const SpaceTimeGrid& g = result.u_eps.grid();
    const InfConvParams& prm = result.params;
    const size_t k = result.idx(i, j);
    const double dx = g.dx(), dt = g.dt();
    const double off_x = g.x(i) - result.argmin_x[k];
    const double off_t = g.t(j) - result.argmin_t[k];

    JetInfo jet;
    jet.theta = off_t / prm.delta_eps;
    jet.eta = signed_pow(off_x, prm.q) / prm.eps_pow();
    jet.fd_theta = (result.u_eps(i, j + 1) - result.u_eps(i, j - 1)) / (2.0 * dt);
    jet.fd_eta = (result.u_eps(i + 1, j) - result.u_eps(i - 1, j)) / (2.0 * dx);
    jet.d2xx =
        (result.u_eps(i + 1, j) - 2.0 * result.u_eps(i, j) + result.u_eps(i - 1, j)) /
        (dx * dx);

    // First-derivative error scales: the one-sided curvature bounds over the
    // sampling stencil (the minimizer may sit up to 2 dx further out there).
    jet.curv_x =
        (prm.q - 1.0) * std::pow(std::abs(off_x) + 2.0 * dx, prm.q - 2.0) / prm.eps_pow();
    jet.curv_t = 1.0 / prm.delta_eps;
    jet.hessian_bound = jet.curv_x;

    const double abs_slack = 1e-12 * (1.0 + result.u_abs_max);
    jet.fd_ok = std::abs(jet.fd_eta - jet.eta) <= 5.0 * dx * jet.curv_x + abs_slack &&
                std::abs(jet.fd_theta - jet.theta) <= 5.0 * dt * jet.curv_t + abs_slack;
    jet.hessian_ok = jet.d2xx <= jet.hessian_bound + abs_slack;
    jet.ok = jet.fd_ok && jet.hessian_ok;
    return jet;
}

ElementaryInequality elementary_inequality_check(double a, double s, double p, double m) {
    if (!(m > 0.0) || !(a >= m)) throw std::invalid_argument("need a >= m > 0");
    if (!(s > 0.0)) throw std::invalid_argument("need s > 0");
    if (!(p > 1.0)) throw std::invalid_argument("need p > 1");
    ElementaryInequality out;
    const double e = 0.5 * (2.0 - p);
    out.lhs = std::abs(std::pow(a + s, e) - std::pow(a, e));
    out.bound = 0.5 * std::abs(p - 2.0) * std::pow(m, -0.5 * p) * s;
    out.ok = out.lhs <= out.bound + 1e-14;
    return out;
}

std::function<double(double)> h_curve(const ModulusOfContinuity& omega_x, double C0) {
    const double at_zero = std::sqrt(omega_x.cap());
    return [omega_x, C0, at_zero](double s) {
        if (!(s >= 0.0)) throw std::invalid_argument("h needs s >= 0");
        if (s == 0.0) return at_zero;
        return std::sqrt(omega_x(C0 * C0 / s));
    };
}

ErrorModel error_model(const ModulusOfContinuity& omega_x, double epsilon, double p,
                       double q, const ErrorConstants& consts) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
    ErrorModel model;
    const double cap = omega_x.cap();
    if (p >= 2.0) {
        model.C0 = std::sqrt(2.0 * cap);
        model.E_eps =
            consts.C * std::max(std::sqrt(omega_x(model.C0 * std::sqrt(epsilon))), epsilon);
    } else {
        model.C0 = std::pow(q * cap, 1.0 / q);
        const double e = (q - 1.0) / q;
        model.E_eps = consts.C * std::max(std::sqrt(omega_x(model.C0 * std::pow(epsilon, e))),
                                          std::pow(epsilon, q - 1.0));
    }
    model.h = h_curve(omega_x, model.C0);
    model.h_table.emplace_back(0.0, model.h(0.0));
    for (int k = 0; k <= 48; ++k) {
        const double s = std::pow(10.0, -6.0 + 0.25 * k);
        model.h_table.emplace_back(s, model.h(s));
    }
    return model;
}

double error_term_G(double grad_norm, const ErrorModel& model, double p) {
    if (!(grad_norm >= 0.0)) throw std::invalid_argument("gradient norm must be >= 0");
    if (grad_norm == 0.0) return 0.0;
    return -model.E_eps * (std::pow(grad_norm, p) * model.h(grad_norm) +
                           std::pow(grad_norm, std::max(0.0, p - 2.0)));
}

AugmentedWeakReport augmented_weak_check(const InfConvResult& result,
                                         const ErrorModel& model, const Params& params,
                                         std::span<const GridFunction> testfns,
                                         double tol_factor) {
    const SpaceTimeGrid& g = result.u_eps.grid();
    const IndexBox& xi = result.xi_eps;
    const double dx = g.dx(), dt = g.dt();

    // Forward-difference gradient and the matching G field.
    std::vector<double> G_field(static_cast<size_t>(g.size()), 0.0);
    double grad_max = 0.0, g_abs_max = 0.0;
    for (int j = 0; j < g.nt; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double du = i + 1 < g.nx
                                  ? (result.u_eps(i + 1, j) - result.u_eps(i, j)) / dx
                                  : (result.u_eps(i, j) - result.u_eps(i - 1, j)) / dx;
            const double Gv = error_term_G(std::abs(du), model, params.p);
            G_field[result.idx(i, j)] = Gv;
            grad_max = std::max(grad_max, std::abs(du));
            g_abs_max = std::max(g_abs_max, std::abs(Gv));
        }

    AugmentedWeakReport rep;
    rep.min_value = std::numeric_limits<double>::infinity();
    double phi_c1_max = 0.0, support_max = 0.0;
    for (const GridFunction& phi : testfns) {
        if (!(phi.grid() == g))
            throw std::invalid_argument("test function grid mismatch");
        if (phi.min_value() < 0.0)
            throw std::invalid_argument("test functions must be nonnegative");
        double phi_c1 = 0.0;
        long long support_nodes = 0;
        for (int j = 0; j < g.nt; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const bool inside = i >= xi.i_lo && i <= xi.i_hi && j >= xi.j_lo &&
                                    j <= xi.j_hi;
                if (!inside && phi(i, j) != 0.0)
                    throw std::invalid_argument(
                        "test function support must stay inside Xi_eps");
                if (phi(i, j) != 0.0) ++support_nodes;
                phi_c1 = std::max(phi_c1, std::abs(phi(i, j)));
                if (i + 1 < g.nx)
                    phi_c1 = std::max(phi_c1, std::abs(phi(i + 1, j) - phi(i, j)) / dx);
                if (j + 1 < g.nt)
                    phi_c1 = std::max(phi_c1, std::abs(phi(i, j + 1) - phi(i, j)) / dt);
            }
        phi_c1_max = std::max(phi_c1_max, phi_c1);
        support_max = std::max(support_max, support_nodes * dx * dt);

        double g_quad = 0.0;
        for (int j = 0; j < g.nt; ++j) {
            const double wj = (j == 0 || j == g.nt - 1) ? 0.5 : 1.0;
            for (int i = 0; i < g.nx; ++i) {
                const double wi = (i == 0 || i == g.nx - 1) ? 0.5 : 1.0;
                g_quad += wi * wj * phi(i, j) * G_field[result.idx(i, j)];
            }
        }
        g_quad *= dx * dt;
        rep.values.push_back(weak_residual(result.u_eps, phi, params) - g_quad);
        rep.min_value = std::min(rep.min_value, rep.values.back());
    }
    const double scale = std::pow(1.0 + result.u_eps.max_value(), params.p - 1.0) +
                         std::pow(1.0 + grad_max, params.p - 1.0) + g_abs_max;
    rep.tolerance = tol_factor * (dx + dt) * phi_c1_max * scale * support_max;
    rep.pass = !rep.values.empty() && rep.min_value >= -rep.tolerance;
    return rep;
}

void write_infconv(const std::filesystem::path& base, const InfConvResult& result) {
    const SpaceTimeGrid& g = result.u_eps.grid();
    write_gridfun_file(base.string() + ".gridfun", result.u_eps);

    SpaceTimeGrid packed = g;
    packed.nt = 2 * g.nt;
    std::vector<double> offs;
    offs.reserve(static_cast<size_t>(packed.size()));
    for (int j = 0; j < g.nt; ++j)
        for (int i = 0; i < g.nx; ++i)
            offs.push_back(result.argmin_x[result.idx(i, j)] - g.x(i));
    for (int j = 0; j < g.nt; ++j)
        for (int i = 0; i < g.nx; ++i)
            offs.push_back(result.argmin_t[result.idx(i, j)] - g.t(j));
    write_gridfun_file(base.string() + ".argmin.gridfun",
                       GridFunction(packed, std::move(offs)));

    nlohmann::ordered_json meta;
    meta["epsilon"] = result.params.epsilon;
    meta["delta_eps"] = result.params.delta_eps;
    meta["q"] = result.params.q;
    meta["xi_eps_bounds"] = {result.xi_eps.i_lo, result.xi_eps.i_hi, result.xi_eps.j_lo,
                             result.xi_eps.j_hi};
    meta["r_eps"] = result.r_eps;
    meta["t_eps"] = result.t_eps;
    meta["osc"] = result.osc;
    meta["u_abs_max"] = result.u_abs_max;
    std::ofstream os(base.string() + ".json");
    if (!os) throw std::runtime_error("cannot write " + base.string() + ".json");
    os << meta.dump(2) << '\n';
}

InfConvResult read_infconv(const std::filesystem::path& base) {
    GridFunction u_eps = read_gridfun_file(base.string() + ".gridfun");
    GridFunction packed = read_gridfun_file(base.string() + ".argmin.gridfun");
    const SpaceTimeGrid& g = u_eps.grid();
    if (packed.grid().nx != g.nx || packed.grid().nt != 2 * g.nt)
        throw std::runtime_error("argmin planes do not match the value grid");

    std::ifstream is(base.string() + ".json");
    if (!is) throw std::runtime_error("cannot read " + base.string() + ".json");
    nlohmann::json meta = nlohmann::json::parse(is);

    InfConvResult res{std::move(u_eps),
                      std::vector<double>(static_cast<size_t>(g.size())),
                      std::vector<double>(static_cast<size_t>(g.size())),
                      std::vector<double>(static_cast<size_t>(g.size())),
                      std::vector<double>(static_cast<size_t>(g.size())),
                      IndexBox{},
                      InfConvParams{meta.at("epsilon").get<double>(),
                                    meta.at("delta_eps").get<double>(),
                                    meta.at("q").get<double>()},
                      meta.at("r_eps").get<double>(),
                      meta.at("t_eps").get<double>(),
                      meta.at("osc").get<double>(),
                      meta.at("u_abs_max").get<double>()};
    const auto& xb = meta.at("xi_eps_bounds");
    res.xi_eps = {xb.at(0).get<int>(), xb.at(1).get<int>(), xb.at(2).get<int>(),
                  xb.at(3).get<int>()};
    for (int j = 0; j < g.nt; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const size_t k = res.idx(i, j);
            res.argmin_x[k] = g.x(i) + packed(i, j);
            res.argmin_t[k] = g.t(j) + packed(i, j + g.nt);
            const double dy = std::abs(packed(i, j));
            res.penalty_space[k] =
                std::pow(dy, res.params.q) / (res.params.q * res.params.eps_pow());
            const double ds = std::abs(packed(i, j + g.nt));
            res.penalty_time[k] = ds * ds / (2.0 * res.params.delta_eps);
        }
    return res;
}

}  // namespace trudinger
