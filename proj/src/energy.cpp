#include "trudinger/energy.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace trudinger {

namespace {

double smoothstep(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    return t * t * (3.0 - 2.0 * t);
}

// 0 on the first `margin` nodes from either edge, then a smoothstep ramp of
// `margin` nodes up to the plateau.
double axis_profile(int idx, int lo, int hi, int margin) {
    const int d = std::min(idx - lo, hi - idx);
    return smoothstep((d - (margin - 1)) / static_cast<double>(margin));
}

}  // namespace

CutoffFunction build_cutoff(const SpaceTimeGrid& grid, const IndexBox& region,
                            int margin_nodes) {
    grid.validate();
    if (region.empty()) throw std::invalid_argument("region outside grid");
    if (margin_nodes < 1) throw std::invalid_argument("cutoff margin must be >= 1 node");
    // Plateau requires an index with axis distance >= 2*margin - 1 from both edges.
    const int need = 2 * (2 * margin_nodes - 1) + 1;
    if (region.nx() < need || region.nt() < need)
        throw std::invalid_argument("cutoff margin too large for region");

    std::vector<double> v(static_cast<size_t>(grid.size()), 0.0);
    for (int j = region.j_lo; j <= region.j_hi; ++j) {
        const double pt = axis_profile(j, region.j_lo, region.j_hi, margin_nodes);
        for (int i = region.i_lo; i <= region.i_hi; ++i) {
            const double px = axis_profile(i, region.i_lo, region.i_hi, margin_nodes);
            v[static_cast<size_t>(j) * grid.nx + i] = px * pt;
        }
    }
    CutoffFunction cut{GridFunction(grid, std::move(v)), region, margin_nodes, 0.0};
    for (int j = 0; j < grid.nt; ++j)
        for (int i = 0; i + 1 < grid.nx; ++i)
            cut.max_space_grad =
                std::max(cut.max_space_grad,
                         std::abs(cut.xi(i + 1, j) - cut.xi(i, j)) / grid.dx());
    const double bound = 2.0 / (margin_nodes * grid.dx());
    if (cut.max_space_grad > bound)
        throw std::logic_error("cutoff slope exceeds 2 / margin width");
    return cut;
}

EnergyReport caccioppoli_check(const GridFunction& u, const CutoffFunction& cut,
                               const Params& params, const ErrorModel* model,
                               double pass_constant) {
    const SpaceTimeGrid& g = u.grid();
    if (!(cut.xi.grid() == g))
        throw std::invalid_argument("cutoff grid does not match the field");
    if (u.min_value() < 0.0 || u.max_value() > params.M + 1e-12 * (1.0 + params.M))
        throw std::invalid_argument("caccioppoli_check needs 0 <= u <= M");

    const double dx = g.dx(), dt = g.dt();
    const double p = params.p;
    EnergyReport rep;
    rep.constant_used = pass_constant;
    for (int j = 0; j < g.nt; ++j) {
        const double wj = (j == 0 || j == g.nt - 1) ? 0.5 : 1.0;
        for (int i = 0; i < g.nx; ++i) {
            const double wi = (i == 0 || i == g.nx - 1) ? 0.5 : 1.0;
            const double w = wi * wj * dx * dt;
            const double du =
                i + 1 < g.nx ? (u(i + 1, j) - u(i, j)) / dx : (u(i, j) - u(i - 1, j)) / dx;
            const double dxi = i + 1 < g.nx ? (cut.xi(i + 1, j) - cut.xi(i, j)) / dx
                                            : (cut.xi(i, j) - cut.xi(i - 1, j)) / dx;
            const double xip = std::pow(cut.xi(i, j), p);
            const double xip_up = std::pow(j + 1 < g.nt ? cut.xi(i, j + 1) : cut.xi(i, j - 1), p);
            const double dtxip = std::abs(xip_up - xip) / dt;

            rep.lhs += w * std::pow(std::abs(du), p) * xip;
            rep.rhs_raw += w * (dtxip + std::pow(std::abs(dxi), p) + xip);
            if (model) {
                const double Gv = error_term_G(std::abs(du), *model, p);
                rep.g_contrib += w * xip * (params.M - u(i, j)) * std::abs(Gv);
            }
        }
    }
    rep.ratio = rep.rhs_raw > 0.0 ? rep.lhs / rep.rhs_raw : 0.0;
    rep.pass = rep.ratio <= pass_constant;
    rep.g_flagged = model && rep.g_contrib > 0.1 * rep.rhs_raw;
    return rep;
}

CauchyReport cauchy_gradient_diagnostic(std::span<const InfConvResult> family,
                                        double r, double p, const IndexBox& box) {
    if (family.size() < 3)
        throw std::invalid_argument("cauchy diagnostic needs >= 3 family members");
    if (!(r > 1.0) || !(r < p)) throw std::invalid_argument("need 1 < r < p");
    const SpaceTimeGrid& g = family[0].u_eps.grid();
    for (const auto& member : family)
        if (!(member.u_eps.grid() == g))
            throw std::invalid_argument("family members must share a grid");
    if (box.empty() || box.nx() < 2)
        throw std::invalid_argument("region too small for gradients");

    const double dx = g.dx(), dt = g.dt();
    auto grad = [&](const InfConvResult& m, int i, int j) {
        return i + 1 <= box.i_hi ? (m.u_eps(i + 1, j) - m.u_eps(i, j)) / dx
                                 : (m.u_eps(i, j) - m.u_eps(i - 1, j)) / dx;
    };

    const size_t n = family.size();
    CauchyReport rep;
    rep.distances.assign(n, std::vector<double>(n, 0.0));
    for (size_t a = 0; a < n; ++a)
        for (size_t b = a + 1; b < n; ++b) {
            double acc = 0.0;
            for (int j = box.j_lo; j <= box.j_hi; ++j) {
                const double wj = (j == box.j_lo || j == box.j_hi) ? 0.5 : 1.0;
                for (int i = box.i_lo; i <= box.i_hi; ++i) {
                    const double wi = (i == box.i_lo || i == box.i_hi) ? 0.5 : 1.0;
                    const double diff = grad(family[a], i, j) - grad(family[b], i, j);
                    acc += wi * wj * std::pow(std::abs(diff), r);
                }
            }
            const double d = std::pow(acc * dx * dt, 1.0 / r);
            rep.distances[a][b] = d;
            rep.distances[b][a] = d;
        }

    for (size_t k = 0; k + 1 < n; ++k)
        rep.consecutive.push_back(rep.distances[k][k + 1]);
    rep.pass = true;
    for (size_t k = 0; k + 1 < rep.consecutive.size(); ++k) {
        if (rep.consecutive[k + 1] > 1.05 * rep.consecutive[k] + 1e-15) {
            rep.pass = false;
            break;
        }
    }
    return rep;
}

namespace {

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// |v|^{p-2} v, read as 0 at v = 0 (p = 2 gives v itself).
std::vector<double> vecpow(std::span<const double> v, double p) {
    const double n = norm2(v);
    std::vector<double> out(v.size(), 0.0);
    if (n == 0.0) return out;
    const double scale = std::pow(n, p - 2.0);
    for (size_t k = 0; k < v.size(); ++k) out[k] = scale * v[k];
    return out;
}

}  // namespace

VectorInequalityReport vector_inequality_check(std::span<const double> a,
                                               std::span<const double> b, double p) {
    if (a.size() != b.size()) throw std::invalid_argument("vector size mismatch");
    if (!(p > 1.0)) throw std::invalid_argument("need p > 1");
    const double na = norm2(a), nb = norm2(b);
    const double slack = 1e-12 * std::pow(1.0 + na + nb, p);

    std::vector<double> diff(a.size());
    for (size_t k = 0; k < a.size(); ++k) diff[k] = a[k] - b[k];
    const double nd = norm2(diff);
    const auto fa = vecpow(a, p), fb = vecpow(b, p);
    std::vector<double> fdiff(a.size());
    for (size_t k = 0; k < a.size(); ++k) fdiff[k] = fa[k] - fb[k];
    double dot = 0.0;
    for (size_t k = 0; k < a.size(); ++k) dot += fdiff[k] * diff[k];
    const double nfd = norm2(fdiff);

    VectorInequalityReport rep;
    auto set = [&](int slot, double lhs, double rhs, bool lower) {
        rep.evaluated[slot] = true;
        rep.margin[slot] = lower ? lhs - rhs : rhs - lhs;
        rep.ok[slot] = rep.margin[slot] >= -slack;
    };
    if (p >= 2.0) {
        set(0, dot, std::pow(2.0, 2.0 - p) * std::pow(nd, p), true);
        const double pa = na == 0.0 && p == 2.0 ? 1.0 : std::pow(na, p - 2.0);
        const double pb = nb == 0.0 && p == 2.0 ? 1.0 : std::pow(nb, p - 2.0);
        set(3, nfd, (p - 1.0) * (pa + pb) * nd, false);
    } else {
        set(1, dot,
            (p - 1.0) * nd * nd * std::pow(1.0 + na * na + nb * nb, 0.5 * (p - 2.0)),
            true);
        set(2, nfd, std::pow(2.0, 2.0 - p) * std::pow(nd, p - 1.0), false);
    }
    rep.pass = true;
    for (int s = 0; s < 4; ++s)
        if (rep.evaluated[s] && !rep.ok[s]) rep.pass = false;
    return rep;
}

}  // namespace trudinger
