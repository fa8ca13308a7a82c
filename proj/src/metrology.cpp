#include "trudinger/metrology.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "trudinger/num.hpp"

namespace trudinger {

PhiProfile PhiProfile::holder(double alpha) {
    if (!(alpha > 0.0) || !(alpha < 1.0))
        throw std::invalid_argument("holder profile needs alpha in (0,1)");
    return PhiProfile(Kind::holder, alpha, 0.0, 0.0);
}

PhiProfile PhiProfile::lipschitz(double kappa, double beta) {
    if (!(beta > 1.0)) throw std::invalid_argument("lipschitz profile needs beta > 1");
    return PhiProfile(Kind::lipschitz, 2.0 * (beta - 1.0), kappa, beta);
}

PhiProfile PhiProfile::lipschitz_default(double alpha) {
    const double beta = 0.5 * alpha + 1.0;
    const double kappa = std::pow(2.0, -beta - 1.0) / beta;
    return PhiProfile(Kind::lipschitz, alpha, kappa, beta);
}

double PhiProfile::value(double s) const {
    if (s < 0.0) throw std::invalid_argument("phi argument must be >= 0");
    if (kind_ == Kind::holder) return std::pow(s, alpha_);
    return s - kappa_ * std::pow(s, beta_);
}

double PhiProfile::deriv(double s) const {
    if (kind_ == Kind::holder) return alpha_ * std::pow(s, alpha_ - 1.0);
    return 1.0 - kappa_ * beta_ * std::pow(s, beta_ - 1.0);
}

double PhiProfile::second(double s) const {
    if (kind_ == Kind::holder) return alpha_ * (alpha_ - 1.0) * std::pow(s, alpha_ - 2.0);
    return -kappa_ * beta_ * (beta_ - 1.0) * std::pow(s, beta_ - 2.0);
}

PhiCertificate certify_phi(const PhiProfile& profile) {
    PhiCertificate cert;
    cert.phi_at_zero = profile.value(0.0);
    cert.zero_ok = cert.phi_at_zero == 0.0;
    cert.c_phi = std::numeric_limits<double>::infinity();
    cert.margin_ratio = cert.c_phi;
    cert.margin_concave = cert.c_phi;
    for (double e = -20.0; e <= 1.0 + 1e-12; e += 0.125) {
        const double s = std::pow(2.0, e);
        const double d1 = profile.deriv(s);
        const double d2 = profile.second(s);
        cert.c_phi = std::min(cert.c_phi, d1);
        cert.margin_ratio = std::min(cert.margin_ratio, d1 / s - std::abs(d2));
        cert.margin_concave = std::min(cert.margin_concave, -d2);
    }
    cert.ratio_ok = cert.margin_ratio > 0.0;
    cert.concave_ok = cert.margin_concave > 0.0;
    cert.positive_slope_ok = cert.c_phi > 0.0;
    cert.ok = cert.zero_ok && cert.ratio_ok && cert.concave_ok && cert.positive_slope_ok;
    return cert;
}

namespace {

void require_base_admissible(const SpaceTimeGrid& g, const PsiSpec& spec) {
    const double cx = 0.5 * (g.x_min + g.x_max);
    const double half_x = 0.5 * (g.x_max - g.x_min);
    const double span_t = g.t_max - g.t_min;
    const double tol_x = 1e-9 * half_x, tol_t = 1e-9 * span_t;
    if (std::abs(spec.x0 - cx) > 0.5 * half_x + tol_x ||
        std::abs(spec.y0 - cx) > 0.5 * half_x + tol_x)
        throw std::invalid_argument("base point outside the middle half of the cylinder");
    if (spec.t0 < g.t_max - 0.5 * span_t - tol_t || spec.t0 > g.t_max + tol_t)
        throw std::invalid_argument("base time outside the upper half of the cylinder");
}

struct PsiScan {
    double best = -std::numeric_limits<double>::infinity();
    int ix = -1, iy = -1, jt = -1;
};

PsiScan psi_scan_chunk(const GridFunction& u, const PsiSpec& spec, int ix_begin,
                       int ix_end, bool early_exit_positive) {
    const SpaceTimeGrid& g = u.grid();
    PsiScan out;
    for (int ix = ix_begin; ix < ix_end; ++ix) {
        const double x = g.x(ix);
        const double px = 0.5 * spec.K * (x - spec.x0) * (x - spec.x0);
        for (int iy = 0; iy < g.nx; ++iy) {
            const double y = g.x(iy);
            const double pen_xy =
                px + 0.5 * spec.K * (y - spec.y0) * (y - spec.y0) +
                spec.L * spec.profile.value(std::abs(x - y));
            for (int jt = 0; jt < g.nt; ++jt) {
                const double t = g.t(jt);
                const double psi = u(ix, jt) - u(iy, jt) - pen_xy -
                                   0.5 * spec.K * (t - spec.t0) * (t - spec.t0);
                if (psi > out.best) {
                    out.best = psi;
                    out.ix = ix;
                    out.iy = iy;
                    out.jt = jt;
                    if (early_exit_positive && psi > 0.0) return out;
                }
            }
        }
    }
    return out;
}

bool psi_has_positive(const GridFunction& u, const PsiSpec& spec) {
    return psi_scan_chunk(u, spec, 0, u.grid().nx, true).best > 0.0;
}

}  // namespace

PsiMax psi_max(const GridFunction& u, const PsiSpec& spec, int threads) {
    const SpaceTimeGrid& g = u.grid();
    require_base_admissible(g, spec);
    std::vector<PsiScan> parts(static_cast<size_t>(g.nx));
    parallel_for_chunks(g.nx, threads, [&](int b, int e) {
        for (int ix = b; ix < e; ++ix)
            parts[static_cast<size_t>(ix)] = psi_scan_chunk(u, spec, ix, ix + 1, false);
    });
    PsiScan best;
    for (const auto& part : parts)
        if (part.best > best.best) best = part;  // chunk order keeps the first maximizer
    return {best.best, best.ix, best.iy, best.jt};
}

namespace {

std::vector<double> base_lattice_x(const SpaceTimeGrid& grid, int n_space) {
    const double cx = 0.5 * (grid.x_min + grid.x_max);
    const double half_x = 0.5 * (grid.x_max - grid.x_min);
    std::vector<double> xs;
    for (int a = 0; a < n_space; ++a) {
        const double fx = n_space == 1 ? 0.5 : a / (n_space - 1.0);
        xs.push_back(cx - 0.5 * half_x + fx * half_x);
    }
    return xs;
}

std::vector<double> base_lattice_t(const SpaceTimeGrid& grid, int n_time) {
    const double span_t = grid.t_max - grid.t_min;
    std::vector<double> ts;
    for (int b = 0; b < n_time; ++b) {
        const double ft = n_time == 1 ? 0.5 : b / (n_time - 1.0);
        ts.push_back(grid.t_max - 0.5 * span_t + ft * 0.5 * span_t);
    }
    return ts;
}

}  // namespace

std::vector<BasePoint> default_base_points(const SpaceTimeGrid& grid, int n_space,
                                           int n_time) {
    if (n_space < 1 || n_time < 1)
        throw std::invalid_argument("base lattice needs >= 1 point per direction");
    std::vector<BasePoint> pts;
    for (double x : base_lattice_x(grid, n_space))
        for (double t : base_lattice_t(grid, n_time)) pts.push_back({x, x, t});
    return pts;
}

std::vector<BasePoint> paired_base_points(const SpaceTimeGrid& grid, int n_space,
                                          int n_time) {
    if (n_space < 1 || n_time < 1)
        throw std::invalid_argument("base lattice needs >= 1 point per direction");
    std::vector<BasePoint> pts;
    const auto xs = base_lattice_x(grid, n_space);
    for (double x0 : xs)
        for (double y0 : xs)
            for (double t : base_lattice_t(grid, n_time)) pts.push_back({x0, y0, t});
    return pts;
}

LCertificate minimal_L_certificate(const GridFunction& u, const PhiProfile& profile,
                                   double K, std::span<const BasePoint> base_points,
                                   double L_hi_init, int threads) {
    if (base_points.empty()) throw std::invalid_argument("need at least one base point");
    if (!certify_phi(profile).ok)
        throw std::invalid_argument("profile fails the certification conditions");

    auto any_positive = [&](double L) {
        for (const BasePoint& bp : base_points) {
            PsiSpec spec{L, K, bp.x0, bp.y0, bp.t0, profile};
            require_base_admissible(u.grid(), spec);
            if (psi_has_positive(u, spec)) return true;
        }
        return false;
    };

    double lo = 0.0;
    if (!any_positive(lo)) {
        LCertificate cert{lo, {}, -std::numeric_limits<double>::infinity()};
        for (const BasePoint& bp : base_points) {
            PsiSpec spec{lo, K, bp.x0, bp.y0, bp.t0, profile};
            cert.per_base_max.push_back(psi_max(u, spec, threads).max_value);
            cert.max_psi = std::max(cert.max_psi, cert.per_base_max.back());
        }
        return cert;
    }

    double hi = L_hi_init;
    int doublings = 0;
    while (any_positive(hi)) {
        hi *= 2.0;
        if (++doublings > 60)
            throw std::runtime_error("L bracket failure: max Psi still positive at L_hi = " +
                                     format_double(hi));
    }
    const double tol = 1e-3 * (hi - lo);
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (any_positive(mid))
            lo = mid;
        else
            hi = mid;
    }

    LCertificate cert{hi, {}, -std::numeric_limits<double>::infinity()};
    for (const BasePoint& bp : base_points) {
        PsiSpec spec{hi, K, bp.x0, bp.y0, bp.t0, profile};
        cert.per_base_max.push_back(psi_max(u, spec, threads).max_value);
        cert.max_psi = std::max(cert.max_psi, cert.per_base_max.back());
    }
    return cert;
}

double lipschitz_constant(const GridFunction& u, const IndexBox& box) {
    if (box.empty() || box.nx() < 2)
        throw std::invalid_argument("region needs >= 2 space nodes");
    const SpaceTimeGrid& g = u.grid();
    double best = 0.0;
    for (int j = box.j_lo; j <= box.j_hi; ++j)
        for (int i1 = box.i_lo; i1 <= box.i_hi; ++i1)
            for (int i2 = i1 + 1; i2 <= box.i_hi; ++i2)
                best = std::max(best,
                                std::abs(u(i2, j) - u(i1, j)) / (g.x(i2) - g.x(i1)));
    return best;
}

double lipschitz_constant(const GridFunction& u, const Cylinder& region) {
    return lipschitz_constant(u, intersect(u.grid(), region));
}

double holder_constant(const GridFunction& u, const IndexBox& box, double alpha) {
    if (!(alpha > 0.0) || !(alpha < 1.0))
        throw std::invalid_argument("holder exponent must lie in (0,1)");
    if (box.empty() || box.nx() < 2)
        throw std::invalid_argument("region needs >= 2 space nodes");
    const SpaceTimeGrid& g = u.grid();
    double best = 0.0;
    for (int j = box.j_lo; j <= box.j_hi; ++j)
        for (int i1 = box.i_lo; i1 <= box.i_hi; ++i1)
            for (int i2 = i1 + 1; i2 <= box.i_hi; ++i2)
                best = std::max(best, std::abs(u(i2, j) - u(i1, j)) /
                                          std::pow(g.x(i2) - g.x(i1), alpha));
    return best;
}

double holder_constant(const GridFunction& u, const Cylinder& region, double alpha) {
    return holder_constant(u, intersect(u.grid(), region), alpha);
}

double time_holder_constant(const GridFunction& u, const IndexBox& box) {
    if (box.empty() || box.nt() < 2)
        throw std::invalid_argument("region needs >= 2 time slices");
    const SpaceTimeGrid& g = u.grid();
    double best = 0.0;
    for (int i = box.i_lo; i <= box.i_hi; ++i)
        for (int j1 = box.j_lo; j1 <= box.j_hi; ++j1)
            for (int j2 = j1 + 1; j2 <= box.j_hi; ++j2)
                best = std::max(best, std::abs(u(i, j2) - u(i, j1)) /
                                          std::sqrt(g.t(j2) - g.t(j1)));
    return best;
}

double time_holder_constant(const GridFunction& u, const Cylinder& region) {
    return time_holder_constant(u, intersect(u.grid(), region));
}

double combined_constant(const GridFunction& u, const IndexBox& box, int threads) {
    if (box.empty()) throw std::invalid_argument("region outside grid");
    const SpaceTimeGrid& g = u.grid();
    const int nx = box.nx(), nt = box.nt();
    const int n = nx * nt;
    std::vector<double> part(static_cast<size_t>(n), 0.0);
    parallel_for_chunks(n, threads, [&](int b, int e) {
        for (int a = b; a < e; ++a) {
            const int i1 = box.i_lo + a % nx, j1 = box.j_lo + a / nx;
            double best = 0.0;
            for (int k = a + 1; k < n; ++k) {
                const int i2 = box.i_lo + k % nx, j2 = box.j_lo + k / nx;
                const double den = std::abs(g.x(i2) - g.x(i1)) +
                                   std::sqrt(std::abs(g.t(j2) - g.t(j1)));
                best = std::max(best, std::abs(u(i2, j2) - u(i1, j1)) / den);
            }
            part[static_cast<size_t>(a)] = best;
        }
    });
    double best = 0.0;
    for (double v : part) best = std::max(best, v);
    return best;
}

double fitted_time_exponent(const GridFunction& u, const IndexBox& box) {
    if (box.empty() || box.nt() < 2)
        throw std::invalid_argument("region needs >= 2 time slices");
    const double dt = u.grid().dt();
    std::vector<double> lx, ly;
    for (int lag = 1; lag <= box.nt() - 1; lag *= 2) {
        double sup = 0.0;
        for (int i = box.i_lo; i <= box.i_hi; ++i)
            for (int j = box.j_lo; j + lag <= box.j_hi; ++j)
                sup = std::max(sup, std::abs(u(i, j + lag) - u(i, j)));
        if (sup > 0.0) {
            lx.push_back(std::log(lag * dt));
            ly.push_back(std::log(sup));
        }
    }
    if (lx.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const double n = static_cast<double>(lx.size());
    for (size_t k = 0; k < lx.size(); ++k) {
        sx += lx[k];
        sy += ly[k];
        sxx += lx[k] * lx[k];
        sxy += lx[k] * ly[k];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

GridFunction rescale_to_q1(const GridFunction& u) {
    SpaceTimeGrid g = u.grid();
    g.x_min = -1.0;
    g.x_max = 1.0;
    g.t_min = -1.0;
    g.t_max = 0.0;
    return GridFunction(g, std::vector<double>(u.values().begin(), u.values().end()));
}

}  // namespace trudinger
