#pragma once

#include <span>
#include <vector>

#include "trudinger/grid.hpp"

namespace trudinger {

/// Penalty profile for the variable-doubling certificate: either s^alpha or
/// s - kappa s^beta (kappa = 0 degenerates to the linear profile, which the
/// certification is expected to reject).
class PhiProfile {
  public:
    enum class Kind { holder, lipschitz };

    static PhiProfile holder(double alpha);
    static PhiProfile lipschitz(double kappa, double beta);
    /// beta = alpha/2 + 1, kappa = 2^{-beta-1}/beta.
    static PhiProfile lipschitz_default(double alpha = 0.5);

    double value(double s) const;
    double deriv(double s) const;
    double second(double s) const;

    Kind kind() const { return kind_; }
    double alpha() const { return alpha_; }
    double kappa() const { return kappa_; }
    double beta() const { return beta_; }

  private:
    PhiProfile(Kind k, double alpha, double kappa, double beta)
        : kind_(k), alpha_(alpha), kappa_(kappa), beta_(beta) {}
    Kind kind_;
    double alpha_ = 0.5;
    double kappa_ = 0.0;
    double beta_ = 1.0;
};

struct PhiCertificate {
    bool ok = false;
    double c_phi = 0.0;          // min phi' over the grid
    double margin_ratio = 0.0;   // min of phi'(s)/s - |phi''(s)|
    double margin_concave = 0.0; // min of -phi''(s)
    double phi_at_zero = 0.0;
    bool ratio_ok = false, concave_ok = false, positive_slope_ok = false, zero_ok = false;
};

/// Checks phi(0) = 0, |phi''| < phi'/s, phi'' < 0 < c_phi <= phi' on the
/// log grid s in {2^-20, ..., 2}.
PhiCertificate certify_phi(const PhiProfile& profile);

struct PsiSpec {
    double L = 1.0;
    double K = 1.0;
    double x0 = 0.0, y0 = 0.0, t0 = 0.0;
    PhiProfile profile = PhiProfile::holder(0.5);
};

struct PsiMax {
    double max_value = 0.0;
    int ix = -1, iy = -1, jt = -1;  // first maximizer, lexicographic in (ix, iy, jt)
};

/// Exhaustive maximum of
/// u(x,t)-u(y,t)-L phi(|x-y|)-K/2(|x-x0|^2+|y-y0|^2+|t-t0|^2)
/// over the node triples of u's grid. Base points must lie in the middle
/// half of the space extent and the upper half of the time extent.
PsiMax psi_max(const GridFunction& u, const PsiSpec& spec, int threads = 1);

struct BasePoint {
    double x0 = 0.0, y0 = 0.0, t0 = 0.0;
};

/// Coincident-pair base lattice over the admissible middle/upper region.
std::vector<BasePoint> default_base_points(const SpaceTimeGrid& grid, int n_space,
                                           int n_time);

/// All ordered position pairs of the same lattice, including separated ones.
std::vector<BasePoint> paired_base_points(const SpaceTimeGrid& grid, int n_space,
                                          int n_time);

struct LCertificate {
    double L_star = 0.0;
    std::vector<double> per_base_max;  // max Psi at L_star, one per base point
    double max_psi = 0.0;
};

/// Smallest L (by bisection, tolerance 1e-3 of the initial bracket) for
/// which Psi stays nonpositive at every base point. Requires a certified
/// profile; throws when even L_hi after doubling cannot close the bracket.
LCertificate minimal_L_certificate(const GridFunction& u, const PhiProfile& profile,
                                   double K, std::span<const BasePoint> base_points,
                                   double L_hi_init = 1.0, int threads = 1);

// --- measured constants ----------------------------------------------------

double lipschitz_constant(const GridFunction& u, const IndexBox& box);
double lipschitz_constant(const GridFunction& u, const Cylinder& region);
double holder_constant(const GridFunction& u, const IndexBox& box, double alpha);
double holder_constant(const GridFunction& u, const Cylinder& region, double alpha);
double time_holder_constant(const GridFunction& u, const IndexBox& box);
double time_holder_constant(const GridFunction& u, const Cylinder& region);
/// sup |u(x,t)-u(y,s)| / (|x-y| + |t-s|^{1/2}) over all node pairs.
double combined_constant(const GridFunction& u, const IndexBox& box, int threads = 1);

/// Least-squares slope of log sup_x |u(x,t+lag)-u(x,t)| against log lag over
/// dyadic lags; NaN when the field has no time variation.
double fitted_time_exponent(const GridFunction& u, const IndexBox& box);

/// Affine change of coordinates onto B_1 x (-1, 0]; values are untouched.
GridFunction rescale_to_q1(const GridFunction& u);

struct RegularityReport {
    double lipschitz_L = 0.0;
    double holder_C = 0.0;
    double holder_alpha = 0.5;
    double time_holder_C = 0.0;
    double combined_C = 0.0;
    double fitted_time_exponent = 0.0;
    double L_star = 0.0;
    double max_psi_at_L_star = 0.0;
};

}  // namespace trudinger
