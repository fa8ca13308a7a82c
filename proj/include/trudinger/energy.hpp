#pragma once

#include <array>
#include <span>
#include <vector>

#include "trudinger/grid.hpp"
#include "trudinger/infconv.hpp"
#include "trudinger/pde.hpp"

namespace trudinger {

/// Tensor-product smoothstep cutoff: zero on a margin of its region, one on
/// the inner plateau, C1 ramps of the margin's width in between.
struct CutoffFunction {
    GridFunction xi;
    IndexBox region;
    int margin_nodes = 1;
    double max_space_grad = 0.0;  // measured forward-difference |Dxi|
};

CutoffFunction build_cutoff(const SpaceTimeGrid& grid, const IndexBox& region,
                            int margin_nodes);

struct EnergyReport {
    double lhs = 0.0;      // integral of |Du|^p xi^p
    double rhs_raw = 0.0;  // integral of |d(xi^p)/dt| + |Dxi|^p + xi^p
    double ratio = 0.0;
    double constant_used = 0.0;
    bool pass = true;
    double g_contrib = 0.0;  // integral of xi^p (M - u) |G(Du)|
    bool g_flagged = false;  // G contribution above 10% of rhs_raw
};

/// Local energy ratio of u against the cutoff; pass criterion is the
/// caller's constant (infinity disables gating). `model` feeds the G term
/// bookkeeping and may be null.
EnergyReport caccioppoli_check(const GridFunction& u, const CutoffFunction& xi,
                               const Params& params,
                               const ErrorModel* model = nullptr,
                               double pass_constant =
                                   std::numeric_limits<double>::infinity());

struct CauchyReport {
    std::vector<std::vector<double>> distances;  // symmetric, zero diagonal
    std::vector<double> consecutive;             // d(k, k+1) along the family
    bool pass = false;  // tail nonincreasing within 5 percent
};

/// Pairwise L^r distances of forward-difference gradients over `box` for an
/// inf-convolution family ordered by decreasing epsilon.
CauchyReport cauchy_gradient_diagnostic(std::span<const InfConvResult> family,
                                        double r, double p, const IndexBox& box);

struct VectorInequalityReport {
    // Slots: 0 lower bound p >= 2, 1 lower bound p < 2,
    //        2 upper bound p < 2,  3 upper bound p >= 2.
    std::array<bool, 4> evaluated{};
    std::array<bool, 4> ok{};
    std::array<double, 4> margin{};
    bool pass = false;
};

/// The four p-Laplace vector inequalities, branch selected by p, with
/// additive slack 1e-12 (1 + |a| + |b|)^p.
VectorInequalityReport vector_inequality_check(std::span<const double> a,
                                               std::span<const double> b, double p);

}  // namespace trudinger
