#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

namespace trudinger {

/// Uniform nodes on [x_min,x_max] x [t_min,t_max]; node (i,j) sits at
/// (x_min + i*dx, t_min + j*dt). The coordinate formula is fixed so node
/// positions reproduce bit-for-bit across readers and writers.
struct SpaceTimeGrid {
    double x_min = 0.0;
    double x_max = 1.0;
    double t_min = 0.0;
    double t_max = 1.0;
    int nx = 2;
    int nt = 2;

    double dx() const { return (x_max - x_min) / (nx - 1); }
    double dt() const { return (t_max - t_min) / (nt - 1); }
    double x(int i) const { return x_min + i * dx(); }
    double t(int j) const { return t_min + j * dt(); }
    long long size() const { return static_cast<long long>(nx) * nt; }

    void validate() const;
    bool operator==(const SpaceTimeGrid&) const = default;
};

/// Q_r = B_r(center_x) x (top_t - r, top_t]; the top slice belongs to the
/// cylinder, the bottom slice does not.
struct Cylinder {
    double r = 1.0;
    double center_x = 0.0;
    double top_t = 0.0;
};

/// Inclusive index ranges of grid nodes inside a region.
struct IndexBox {
    int i_lo = 0, i_hi = -1;
    int j_lo = 0, j_hi = -1;

    bool empty() const { return i_lo > i_hi || j_lo > j_hi; }
    int nx() const { return empty() ? 0 : i_hi - i_lo + 1; }
    int nt() const { return empty() ? 0 : j_hi - j_lo + 1; }
    long long size() const { return static_cast<long long>(nx()) * nt(); }
};

/// Nodes of `grid` inside `region`. Spatial ball closed, time interval open
/// at the bottom, closed at the top; boundary membership is decided with a
/// small metric tolerance so index sets are stable under rounding.
IndexBox intersect(const SpaceTimeGrid& grid, const Cylinder& region);

IndexBox whole(const SpaceTimeGrid& grid);

/// Sampled function on a SpaceTimeGrid, stored time-outer/space-inner.
/// Values are immutable after construction; min/max are cached.
class GridFunction {
  public:
    GridFunction(SpaceTimeGrid grid, std::vector<double> values);

    template <class F>
    static GridFunction sampled(const SpaceTimeGrid& g, F&& f) {
        std::vector<double> v(static_cast<size_t>(g.size()));
        for (int j = 0; j < g.nt; ++j)
            for (int i = 0; i < g.nx; ++i)
                v[static_cast<size_t>(j) * g.nx + i] = f(g.x(i), g.t(j));
        return GridFunction(g, std::move(v));
    }

    const SpaceTimeGrid& grid() const { return grid_; }
    double operator()(int i, int j) const {
        return values_[static_cast<size_t>(j) * grid_.nx + i];
    }
    std::span<const double> values() const { return values_; }
    std::span<const double> slice(int j) const {
        return {values_.data() + static_cast<size_t>(j) * grid_.nx,
                static_cast<size_t>(grid_.nx)};
    }

    double min_value() const { return m_lo_; }
    double max_value() const { return m_hi_; }
    /// 0 < m_lo, the standing positivity assumption.
    bool positive() const { return m_lo_ > 0.0; }

  private:
    SpaceTimeGrid grid_;
    std::vector<double> values_;
    double m_lo_ = 0.0;
    double m_hi_ = 0.0;
};

/// Nondecreasing piecewise-linear curve through (s_k, w_k) with w(0) = 0,
/// held constant beyond the last breakpoint.
class ModulusOfContinuity {
  public:
    explicit ModulusOfContinuity(std::vector<std::pair<double, double>> breakpoints);

    static ModulusOfContinuity zero(double s_max);
    static ModulusOfContinuity linear(double slope, double s_max);
    static ModulusOfContinuity identity(double s_max) { return linear(1.0, s_max); }

    double operator()(double s) const;
    bool strictly_increasing() const;
    /// Inverse on [0, cap()]; requires a strictly increasing curve.
    double inverse(double w) const;

    double s_max() const { return pts_.back().first; }
    /// Value held for s >= s_max().
    double cap() const { return pts_.back().second; }
    const std::vector<std::pair<double, double>>& breakpoints() const { return pts_; }

  private:
    std::vector<std::pair<double, double>> pts_;
};

enum class Direction { space, time };

/// max - min of u over the nodes inside `region`.
double oscillation(const GridFunction& u, const Cylinder& region);
double oscillation(const GridFunction& u);

/// Discrete envelope: at lag s = k*h the largest |u difference| over node
/// pairs at distance <= s (same time slice for space, same node for time).
ModulusOfContinuity optimal_modulus(const GridFunction& u, const IndexBox& box,
                                    Direction dir);
ModulusOfContinuity optimal_modulus(const GridFunction& u, const Cylinder& region,
                                    Direction dir);
ModulusOfContinuity optimal_modulus(const GridFunction& u, Direction dir);

/// Sub-grid function on the nodes inside `region`.
GridFunction restrict_to(const GridFunction& u, const Cylinder& region);
GridFunction restrict_to(const GridFunction& u, const IndexBox& box);

// --- gridfun file format -----------------------------------------------
//
//   # trudinger-gridfun v1
//   # nx=<int> nt=<int> x_min=<f> x_max=<f> t_min=<f> t_max=<f>
//   <nt lines, each nx space-separated floats>
//
// Floats are written with the shortest representation that round-trips.

void write_gridfun(std::ostream& os, const GridFunction& u);
void write_gridfun_file(const std::filesystem::path& path, const GridFunction& u);
GridFunction read_gridfun(std::istream& is);
GridFunction read_gridfun_file(const std::filesystem::path& path);

}  // namespace trudinger
