#include "trudinger/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "trudinger/num.hpp"

namespace trudinger {

void SpaceTimeGrid::validate() const {
    if (nx < 2 || nt < 2) throw std::invalid_argument("grid needs nx >= 2 and nt >= 2");
    if (!(x_max > x_min) || !(t_max > t_min))
        throw std::invalid_argument("grid extents must be increasing");
    if (!(dx() > 0.0) || !(dt() > 0.0))
        throw std::invalid_argument("grid spacing must be positive");
}

IndexBox whole(const SpaceTimeGrid& g) { return {0, g.nx - 1, 0, g.nt - 1}; }

IndexBox intersect(const SpaceTimeGrid& g, const Cylinder& c) {
    const double tol_x = 1e-9 * g.dx();
    const double tol_t = 1e-9 * g.dt();
    IndexBox box{g.nx, -1, g.nt, -1};
    for (int i = 0; i < g.nx; ++i) {
        if (std::abs(g.x(i) - c.center_x) <= c.r + tol_x) {
            box.i_lo = std::min(box.i_lo, i);
            box.i_hi = std::max(box.i_hi, i);
        }
    }
    for (int j = 0; j < g.nt; ++j) {
        const double t = g.t(j);
        if (t - (c.top_t - c.r) > tol_t && t <= c.top_t + tol_t) {
            box.j_lo = std::min(box.j_lo, j);
            box.j_hi = std::max(box.j_hi, j);
        }
    }
    return box;
}

GridFunction::GridFunction(SpaceTimeGrid grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
    grid_.validate();
    if (values_.size() != static_cast<size_t>(grid_.size()))
        throw std::invalid_argument("value count does not match grid");
    auto [lo, hi] = std::minmax_element(values_.begin(), values_.end());
    m_lo_ = *lo;
    m_hi_ = *hi;
}

ModulusOfContinuity::ModulusOfContinuity(std::vector<std::pair<double, double>> bp)
    : pts_(std::move(bp)) {
    if (pts_.empty()) throw std::invalid_argument("modulus needs breakpoints");
    if (pts_.front().first > 0.0) pts_.insert(pts_.begin(), {0.0, 0.0});
    if (pts_.front().first != 0.0 || pts_.front().second != 0.0)
        throw std::invalid_argument("modulus must start at (0, 0)");
    for (size_t k = 1; k < pts_.size(); ++k) {
        if (!(pts_[k].first > pts_[k - 1].first))
            throw std::invalid_argument("modulus breakpoints must have increasing s");
        if (pts_[k].second < pts_[k - 1].second)
            throw std::invalid_argument("modulus must be nondecreasing");
    }
}

ModulusOfContinuity ModulusOfContinuity::zero(double s_max) {
    return ModulusOfContinuity({{0.0, 0.0}, {s_max, 0.0}});
}

ModulusOfContinuity ModulusOfContinuity::linear(double slope, double s_max) {
    if (!(s_max > 0.0)) throw std::invalid_argument("modulus needs s_max > 0");
    return ModulusOfContinuity({{0.0, 0.0}, {s_max, slope * s_max}});
}

double ModulusOfContinuity::operator()(double s) const {
    if (s < 0.0) throw std::invalid_argument("modulus argument must be >= 0");
    if (s >= pts_.back().first) return pts_.back().second;
    auto it = std::upper_bound(pts_.begin(), pts_.end(), s,
                               [](double v, const auto& p) { return v < p.first; });
    const auto& [s1, w1] = *it;
    const auto& [s0, w0] = *(it - 1);
    return w0 + (w1 - w0) * (s - s0) / (s1 - s0);
}

bool ModulusOfContinuity::strictly_increasing() const {
    for (size_t k = 1; k < pts_.size(); ++k)
        if (!(pts_[k].second > pts_[k - 1].second)) return false;
    return true;
}

double ModulusOfContinuity::inverse(double w) const {
    if (!strictly_increasing())
        throw std::domain_error("modulus inverse needs a strictly increasing curve");
    if (w < 0.0 || w > cap())
        throw std::domain_error("modulus inverse: value outside range");
    auto it = std::lower_bound(pts_.begin(), pts_.end(), w,
                               [](const auto& p, double v) { return p.second < v; });
    if (it == pts_.begin()) return 0.0;
    const auto& [s1, w1] = *it;
    const auto& [s0, w0] = *(it - 1);
    return s0 + (s1 - s0) * (w - w0) / (w1 - w0);
}

double oscillation(const GridFunction& u, const Cylinder& region) {
    const IndexBox box = intersect(u.grid(), region);
    if (box.empty()) throw std::invalid_argument("region outside grid");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (int j = box.j_lo; j <= box.j_hi; ++j)
        for (int i = box.i_lo; i <= box.i_hi; ++i) {
            lo = std::min(lo, u(i, j));
            hi = std::max(hi, u(i, j));
        }
    return hi - lo;
}

double oscillation(const GridFunction& u) { return u.max_value() - u.min_value(); }

ModulusOfContinuity optimal_modulus(const GridFunction& u, const IndexBox& box,
                                    Direction dir) {
    if (box.empty()) throw std::invalid_argument("region outside grid");
    const int n = dir == Direction::space ? box.nx() : box.nt();
    if (n < 2) throw std::invalid_argument("region needs >= 2 nodes in direction");
    const double h = dir == Direction::space ? u.grid().dx() : u.grid().dt();

    // Largest |difference| at each exact lag, then running max for the
    // "distance <= s" envelope.
    std::vector<double> at_lag(static_cast<size_t>(n), 0.0);
    if (dir == Direction::space) {
        for (int j = box.j_lo; j <= box.j_hi; ++j)
            for (int k = 1; k < n; ++k)
                for (int i = box.i_lo; i + k <= box.i_hi; ++i)
                    at_lag[k] = std::max(at_lag[k], std::abs(u(i + k, j) - u(i, j)));
    } else {
        for (int i = box.i_lo; i <= box.i_hi; ++i)
            for (int k = 1; k < n; ++k)
                for (int j = box.j_lo; j + k <= box.j_hi; ++j)
                    at_lag[k] = std::max(at_lag[k], std::abs(u(i, j + k) - u(i, j)));
    }
    std::vector<std::pair<double, double>> bp(static_cast<size_t>(n));
    double run = 0.0;
    for (int k = 0; k < n; ++k) {
        run = std::max(run, at_lag[k]);
        bp[k] = {k * h, run};
    }
    return ModulusOfContinuity(std::move(bp));
}

ModulusOfContinuity optimal_modulus(const GridFunction& u, const Cylinder& region,
                                    Direction dir) {
    return optimal_modulus(u, intersect(u.grid(), region), dir);
}

ModulusOfContinuity optimal_modulus(const GridFunction& u, Direction dir) {
    return optimal_modulus(u, whole(u.grid()), dir);
}

GridFunction restrict_to(const GridFunction& u, const IndexBox& box) {
    if (box.empty()) throw std::invalid_argument("region outside grid");
    const SpaceTimeGrid& g = u.grid();
    SpaceTimeGrid sub;
    sub.x_min = g.x(box.i_lo);
    sub.x_max = g.x(box.i_hi);
    sub.t_min = g.t(box.j_lo);
    sub.t_max = g.t(box.j_hi);
    sub.nx = box.nx();
    sub.nt = box.nt();
    if (sub.nx < 2 || sub.nt < 2)
        throw std::invalid_argument("restriction needs >= 2 nodes per direction");
    std::vector<double> v;
    v.reserve(static_cast<size_t>(sub.size()));
    for (int j = box.j_lo; j <= box.j_hi; ++j)
        for (int i = box.i_lo; i <= box.i_hi; ++i) v.push_back(u(i, j));
    return GridFunction(sub, std::move(v));
}

GridFunction restrict_to(const GridFunction& u, const Cylinder& region) {
    return restrict_to(u, intersect(u.grid(), region));
}

void write_gridfun(std::ostream& os, const GridFunction& u) {
    const SpaceTimeGrid& g = u.grid();
    os << "# trudinger-gridfun v1\n";
    os << "# nx=" << g.nx << " nt=" << g.nt << " x_min=" << format_double(g.x_min)
       << " x_max=" << format_double(g.x_max) << " t_min=" << format_double(g.t_min)
       << " t_max=" << format_double(g.t_max) << "\n";
    for (int j = 0; j < g.nt; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            if (i) os << ' ';
            os << format_double(u(i, j));
        }
        os << '\n';
    }
}

void write_gridfun_file(const std::filesystem::path& path, const GridFunction& u) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
    write_gridfun(os, u);
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        size_t b = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
        if (i > b) out.push_back(line.substr(b, i - b));
    }
    return out;
}

std::string_view header_field(std::string_view line, std::string_view key) {
    const std::string pat = std::string(key) + "=";
    size_t pos = line.find(pat);
    if (pos == std::string_view::npos)
        throw std::runtime_error("gridfun header missing field " + std::string(key));
    size_t b = pos + pat.size();
    size_t e = b;
    while (e < line.size() && line[e] != ' ' && line[e] != '\t') ++e;
    return line.substr(b, e - b);
}

}  // namespace

GridFunction read_gridfun(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "# trudinger-gridfun v1")
        throw std::runtime_error("gridfun: bad magic line");
    if (!std::getline(is, line) || line.rfind("# ", 0) != 0)
        throw std::runtime_error("gridfun: missing header line");

    SpaceTimeGrid g;
    g.nx = static_cast<int>(parse_int(header_field(line, "nx")));
    g.nt = static_cast<int>(parse_int(header_field(line, "nt")));
    g.x_min = parse_double(header_field(line, "x_min"));
    g.x_max = parse_double(header_field(line, "x_max"));
    g.t_min = parse_double(header_field(line, "t_min"));
    g.t_max = parse_double(header_field(line, "t_max"));
    g.validate();

    std::vector<double> v;
    v.reserve(static_cast<size_t>(g.size()));
    for (int j = 0; j < g.nt; ++j) {
        if (!std::getline(is, line))
            throw std::runtime_error("gridfun: expected " + std::to_string(g.nt) +
                                     " data lines, got " + std::to_string(j));
        auto toks = split_ws(line);
        if (static_cast<int>(toks.size()) != g.nx)
            throw std::runtime_error("gridfun: line " + std::to_string(j + 3) + " has " +
                                     std::to_string(toks.size()) + " values, expected " +
                                     std::to_string(g.nx));
        for (auto tok : toks) v.push_back(parse_double(tok));
    }
    while (std::getline(is, line)) {
        if (!split_ws(line).empty())
            throw std::runtime_error("gridfun: trailing data after last row");
    }
    return GridFunction(g, std::move(v));
}

GridFunction read_gridfun_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path.string());
    return read_gridfun(is);
}

}  // namespace trudinger
