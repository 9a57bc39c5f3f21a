#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "polaron/common.hpp"

namespace polaron {

// Uniform radial grid r_0 = 0 < r_1 < ... < r_N = r_max.
struct RadialGrid {
    std::size_t n = 0;  // number of intervals; n+1 nodes
    double r_max = 0;

    RadialGrid() = default;
    RadialGrid(std::size_t n_intervals, double rmax) : n(n_intervals), r_max(rmax) {
        if (n < 100) throw config_error("RadialGrid: need at least 100 intervals");
        if (r_max <= 0) throw config_error("RadialGrid: r_max must be positive");
    }

    double h() const { return r_max / static_cast<double>(n); }
    double r(std::size_t i) const { return h() * static_cast<double>(i); }
    std::size_t nodes() const { return n + 1; }
};

// Rotationally symmetric wave function psi(r) >= 0, L2-normalized:
// 4*pi*int r^2 psi^2 dr = 1.
struct RadialProfile {
    RadialGrid grid;
    std::vector<double> values;

    double norm_sq() const {
        std::vector<double> f(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) f[i] = sq(grid.r(i)) * sq(values[i]);
        return 4.0 * M_PI * trapezoid(f, grid.h());
    }

    bool is_normalized(double tol = 1e-8) const { return std::fabs(norm_sq() - 1.0) <= tol; }

    void check_invariants() const {
        if (values.size() != grid.nodes()) throw config_error("RadialProfile: size mismatch with grid");
        if (!is_normalized()) throw numeric_error("RadialProfile: not L2-normalized (4pi int r^2 psi^2 != 1)");
        if (std::fabs(values.back()) > 1e-6) throw numeric_error("RadialProfile: psi(r_max) does not decay (> 1e-6)");
    }
};

inline RadialProfile normalized(RadialGrid grid, std::vector<double> values) {
    RadialProfile p{grid, std::move(values)};
    double m = p.norm_sq();
    if (!(m > 0)) throw numeric_error("RadialProfile: zero mass, cannot normalize");
    double c = 1.0 / std::sqrt(m);
    for (double& v : p.values) v *= c;
    return p;
}

struct RadialPotential {
    RadialGrid grid;
    std::vector<double> values;

    double at(double r) const {
        // linear interpolation, 1/r-like tail beyond r_max
        if (r >= grid.r_max) return values.back() * grid.r_max / r;
        double t = r / grid.h();
        auto i = static_cast<std::size_t>(t);
        double w = t - static_cast<double>(i);
        return (1.0 - w) * values[i] + w * values[i + 1];
    }
};

// CSV with header "r,psi".
inline void write_profile_csv(const RadialProfile& p, std::ostream& os) {
    os << "r,psi\n";
    char buf[64];
    for (std::size_t i = 0; i < p.values.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", p.grid.r(i), p.values[i]);
        os << buf;
    }
}

inline RadialProfile read_profile_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("r,psi", 0) != 0) throw io_error("profile CSV: missing 'r,psi' header");
    std::vector<double> rs, ps;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos) throw io_error("profile CSV: malformed row: " + line);
        rs.push_back(std::stod(line.substr(0, comma)));
        ps.push_back(std::stod(line.substr(comma + 1)));
    }
    if (rs.size() < 2) throw io_error("profile CSV: too few rows");
    RadialGrid g(rs.size() - 1, rs.back());
    return RadialProfile{g, std::move(ps)};
}

}  // namespace polaron
