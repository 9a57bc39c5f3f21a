#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "polaron/grid.hpp"
#include "polaron/pekar.hpp"
#include "polaron/rng.hpp"
#include "polaron/stats.hpp"

namespace polaron {

struct PathSample {
    double dt = 0;
    std::vector<Vec3> positions;

    void check_invariants() const {
        if (positions.size() < 2) throw config_error("PathSample: need at least one step");
        if (!(dt > 0)) throw config_error("PathSample: dt must be positive");
        for (const auto& p : positions)
            if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
                throw numeric_error("PathSample: non-finite coordinate");
    }
};

using RadialDrift = std::function<double(double)>;

// Draw X_0 from the invariant density psi^2: radius by inverse CDF of
// 4 pi r^2 psi(r)^2 (tabulated trapezoid CDF, linear interpolation), direction
// uniform on the sphere.
inline Vec3 sample_stationary_start(const RadialProfile& p, Rng& rng) {
    p.check_invariants();
    const auto& g = p.grid;
    const double h = g.h();
    std::size_t nn = g.nodes();
    std::vector<double> cdf(nn, 0.0);
    std::vector<double> f(nn);
    for (std::size_t i = 0; i < nn; ++i) f[i] = 4.0 * M_PI * sq(g.r(i)) * sq(p.values[i]);
    for (std::size_t i = 1; i < nn; ++i) cdf[i] = cdf[i - 1] + 0.5 * h * (f[i] + f[i - 1]);
    double total = cdf.back();
    double u = uniform(rng) * total;
    auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    std::size_t i = std::max<std::size_t>(1, static_cast<std::size_t>(it - cdf.begin()));
    double seg = cdf[i] - cdf[i - 1];
    double w = seg > 0 ? (u - cdf[i - 1]) / seg : 0.0;
    double r = g.r(i - 1) + w * h;
    return r * unit_sphere(rng);
}

// Euler-Maruyama for dX = b(|X|) X/|X| dt + dW. The drift is zeroed inside
// |X| < 1e-8 (removable singularity of a smooth radial field).
inline PathSample euler_maruyama(const RadialDrift& drift, Vec3 x0, double dt, std::size_t n_steps, Rng& rng) {
    if (!(dt > 0) || dt > 1e-2) throw config_error("euler_maruyama: require 0 < dt <= 1e-2");
    PathSample path;
    path.dt = dt;
    path.positions.reserve(n_steps + 1);
    path.positions.push_back(x0);
    Vec3 x = x0;
    const double sd = std::sqrt(dt);
    for (std::size_t k = 0; k < n_steps; ++k) {
        double r = norm(x);
        Vec3 step = sd * normal3(rng);
        if (r >= 1e-8) {
            double b = drift(r);
            step += (b * dt / r) * x;
        }
        x += step;
        if (!std::isfinite(x.x) || !std::isfinite(x.y) || !std::isfinite(x.z))
            throw numeric_error("euler_maruyama: numerical blow-up at step " + std::to_string(k));
        path.positions.push_back(x);
    }
    return path;
}

// Collect increments omega(k*stride + lag) - omega(k*stride) over strided
// windows; stride defaults to 5*lag for near-independent windows.
inline IncrementLaw increment_law(const std::vector<PathSample>& paths, double lag, double stride_factor = 5.0) {
    IncrementLaw law;
    law.lag = lag;
    for (const auto& path : paths) {
        double dt = path.dt;
        auto lag_steps = static_cast<std::size_t>(std::llround(lag / dt));
        if (lag_steps == 0 || std::fabs(lag_steps * dt - lag) > 1e-9 * std::max(1.0, lag))
            throw config_error("increment_law: lag must be a multiple of dt");
        auto stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(stride_factor * lag / dt)));
        for (std::size_t k = 0; k + lag_steps < path.positions.size(); k += stride)
            law.samples.push_back(path.positions[k + lag_steps] - path.positions[k]);
    }
    if (law.samples.size() < 100)
        throw insufficient_sample_error("increment_law: fewer than 100 increments (" +
                                        std::to_string(law.samples.size()) + ")");
    return law;
}

// L1 distance between the radial histogram of visited points and the density
// 4 pi r^2 psi^2, on n_bins equal bins over [0, r_hi] plus an overflow bin.
inline double invariant_density_check(const std::vector<PathSample>& paths, const RadialProfile& p,
                                      std::size_t n_bins = 12, double r_hi = 0.0) {
    if (r_hi <= 0) {
        // default: cover the bulk of psi^2 (99.9% of mass)
        r_hi = p.grid.r_max;
        const auto& g = p.grid;
        std::vector<double> f(g.nodes());
        for (std::size_t i = 0; i < f.size(); ++i) f[i] = 4.0 * M_PI * sq(g.r(i)) * sq(p.values[i]);
        double total = trapezoid(f, g.h()), acc = 0;
        for (std::size_t i = 1; i < f.size(); ++i) {
            acc += 0.5 * g.h() * (f[i] + f[i - 1]);
            if (acc >= 0.999 * total) {
                r_hi = g.r(i);
                break;
            }
        }
    }
    std::vector<double> edges(n_bins + 1);
    for (std::size_t i = 0; i <= n_bins; ++i) edges[i] = r_hi * static_cast<double>(i) / static_cast<double>(n_bins);
    // reference masses by fine trapezoid on the profile grid
    std::vector<double> mass(n_bins + 1, 0.0);
    const auto& g = p.grid;
    const double h = g.h();
    double prev_f = 0.0;
    for (std::size_t i = 1; i < g.nodes(); ++i) {
        double f0 = 4.0 * M_PI * sq(g.r(i - 1)) * sq(p.values[i - 1]);
        double f1 = 4.0 * M_PI * sq(g.r(i)) * sq(p.values[i]);
        double cell = 0.5 * h * (f0 + f1);
        double mid = 0.5 * (g.r(i - 1) + g.r(i));
        auto idx = static_cast<std::size_t>(mid / r_hi * static_cast<double>(n_bins));
        mass[std::min(idx, n_bins)] += cell;
        (void)prev_f;
    }
    double total = 0;
    for (double v : mass) total += v;
    for (double& v : mass) v /= total;
    std::vector<double> radii;
    for (const auto& path : paths)
        for (const auto& x : path.positions) radii.push_back(norm(x));
    return l1_histogram_distance(radii, edges, mass);
}

}  // namespace polaron
