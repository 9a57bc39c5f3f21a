#pragma once

#include <cmath>
#include <vector>

#include "polaron/common.hpp"
#include "polaron/stats.hpp"

namespace polaron {

// Path on [0, span] sampled at uniform dt, omega(0) = 0 convention not
// required; evaluation in between nodes by linear interpolation.
struct SampledPath {
    double dt = 0;
    std::vector<Vec3> positions;

    double span() const { return dt * double(positions.size() - 1); }

    Vec3 value(double s) const {
        if (s <= 0) return positions.front();
        double t = s / dt;
        auto i = static_cast<std::size_t>(t);
        if (i + 1 >= positions.size()) return positions.back();
        double w = t - double(i);
        return positions[i] + w * (positions[i + 1] - positions[i]);
    }
};

// omega_T(s) = n omega(T) + omega(r) for s = nT + r, 0 <= r < T.
inline Vec3 periodize(const SampledPath& path, double s) {
    double T = path.span();
    double n = std::floor(s / T);
    double r = s - n * T;
    return n * path.value(T) + path.value(r);
}

// Time-averaged increment law omega_T(s+lag) - omega_T(s) over s in
// [0, window], with periodization past the right end; s advances on a stride
// to keep samples manageable.
inline IncrementLaw empirical_increment_statistics(const SampledPath& path, double lag, double window,
                                                   double stride) {
    if (!(lag > 0) || lag > window || window > path.span() + 1e-9)
        throw config_error("empirical_increment_statistics: need 0 < lag <= window <= span");
    IncrementLaw law;
    law.lag = lag;
    for (double s = 0; s <= window; s += stride) law.samples.push_back(periodize(path, s + lag) - periodize(path, s));
    return law;
}

// Energy distance between the 3D increment samples plus the radial KS
// statistic; same-lag guard.
inline TwoSampleResult compare_increment_laws(const IncrementLaw& a, const IncrementLaw& b, Rng& rng,
                                              int n_permutations = 200) {
    if (std::fabs(a.lag - b.lag) > 1e-12) throw config_error("compare_increment_laws: mismatched lags");
    if (a.size() < 1000 || b.size() < 1000)
        throw insufficient_sample_error("compare_increment_laws: need >= 1e3 samples per side");
    return compare_samples(a.samples, b.samples, rng, n_permutations);
}

}  // namespace polaron
