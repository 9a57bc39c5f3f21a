#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "polaron/common.hpp"
#include "polaron/rng.hpp"

namespace polaron {

// Empirical law of path increments omega(s+lag)-omega(s) at one lag.
struct IncrementLaw {
    double lag = 0;
    std::vector<Vec3> samples;

    std::size_t size() const { return samples.size(); }

    Vec3 mean() const {
        Vec3 m{};
        for (const auto& v : samples) m += v;
        return (samples.empty() ? 1.0 : 1.0 / static_cast<double>(samples.size())) * m;
    }

    // per-coordinate variances
    std::array<double, 3> variances() const {
        Vec3 m = mean();
        std::array<double, 3> v{0, 0, 0};
        for (const auto& s : samples)
            for (int c = 0; c < 3; ++c) v[c] += sq(s[c] - m[c]);
        double den = samples.size() > 1 ? static_cast<double>(samples.size() - 1) : 1.0;
        for (auto& x : v) x /= den;
        return v;
    }

    double mean_variance() const {
        auto v = variances();
        return (v[0] + v[1] + v[2]) / 3.0;
    }

    std::vector<double> radii() const {
        std::vector<double> r(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) r[i] = norm(samples[i]);
        return r;
    }
};

// Integrated autocorrelation time by Geyer's initial positive sequence.
inline double integrated_autocorr_time(const std::vector<double>& v) {
    std::size_t n = v.size();
    if (n < 8) return 1.0;
    double m = vec_mean(v);
    double var = 0;
    for (double x : v) var += sq(x - m);
    var /= static_cast<double>(n);
    if (var <= 0) return 1.0;
    auto rho = [&](std::size_t k) {
        double s = 0;
        for (std::size_t i = 0; i + k < n; ++i) s += (v[i] - m) * (v[i + k] - m);
        return s / static_cast<double>(n) / var;
    };
    double tau = 1.0;
    for (std::size_t k = 1; k + 1 < n / 2; k += 2) {
        double pair = rho(k) + rho(k + 1);
        if (pair <= 0) break;
        tau += 2.0 * pair;
    }
    return tau;
}

// L1 distance between an empirical sample of radii and reference bin masses
// on shared bin edges (last edge extends to infinity internally: both sides
// get an overflow bin).
inline double l1_histogram_distance(const std::vector<double>& radii, const std::vector<double>& edges,
                                    const std::vector<double>& reference_mass) {
    std::size_t nb = edges.size() - 1;
    if (reference_mass.size() != nb + 1) throw config_error("l1_histogram_distance: need nb+1 reference masses");
    std::vector<double> cnt(nb + 1, 0.0);
    for (double r : radii) {
        auto it = std::upper_bound(edges.begin(), edges.end(), r);
        std::size_t idx = static_cast<std::size_t>(it - edges.begin());
        if (idx == 0) idx = 1;  // r below first edge goes to first bin
        cnt[std::min(idx - 1, nb)] += 1.0;
    }
    double n = static_cast<double>(radii.size());
    double d = 0;
    for (std::size_t i = 0; i <= nb; ++i) d += std::fabs(cnt[i] / n - reference_mass[i]);
    return d;
}

inline double ks_distance(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == x) ++i;
        while (j < b.size() && b[j] == x) ++j;
        d = std::max(d, std::fabs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
    }
    return d;
}

struct TwoSampleResult {
    double energy_distance = 0;   // 2 E|X-Y| - E|X-X'| - E|Y-Y'|
    double stderr_ = 0;           // sd of the permutation null
    double null_q95 = 0;          // 95% quantile of the permutation null
    double ks_radial = 0;
};

// Energy distance between two 3D samples plus the radial KS statistic.
// The permutation null (label shuffles of the pooled sample) supplies the
// stderr and the 95% band.
inline TwoSampleResult compare_samples(const std::vector<Vec3>& xs, const std::vector<Vec3>& ys, Rng& rng,
                                       int n_permutations = 200) {
    std::size_t n = xs.size(), m = ys.size();
    if (n < 2 || m < 2) throw insufficient_sample_error("compare_samples: need at least 2 points per side");
    std::size_t tot = n + m;
    std::vector<Vec3> pool(xs);
    pool.insert(pool.end(), ys.begin(), ys.end());
    // full distance matrix (upper triangle), reused by every permutation
    std::vector<float> dist(tot * tot, 0.0f);
    for (std::size_t i = 0; i < tot; ++i)
        for (std::size_t j = i + 1; j < tot; ++j) {
            float d = static_cast<float>(norm(pool[i] - pool[j]));
            dist[i * tot + j] = d;
            dist[j * tot + i] = d;
        }
    std::vector<std::uint8_t> label(tot);
    auto statistic = [&]() {
        double sxy = 0, sxx = 0, syy = 0;
        for (std::size_t i = 0; i < tot; ++i)
            for (std::size_t j = i + 1; j < tot; ++j) {
                double d = dist[i * tot + j];
                if (label[i] != label[j])
                    sxy += d;
                else if (label[i] == 0)
                    sxx += d;
                else
                    syy += d;
            }
        double nd = static_cast<double>(n), md = static_cast<double>(m);
        return 2.0 * sxy / (nd * md) - 2.0 * sxx / (nd * nd) - 2.0 * syy / (md * md);
    };
    for (std::size_t i = 0; i < tot; ++i) label[i] = i < n ? 0 : 1;
    TwoSampleResult res;
    res.energy_distance = statistic();
    std::vector<double> null_stats(n_permutations);
    for (int p = 0; p < n_permutations; ++p) {
        for (std::size_t i = tot - 1; i > 0; --i) {
            std::uniform_int_distribution<std::size_t> d(0, i);
            std::swap(label[i], label[d(rng)]);
        }
        null_stats[p] = statistic();
    }
    res.stderr_ = std::sqrt(vec_variance(null_stats));
    std::sort(null_stats.begin(), null_stats.end());
    res.null_q95 = null_stats[static_cast<std::size_t>(0.95 * (n_permutations - 1))];
    std::vector<double> rx(n), ry(m);
    for (std::size_t i = 0; i < n; ++i) rx[i] = norm(xs[i]);
    for (std::size_t j = 0; j < m; ++j) ry[j] = norm(ys[j]);
    res.ks_radial = ks_distance(std::move(rx), std::move(ry));
    return res;
}

}  // namespace polaron
