#pragma once

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

#include "polaron/common.hpp"
#include "polaron/rng.hpp"

namespace polaron {

struct Interval {
    double s = 0, t = 0;
    double length() const { return t - s; }
};

// An active period: overlapping intervals with connected union. Holds the
// breakpoint partition of the union into elementary subintervals and, per
// interval, the contiguous run [lo_i, hi_i] of subintervals it covers.
struct IntervalCluster {
    std::vector<Interval> intervals;      // sorted by s
    std::vector<double> breakpoints;      // m+1 points
    std::vector<double> ell;              // m elementary lengths
    std::vector<std::size_t> run_lo, run_hi;

    std::size_t n() const { return intervals.size(); }
    std::size_t m() const { return ell.size(); }
    double j_length() const { return breakpoints.back() - breakpoints.front(); }

    bool covers(std::size_t interval, std::size_t sub) const {
        return run_lo[interval] <= sub && sub <= run_hi[interval];
    }
};

// Builds the breakpoint structure; throws if the union is disconnected.
inline IntervalCluster make_cluster(std::vector<Interval> ivs) {
    if (ivs.empty()) throw config_error("make_cluster: empty interval set");
    for (const auto& iv : ivs)
        if (!(iv.s < iv.t)) throw config_error("make_cluster: need s < t for every interval");
    std::sort(ivs.begin(), ivs.end(), [](const Interval& a, const Interval& b) { return a.s < b.s; });
    double reach = ivs[0].t;
    for (std::size_t i = 1; i < ivs.size(); ++i) {
        if (ivs[i].s > reach + 1e-12) throw config_error("make_cluster: union is not connected");
        reach = std::max(reach, ivs[i].t);
    }
    IntervalCluster c;
    c.intervals = std::move(ivs);
    std::vector<double> pts;
    pts.reserve(2 * c.intervals.size());
    for (const auto& iv : c.intervals) {
        pts.push_back(iv.s);
        pts.push_back(iv.t);
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end(), [](double a, double b) { return std::fabs(a - b) < 1e-14; }),
              pts.end());
    c.breakpoints = pts;
    c.ell.resize(pts.size() - 1);
    for (std::size_t j = 0; j + 1 < pts.size(); ++j) c.ell[j] = pts[j + 1] - pts[j];
    c.run_lo.resize(c.n());
    c.run_hi.resize(c.n());
    for (std::size_t i = 0; i < c.n(); ++i) {
        auto lo = std::lower_bound(pts.begin(), pts.end(), c.intervals[i].s - 1e-13) - pts.begin();
        auto hi = std::lower_bound(pts.begin(), pts.end(), c.intervals[i].t - 1e-13) - pts.begin();
        c.run_lo[i] = static_cast<std::size_t>(lo);
        c.run_hi[i] = static_cast<std::size_t>(hi) - 1;
    }
    return c;
}

struct UVector {
    std::vector<double> u;

    void check_positive() const {
        for (double v : u)
            if (!(v > 0) || !std::isfinite(v)) throw config_error("UVector: entries must be positive and finite");
    }
};

struct OverlapMatrix {
    std::size_t n = 0;
    std::vector<double> c;  // dense row-major n x n

    double& at(std::size_t i, std::size_t j) { return c[i * n + j]; }
    double at(std::size_t i, std::size_t j) const { return c[i * n + j]; }
};

// C_ij = |[s_i,t_i] cap [s_j,t_j]|, equal to A diag(ell) A^T; the identity is
// verified to 1e-12 on construction.
inline OverlapMatrix overlap_matrix(const IntervalCluster& cl) {
    OverlapMatrix om;
    om.n = cl.n();
    om.c.assign(om.n * om.n, 0.0);
    for (std::size_t i = 0; i < om.n; ++i)
        for (std::size_t j = 0; j < om.n; ++j) {
            const auto &a = cl.intervals[i], &b = cl.intervals[j];
            om.at(i, j) = std::max(0.0, std::min(a.t, b.t) - std::max(a.s, b.s));
        }
    for (std::size_t i = 0; i < om.n; ++i)
        for (std::size_t j = 0; j < om.n; ++j) {
            double s = 0;
            std::size_t lo = std::max(cl.run_lo[i], cl.run_lo[j]);
            std::size_t hi = std::min(cl.run_hi[i], cl.run_hi[j]);
            for (std::size_t k = lo; k <= hi && hi < cl.m(); ++k) s += cl.ell[k];
            if (std::fabs(s - om.at(i, j)) > 1e-12 * std::max(1.0, om.at(i, j)))
                throw numeric_error("overlap_matrix: A diag(ell) A^T mismatch");
        }
    return om;
}

// Poisson interval process with intensity alpha e^{-(t-s)} on -T<=s<t<=T:
// count ~ Poisson(alpha(2T-1+e^{-2T})); s by rejection from the marginal
// 1-e^{-(T-s)}, then t-s ~ Exp(1) truncated to (0, T-s].
inline std::vector<Interval> sample_poisson_intervals(double alpha, double T, Rng& rng) {
    if (!(alpha > 0) || !(T > 0)) throw config_error("sample_poisson_intervals: need alpha, T > 0");
    double mass = alpha * (2.0 * T - 1.0 + std::exp(-2.0 * T));
    std::poisson_distribution<long> pd(mass);
    long count = pd(rng);
    std::vector<Interval> out;
    out.reserve(static_cast<std::size_t>(count));
    for (long i = 0; i < count; ++i) {
        double s;
        for (;;) {
            s = -T + 2.0 * T * uniform(rng);
            if (uniform(rng) < 1.0 - std::exp(-(T - s))) break;
        }
        // truncated Exp(1) on (0, T-s]
        double cap = 1.0 - std::exp(-(T - s));
        double d = -std::log1p(-cap * uniform(rng));
        out.push_back({s, s + d});
    }
    std::sort(out.begin(), out.end(), [](const Interval& a, const Interval& b) { return a.s < b.s; });
    return out;
}

struct Decomposition {
    std::vector<double> gaps;               // clusters.size() + 1 entries
    std::vector<IntervalCluster> clusters;  // ordered
};

// Splits an interval set on the window [t_lo, t_hi] into alternating dormant
// gaps and clusters; touching intervals (t_i = s_j) merge.
inline Decomposition decompose_clusters(std::vector<Interval> ivs, double t_lo, double t_hi) {
    Decomposition d;
    if (ivs.empty()) {
        d.gaps.push_back(t_hi - t_lo);
        return d;
    }
    std::sort(ivs.begin(), ivs.end(), [](const Interval& a, const Interval& b) { return a.s < b.s; });
    std::vector<Interval> group;
    double reach = ivs[0].t;
    double prev_end = t_lo;
    group.push_back(ivs[0]);
    auto flush = [&](double next_start) {
        d.gaps.push_back(group.front().s - prev_end);
        d.clusters.push_back(make_cluster(group));
        prev_end = reach;
        group.clear();
        (void)next_start;
    };
    for (std::size_t i = 1; i < ivs.size(); ++i) {
        if (ivs[i].s > reach) {
            flush(ivs[i].s);
            group.push_back(ivs[i]);
            reach = ivs[i].t;
        } else {
            group.push_back(ivs[i]);
            reach = std::max(reach, ivs[i].t);
        }
    }
    flush(t_hi);
    d.gaps.push_back(t_hi - prev_end);
    return d;
}

// M/M/inf busy period: one birth at time 0 with Exp(1) lifetime; while the
// population is positive new individuals arrive at rate alpha, each with an
// independent Exp(1) lifetime. Returns the birth/death intervals (a connected
// cluster by construction).
inline IntervalCluster sample_busy_period(double alpha, Rng& rng, std::size_t cap = 1000000) {
    if (!(alpha > 0)) throw config_error("sample_busy_period: alpha must be > 0");
    std::vector<Interval> ivs;
    std::priority_queue<double, std::vector<double>, std::greater<>> deaths;
    double t = 0.0;
    double d0 = exponential(rng, 1.0);
    deaths.push(d0);
    ivs.push_back({0.0, d0});
    while (!deaths.empty()) {
        double next_birth = t + exponential(rng, alpha);
        double next_death = deaths.top();
        if (next_birth < next_death) {
            t = next_birth;
            double life = exponential(rng, 1.0);
            deaths.push(t + life);
            ivs.push_back({t, t + life});
            if (ivs.size() > cap)
                throw numeric_error("sample_busy_period: runaway cluster (> " + std::to_string(cap) +
                                    " individuals) at alpha=" + std::to_string(alpha));
        } else {
            t = next_death;
            deaths.pop();
        }
    }
    return make_cluster(std::move(ivs));
}

}  // namespace polaron
