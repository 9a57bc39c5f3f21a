#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "polaron/clusters.hpp"
#include "polaron/gaussians.hpp"
#include "polaron/rng.hpp"

namespace polaron {

struct RenewalOptions {
    std::size_t n_clusters = 400;      // ensemble size for q estimates
    FOptions f_options{};
    std::size_t gibbs_sweeps = 30;
    std::size_t busy_cap = 1000000;
    bool force_unit_weight = false;    // test mode: F == 1
};

// One sampled cluster with its frozen log weight pieces; reused across lambda
// (common random numbers).
struct WeightedCluster {
    IntervalCluster cluster;
    double log_f = 0;
    double j_length = 0;

    double log_weight(double lambda) const { return -lambda * j_length + log_f; }
};

inline std::vector<WeightedCluster> sample_cluster_ensemble(double alpha, Rng& rng, const RenewalOptions& opt = {}) {
    std::vector<WeightedCluster> out;
    out.reserve(opt.n_clusters);
    for (std::size_t c = 0; c < opt.n_clusters; ++c) {
        WeightedCluster wc;
        wc.cluster = sample_busy_period(alpha, rng, opt.busy_cap);
        wc.j_length = wc.cluster.j_length();
        wc.log_f = opt.force_unit_weight
                       ? 0.0
                       : cluster_weight_F(wc.cluster, FMode::automatic, &rng, opt.f_options).log_value;
        out.push_back(std::move(wc));
    }
    return out;
}

struct QEstimate {
    double lambda = 0;
    double q = 0;
    double stderr_ = 0;
    bool heavy_tail = false;  // top 1% of weights carry > 50% of the sum
};

// q(lambda) = alpha/(alpha+lambda) * mean over clusters of e^{-lambda |J|} F;
// the dormant factor E[e^{-lambda |xi'|}] for xi' ~ Exp(alpha) is analytic.
inline QEstimate q_of_ensemble(double alpha, double lambda, const std::vector<WeightedCluster>& ensemble) {
    if (!(alpha + lambda > 0)) throw config_error("q_lambda: need lambda > -alpha for the dormant factor");
    std::size_t n = ensemble.size();
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        double lw = ensemble[i].log_weight(lambda);
        w[i] = lw < -700.0 ? 0.0 : std::exp(lw);
    }
    double dormant = alpha / (alpha + lambda);
    QEstimate qe;
    qe.lambda = lambda;
    qe.q = dormant * vec_mean(w);
    qe.stderr_ = dormant * std::sqrt(vec_variance(w) / double(n));
    std::vector<double> sorted(w);
    std::sort(sorted.begin(), sorted.end());
    double total = 0;
    for (double x : sorted) total += x;
    std::size_t top = std::max<std::size_t>(1, n / 100);
    double top_sum = 0;
    for (std::size_t i = n - top; i < n; ++i) top_sum += sorted[i];
    qe.heavy_tail = total > 0 && top_sum > 0.5 * total;
    return qe;
}

inline QEstimate q_lambda(double alpha, double lambda, std::size_t n_clusters, Rng& rng, RenewalOptions opt = {}) {
    opt.n_clusters = n_clusters;
    auto ens = sample_cluster_ensemble(alpha, rng, opt);
    return q_of_ensemble(alpha, lambda, ens);
}

struct LambdaSolveResult {
    double lambda_star = 0;
    QEstimate q_at_root;
    std::vector<QEstimate> curve;  // evaluations made during the solve
};

// Stochastic bisection for q(lambda) = 1 on a fixed cluster ensemble (common
// random numbers: only the tilt e^{-lambda|J|} changes across lambda), so the
// estimated curve is exactly monotone and the bisection is deterministic
// given the ensemble.
inline LambdaSolveResult solve_lambda(double alpha, double lambda_lo, double lambda_hi, double tol, Rng& rng,
                                      RenewalOptions opt = {}) {
    if (!(lambda_lo < lambda_hi)) throw config_error("solve_lambda: need lambda_lo < lambda_hi");
    if (!(tol > 0)) throw config_error("solve_lambda: tol must be positive");
    auto ens = sample_cluster_ensemble(alpha, rng, opt);
    LambdaSolveResult res;
    QEstimate qlo = q_of_ensemble(alpha, lambda_lo, ens);
    QEstimate qhi = q_of_ensemble(alpha, lambda_hi, ens);
    res.curve.push_back(qlo);
    res.curve.push_back(qhi);
    if (!(qlo.q > 1.0 && qhi.q < 1.0))
        throw root_not_found_error("solve_lambda: no sign change of q-1 in bracket [" + std::to_string(lambda_lo) +
                                   ", " + std::to_string(lambda_hi) + "] at alpha=" + std::to_string(alpha) +
                                   " (q_lo=" + std::to_string(qlo.q) + ", q_hi=" + std::to_string(qhi.q) + ")");
    while (lambda_hi - lambda_lo > tol) {
        double mid = 0.5 * (lambda_lo + lambda_hi);
        QEstimate qm = q_of_ensemble(alpha, mid, ens);
        res.curve.push_back(qm);
        if (qm.q > 1.0)
            lambda_lo = mid;
        else
            lambda_hi = mid;
    }
    res.lambda_star = 0.5 * (lambda_lo + lambda_hi);
    res.q_at_root = q_of_ensemble(alpha, res.lambda_star, ens);
    res.curve.push_back(res.q_at_root);
    std::sort(res.curve.begin(), res.curve.end(),
              [](const QEstimate& a, const QEstimate& b) { return a.lambda < b.lambda; });
    return res;
}

struct TiltedSample {
    IntervalCluster cluster;
    UVector u;
    double j_length = 0;
};

struct TiltedSamplerStats {
    double acceptance = 0;
    double envelope = 0;
    std::size_t envelope_rebuilds = 0;
};

// xi from the tilted cluster law by rejection from Pi_alpha with weight
// e^{-lambda |J|} F(xi); the envelope M is tracked adaptively from a pilot
// and accumulation restarts if a later weight invalidates it. u | xi by the
// exact Gibbs sampler.
inline std::vector<TiltedSample> sample_tilted_clusters(double alpha, double lambda, std::size_t n_samples, Rng& rng,
                                                        RenewalOptions opt = {}, TiltedSamplerStats* stats = nullptr,
                                                        std::size_t pilot = 256) {
    auto log_weight = [&](const IntervalCluster& cl) -> double {
        if (opt.force_unit_weight) return -lambda * cl.j_length();
        double lf = cluster_weight_F(cl, FMode::automatic, &rng, opt.f_options).log_value;
        return -lambda * cl.j_length() + lf;
    };
    double log_m = -1e300;
    for (std::size_t i = 0; i < pilot; ++i) {
        IntervalCluster cl = sample_busy_period(alpha, rng, opt.busy_cap);
        log_m = std::max(log_m, log_weight(cl));
    }
    log_m += std::log(1.5);
    std::vector<TiltedSample> out;
    std::size_t proposals = 0, rebuilds = 0;
    const std::size_t max_proposals = std::max<std::size_t>(200000, 20000 * n_samples);
    while (out.size() < n_samples) {
        if (++proposals > max_proposals)
            throw efficiency_error("sample_tilted_clusters: acceptance below 1e-4; use the importance-sampling mode");
        IntervalCluster cl = sample_busy_period(alpha, rng, opt.busy_cap);
        double lw = log_weight(cl);
        if (lw > log_m) {  // envelope violated: enlarge and restart accumulation
            log_m = lw + std::log(1.5);
            out.clear();
            ++rebuilds;
            continue;
        }
        if (std::log(uniform(rng)) < lw - log_m) {
            TiltedSample ts;
            ts.j_length = cl.j_length();
            ts.u = opt.force_unit_weight ? UVector{std::vector<double>(cl.n(), 1e-12)}
                                         : sample_u_conditional(cl, rng, opt.gibbs_sweeps);
            ts.cluster = std::move(cl);
            out.push_back(std::move(ts));
        }
    }
    if (stats) {
        stats->acceptance = double(n_samples) / double(proposals);
        stats->envelope = log_m;
        stats->envelope_rebuilds = rebuilds;
    }
    return out;
}

enum class Sigma2Mode { automatic, rejection, importance };

struct Sigma2Result {
    double value = 0;
    double stderr_ = 0;
    Sigma2Mode mode = Sigma2Mode::rejection;
    bool heavy_tail = false;
    std::size_t n_samples = 0;
};

// sigma^2(alpha) = [(alpha+lambda)^{-1} + E_tilted[end-to-end variance]] /
//                  [(alpha+lambda)^{-1} + E_tilted[sigma*]].
// Rejection mode averages over tilted samples; the importance mode
// self-normalizes weights e^{-lambda|J|}F over Pi_alpha proposals (used when
// a rejection pilot shows the acceptance collapsing). Stderr by the delta
// method on the weighted sums.
inline Sigma2Result sigma2(double alpha, double lambda, std::size_t n_samples, Rng& rng,
                           Sigma2Mode mode = Sigma2Mode::automatic, RenewalOptions opt = {}) {
    const double c = 1.0 / (alpha + lambda);
    std::vector<double> w, wv, ws;
    Sigma2Result res;
    if (mode == Sigma2Mode::automatic) {
        // cheap pilot: estimate the rejection acceptance from weight spread
        std::vector<double> lws;
        Rng pilot_rng(rng());
        for (std::size_t i = 0; i < 64; ++i) {
            IntervalCluster cl = sample_busy_period(alpha, pilot_rng, opt.busy_cap);
            double lf = opt.force_unit_weight
                            ? 0.0
                            : cluster_weight_F(cl, FMode::automatic, &pilot_rng, opt.f_options).log_value;
            lws.push_back(-lambda * cl.j_length() + lf);
        }
        double mx = *std::max_element(lws.begin(), lws.end());
        double mean_rel = 0;
        for (double lw : lws) mean_rel += std::exp(lw - mx);
        mean_rel /= double(lws.size());
        mode = mean_rel > 1e-3 ? Sigma2Mode::rejection : Sigma2Mode::importance;
    }
    res.mode = mode;
    if (mode == Sigma2Mode::rejection) {
        auto samples = sample_tilted_clusters(alpha, lambda, n_samples, rng, opt);
        for (const auto& ts : samples) {
            w.push_back(1.0);
            wv.push_back(opt.force_unit_weight ? ts.j_length : cluster_end_to_end_variance(ts.cluster, ts.u));
            ws.push_back(ts.j_length);
        }
    } else {
        for (std::size_t i = 0; i < n_samples; ++i) {
            IntervalCluster cl = sample_busy_period(alpha, rng, opt.busy_cap);
            double lf = opt.force_unit_weight
                            ? 0.0
                            : cluster_weight_F(cl, FMode::automatic, &rng, opt.f_options).log_value;
            double lw = -lambda * cl.j_length() + lf;
            double wi = lw < -700.0 ? 0.0 : std::exp(lw);
            double vi = 0;
            if (wi > 0) {
                UVector uv = opt.force_unit_weight ? UVector{std::vector<double>(cl.n(), 1e-12)}
                                                   : sample_u_conditional(cl, rng, opt.gibbs_sweeps);
                vi = opt.force_unit_weight ? cl.j_length() : cluster_end_to_end_variance(cl, uv);
            }
            w.push_back(wi);
            wv.push_back(wi * vi);
            ws.push_back(wi * cl.j_length());
        }
    }
    res.n_samples = w.size();
    double mw = vec_mean(w), mwv = vec_mean(wv), mws = vec_mean(ws);
    if (!(mw > 0)) throw numeric_error("sigma2: all weights vanished");
    double num = c + mwv / mw, den = c + mws / mw;
    res.value = num / den;
    // delta method on the means of (w, wv, ws)
    double n = double(w.size());
    auto cov = [&](const std::vector<double>& a, double ma, const std::vector<double>& b, double mb) {
        double s = 0;
        for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
        return s / (n - 1.0) / n;
    };
    // gradient of f(mw, mwv, mws) = (c + mwv/mw) / (c + mws/mw)
    double g1 = (-mwv / sq(mw) * den + num * mws / sq(mw)) / sq(den);
    double g2 = (1.0 / mw) / den;
    double g3 = -num / sq(den) / mw;
    double var = sq(g1) * cov(w, mw, w, mw) + sq(g2) * cov(wv, mwv, wv, mwv) + sq(g3) * cov(ws, mws, ws, mws) +
                 2 * g1 * g2 * cov(w, mw, wv, mwv) + 2 * g1 * g3 * cov(w, mw, ws, mws) +
                 2 * g2 * g3 * cov(wv, mwv, ws, mws);
    res.stderr_ = std::sqrt(std::max(0.0, var));
    std::vector<double> sorted(w);
    std::sort(sorted.begin(), sorted.end());
    double total = 0;
    for (double x : sorted) total += x;
    std::size_t top = std::max<std::size_t>(1, sorted.size() / 100);
    double top_sum = 0;
    for (std::size_t i = sorted.size() - top; i < sorted.size(); ++i) top_sum += sorted[i];
    res.heavy_tail = total > 0 && top_sum > 0.5 * total;
    return res;
}

struct Segment {
    bool dormant = true;
    double length = 0;
    IntervalCluster cluster;  // valid when !dormant
    UVector u;
};

struct MixingConfiguration {
    double horizon = 0;
    std::vector<Segment> segments;
};

struct AssembledPath {
    MixingConfiguration config;
    double dt = 0;                // requested resolution; steps are dt except segment remainders
    std::vector<double> times;    // strictly increasing, starts at 0
    std::vector<Vec3> positions;  // same length as times

    double span() const { return times.back(); }

    Vec3 at(double t) const {
        auto it = std::lower_bound(times.begin(), times.end(), t);
        if (it == times.begin()) return positions.front();
        if (it == times.end()) return positions.back();
        std::size_t i = static_cast<std::size_t>(it - times.begin());
        double w = (t - times[i - 1]) / (times[i] - times[i - 1]);
        return positions[i - 1] + w * (positions[i] - positions[i - 1]);
    }
};

// Alternates Exp(alpha+lambda) dormant gaps carrying Brownian increments with
// tilted clusters carrying the bridge increments; within-subinterval points
// are filled by Brownian bridge at the requested resolution (exact dt steps
// plus one remainder step per piece). The nominal horizon is extended to the
// end of the last cycle.
inline AssembledPath assemble_stationary_polaron(double alpha, double lambda, double horizon, double dt, Rng& rng,
                                                 RenewalOptions opt = {}) {
    if (!(horizon > 0) || !(dt > 0)) throw config_error("assemble_stationary_polaron: need horizon, dt > 0");
    AssembledPath ap;
    ap.dt = dt;
    ap.config.horizon = horizon;
    ap.times.push_back(0.0);
    ap.positions.push_back(Vec3{});
    double t = 0;
    Vec3 x{};
    auto substeps = [&](double len) {
        std::vector<double> s(static_cast<std::size_t>(std::floor(len / dt)), dt);
        double rem = len - dt * double(s.size());
        if (rem > 1e-12) s.push_back(rem);
        if (s.empty()) s.push_back(len);
        return s;
    };
    auto fill_brownian = [&](double len) {
        for (double step : substeps(len)) {
            x += std::sqrt(step) * normal3(rng);
            t += step;
            ap.times.push_back(t);
            ap.positions.push_back(x);
        }
    };
    // exact Brownian bridge over [0,len] pinned to `target`:
    // w_i = z_i + (s_i/len)(target - sum z)
    auto fill_bridge = [&](double len, const Vec3& target) {
        auto s = substeps(len);
        std::vector<Vec3> z(s.size());
        Vec3 zsum{};
        for (std::size_t i = 0; i < s.size(); ++i) {
            z[i] = std::sqrt(s[i]) * normal3(rng);
            zsum += z[i];
        }
        for (std::size_t i = 0; i < s.size(); ++i) {
            x += z[i] + (s[i] / len) * (target - zsum);
            t += s[i];
            ap.times.push_back(t);
            ap.positions.push_back(x);
        }
    };
    // tilted clusters are drawn in batches (one rejection pilot per batch,
    // not per cycle)
    std::vector<TiltedSample> queue;
    std::size_t queue_next = 0;
    double mean_j = 1.0;
    std::size_t drawn = 0;
    auto next_tilted = [&]() -> TiltedSample {
        if (queue_next == queue.size()) {
            double cycle = 1.0 / (alpha + lambda) + mean_j;
            auto want = static_cast<std::size_t>((horizon - t) / std::max(cycle, 1e-6)) + 8;
            want = std::min<std::size_t>(std::max<std::size_t>(want, 16), 4096);
            queue = sample_tilted_clusters(alpha, lambda, want, rng, opt);
            queue_next = 0;
        }
        TiltedSample ts = std::move(queue[queue_next++]);
        mean_j = (mean_j * double(drawn) + ts.j_length) / double(drawn + 1);
        ++drawn;
        return ts;
    };
    while (t < horizon) {
        Segment gap;
        gap.dormant = true;
        gap.length = exponential(rng, alpha + lambda);
        fill_brownian(gap.length);
        ap.config.segments.push_back(std::move(gap));
        TiltedSample tilted = next_tilted();
        Segment seg;
        seg.dormant = false;
        seg.length = tilted.j_length;
        seg.cluster = std::move(tilted.cluster);
        seg.u = std::move(tilted.u);
        std::vector<Vec3> inc = opt.force_unit_weight
                                    ? [&] {
                                          std::vector<Vec3> v(seg.cluster.m());
                                          for (std::size_t j = 0; j < v.size(); ++j)
                                              v[j] = std::sqrt(seg.cluster.ell[j]) * normal3(rng);
                                          return v;
                                      }()
                                    : gaussian_bridge_increments(seg.cluster, seg.u, rng);
        for (std::size_t j = 0; j < seg.cluster.m(); ++j) fill_bridge(seg.cluster.ell[j], inc[j]);
        ap.config.segments.push_back(std::move(seg));
    }
    return ap;
}

}  // namespace polaron
