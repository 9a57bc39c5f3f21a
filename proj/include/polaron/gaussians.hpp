#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "polaron/banded.hpp"
#include "polaron/clusters.hpp"
#include "polaron/quadrature.hpp"
#include "polaron/rng.hpp"

namespace polaron {

inline constexpr double c0_coulomb = 0.7978845608028654;  // sqrt(2/pi)

// |x|^{-1} = c0 int_0^inf exp(-u^2 x^2 / 2) du; returns the quadrature's
// absolute deviation from 1/|x|.
inline double coulomb_gaussian_check(double x) {
    if (!(x > 0)) throw config_error("coulomb_gaussian_check: need |x| > 0");
    double q = c0_coulomb * integrate_halfline([&](double u) { return std::exp(-0.5 * u * u * x * x); },
                                               1e-13 / x);
    return std::fabs(q - 1.0 / x);
}

// bandwidth of the overlap structure: intervals sorted by s, i and j interact
// iff they overlap
inline std::size_t overlap_bandwidth(const IntervalCluster& cl) {
    std::size_t bw = 0;
    for (std::size_t i = 0; i < cl.n(); ++i)
        for (std::size_t j = i + 1; j < cl.n() && cl.intervals[j].s < cl.intervals[i].t; ++j)
            bw = std::max(bw, j - i);
    return bw;
}

// log Phi(xi, u) = -3/2 log det(I_n + C diag(u^2)); the determinant is taken
// on the symmetrized banded form I + D^{1/2} C D^{1/2}. The evaluator caches
// the overlap band so repeated u evaluations on one cluster stay cheap.
class PhiEvaluator {
  public:
    explicit PhiEvaluator(const IntervalCluster& cl)
        : n_(cl.n()), bw_(overlap_bandwidth(cl)), cband_(n_ * (bw_ + 1), 0.0), s_(n_, bw_) {
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = i; j <= std::min(n_ - 1, i + bw_); ++j) {
                const auto &a = cl.intervals[i], &b = cl.intervals[j];
                cband_[i * (bw_ + 1) + (j - i)] = std::max(0.0, std::min(a.t, b.t) - std::max(a.s, b.s));
            }
    }

    double log_phi(const std::vector<double>& u) {
        if (u.size() != n_) throw config_error("gaussian_normalizer: u size mismatch");
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = i; j <= std::min(n_ - 1, i + bw_); ++j)
                s_.at(j, i) = u[i] * u[j] * cband_[i * (bw_ + 1) + (j - i)] + (i == j ? 1.0 : 0.0);
        s_.factor();
        return -1.5 * s_.log_det();
    }

  private:
    std::size_t n_, bw_;
    std::vector<double> cband_;
    BandedSpd s_;
};

inline double log_gaussian_normalizer(const IntervalCluster& cl, const UVector& uv) {
    PhiEvaluator ev(cl);
    return ev.log_phi(uv.u);
}

inline double gaussian_normalizer(const IntervalCluster& cl, const UVector& uv) {
    double lp = log_gaussian_normalizer(cl, uv);
    if (!std::isfinite(lp)) throw numeric_error("gaussian_normalizer: non-finite determinant");
    return std::exp(lp);
}

// Bridge precision over the elementary subintervals (per coordinate):
// Lambda = diag(1/ell) + A^T diag(u^2) A, banded with the run structure.
inline BandedSpd bridge_precision(const IntervalCluster& cl, const UVector& uv) {
    std::size_t m = cl.m();
    std::size_t bw = 0;
    for (std::size_t i = 0; i < cl.n(); ++i) bw = std::max(bw, cl.run_hi[i] - cl.run_lo[i]);
    BandedSpd lam(m, bw);
    for (std::size_t j = 0; j < m; ++j) lam.at(j, j) = 1.0 / cl.ell[j];
    for (std::size_t i = 0; i < cl.n(); ++i) {
        double u2 = sq(uv.u[i]);
        for (std::size_t j = cl.run_lo[i]; j <= cl.run_hi[i]; ++j)
            for (std::size_t k = j; k <= cl.run_hi[i]; ++k) lam.at(k, j) += u2;
    }
    return lam;
}

// increments over the elementary subintervals, x ~ N(0, Lambda^{-1}) iid per
// coordinate
inline std::vector<Vec3> gaussian_bridge_increments(const IntervalCluster& cl, const UVector& uv, Rng& rng) {
    BandedSpd lam = bridge_precision(cl, uv);
    lam.factor();
    std::size_t m = cl.m();
    std::vector<std::vector<double>> coord(3);
    for (int c = 0; c < 3; ++c) {
        std::vector<double> z(m);
        for (auto& v : z) v = normal(rng);
        coord[c] = lam.solve_lt(std::move(z));
    }
    std::vector<Vec3> x(m);
    for (std::size_t j = 0; j < m; ++j) x[j] = {coord[0][j], coord[1][j], coord[2][j]};
    return x;
}

// per-coordinate variance of the summed increments, 1^T Lambda^{-1} 1
inline double cluster_end_to_end_variance(const IntervalCluster& cl, const UVector& uv) {
    BandedSpd lam = bridge_precision(cl, uv);
    lam.factor();
    std::vector<double> y = lam.solve(std::vector<double>(cl.m(), 1.0));
    double s = 0;
    for (double v : y) s += v;
    return s;
}

// Exact Gibbs sampler for u | xi with density prop. to Phi(xi, u):
// augment with the bridge increments x; x | u is the banded Gaussian and
// u_i | x are independent half-normals with scale 1/|Delta_i(x)|.
// Initialized at the n=1 medians u_i = 1/sqrt(3 C_ii).
inline UVector sample_u_conditional(const IntervalCluster& cl, Rng& rng, std::size_t sweeps = 30) {
    std::size_t n = cl.n(), m = cl.m();
    UVector uv;
    uv.u.resize(n);
    for (std::size_t i = 0; i < n; ++i) uv.u[i] = 1.0 / std::sqrt(3.0 * cl.intervals[i].length());
    for (std::size_t sweep = 0; sweep < sweeps; ++sweep) {
        BandedSpd lam = bridge_precision(cl, uv);
        lam.factor();
        std::vector<std::vector<double>> coord(3);
        for (int c = 0; c < 3; ++c) {
            std::vector<double> z(m);
            for (auto& v : z) v = normal(rng);
            coord[c] = lam.solve_lt(std::move(z));
        }
        for (std::size_t i = 0; i < n; ++i) {
            Vec3 d{};
            for (std::size_t j = cl.run_lo[i]; j <= cl.run_hi[i]; ++j)
                d += Vec3{coord[0][j], coord[1][j], coord[2][j]};
            double r = std::max(norm(d), 1e-300);
            uv.u[i] = std::fabs(normal(rng)) / r;
        }
    }
    return uv;
}

enum class FMode { automatic, quadrature, importance, smc };

struct FEstimate {
    double log_value = 0;
    double rel_stderr = 0;  // 0 for quadrature / closed form
    FMode mode = FMode::quadrature;

    double value() const { return std::exp(log_value); }
};

namespace detail {

inline double f_quadrature(const IntervalCluster& cl) {
    std::size_t n = cl.n();
    UVector uv;
    uv.u.assign(n, 0.0);
    std::function<double(std::size_t, double)> level = [&](std::size_t depth, double tol) -> double {
        return integrate_halfline(
            [&](double u) {
                uv.u[depth] = u;
                if (depth + 1 == n) return gaussian_normalizer(cl, uv);
                return level(depth + 1, tol * 0.1);
            },
            tol);
    };
    double integral = level(0, n == 1 ? 1e-12 : (n == 2 ? 1e-9 : 1e-7));
    return std::pow(c0_coulomb, double(n)) * integral;
}

// u-space importance sampling with the product proposal matched to the n=1
// closed form q_i(u) = sqrt(l_i) (1 + u^2 l_i)^{-3/2}, l_i = C_ii.
inline FEstimate f_importance(const IntervalCluster& cl, Rng& rng, std::size_t n_samples) {
    std::size_t n = cl.n();
    std::vector<double> li(n);
    for (std::size_t i = 0; i < n; ++i) li[i] = cl.intervals[i].length();
    std::vector<double> logw(n_samples);
    PhiEvaluator phi(cl);
    std::vector<double> u(n);
    for (std::size_t s = 0; s < n_samples; ++s) {
        double logq = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double p = uniform(rng);
            u[i] = p / std::sqrt(li[i] * (1.0 - p * p));
            logq += 0.5 * std::log(li[i]) - 1.5 * std::log1p(u[i] * u[i] * li[i]);
        }
        logw[s] = phi.log_phi(u) - logq;
    }
    double mx = *std::max_element(logw.begin(), logw.end());
    double sum = 0, sum2 = 0;
    for (double lw : logw) {
        double w = std::exp(lw - mx);
        sum += w;
        sum2 += w * w;
    }
    double mean = sum / double(n_samples);
    double var = (sum2 / double(n_samples) - mean * mean) / double(n_samples);
    FEstimate fe;
    fe.mode = FMode::importance;
    fe.log_value = double(n) * std::log(c0_coulomb) + mx + std::log(mean);
    fe.rel_stderr = std::sqrt(std::max(0.0, var)) / mean;
    return fe;
}

// Path-space estimator F = E^P[prod_i |omega(t_i)-omega(s_i)|^{-1}]
// (the Coulomb-Gaussian identity integrated in u), evaluated by sequential
// Monte Carlo over the elementary subintervals with systematic resampling.
// Unbiased; the workhorse for large clusters where u-space importance
// sampling degenerates.
inline FEstimate f_smc(const IntervalCluster& cl, Rng& rng, std::size_t n_particles) {
    const std::size_t p_cnt = n_particles, m = cl.m(), n = cl.n();
    // events per breakpoint: interval closings (weight) and openings (anchor)
    std::vector<std::vector<std::size_t>> closes(m + 1), opens(m + 1);
    for (std::size_t i = 0; i < n; ++i) {
        opens[cl.run_lo[i]].push_back(i);
        closes[cl.run_hi[i] + 1].push_back(i);
    }
    std::vector<Vec3> pos(p_cnt, Vec3{});
    std::vector<std::vector<Vec3>> anchor(n);
    std::vector<double> logw(p_cnt, 0.0);
    double log_z = 0;
    std::vector<Vec3> scratch(p_cnt);
    auto resample_collapse = [&]() {
        double mx = *std::max_element(logw.begin(), logw.end());
        double sum = 0;
        std::vector<double> w(p_cnt);
        for (std::size_t p = 0; p < p_cnt; ++p) {
            w[p] = std::exp(logw[p] - mx);
            sum += w[p];
        }
        log_z += mx + std::log(sum / double(p_cnt));
        double ess = sq(sum);
        double s2 = 0;
        for (double x : w) s2 += x * x;
        ess /= s2;
        if (ess < 0.5 * double(p_cnt)) {
            // systematic resampling
            std::vector<std::size_t> idx(p_cnt);
            double step = sum / double(p_cnt);
            double u0 = uniform(rng) * step;
            double acc = 0;
            std::size_t k = 0;
            for (std::size_t p = 0; p < p_cnt; ++p) {
                double target = u0 + double(p) * step;
                while (acc + w[k] < target && k + 1 < p_cnt) acc += w[k++];
                idx[p] = k;
            }
            for (std::size_t p = 0; p < p_cnt; ++p) scratch[p] = pos[idx[p]];
            pos.swap(scratch);
            for (auto& a : anchor)
                if (!a.empty()) {
                    for (std::size_t p = 0; p < p_cnt; ++p) scratch[p] = a[idx[p]];
                    a.swap(scratch);
                }
            std::fill(logw.begin(), logw.end(), 0.0);
        } else {
            for (std::size_t p = 0; p < p_cnt; ++p) logw[p] -= mx + std::log(sum / double(p_cnt));
        }
    };
    for (std::size_t bp = 0; bp <= m; ++bp) {
        for (std::size_t i : closes[bp]) {
            for (std::size_t p = 0; p < p_cnt; ++p) logw[p] -= std::log(std::max(norm(pos[p] - anchor[i][p]), 1e-300));
            anchor[i].clear();
            anchor[i].shrink_to_fit();
        }
        for (std::size_t i : opens[bp]) anchor[i] = pos;
        if (bp < m) {
            if (!closes[bp].empty()) resample_collapse();
            double sd = std::sqrt(cl.ell[bp]);
            for (std::size_t p = 0; p < p_cnt; ++p) pos[p] += sd * normal3(rng);
        }
    }
    // final collapse of remaining weights
    double mx = *std::max_element(logw.begin(), logw.end());
    double sum = 0;
    for (double lw : logw) sum += std::exp(lw - mx);
    log_z += mx + std::log(sum / double(p_cnt));
    FEstimate fe;
    fe.mode = FMode::smc;
    fe.log_value = log_z;
    fe.rel_stderr = 0;  // cluster-level spread is reported by the callers
    return fe;
}

}  // namespace detail

struct FOptions {
    std::size_t quadrature_n_max = 3;
    std::size_t importance_n_max = 16;
    std::size_t importance_samples = 4096;
    std::size_t smc_particles = 512;
    // optional particle-step budget: huge clusters get fewer particles
    // (their weights only matter through a crude log-scale)
    std::size_t smc_budget = 0;
    std::size_t smc_min_particles = 64;

    std::size_t particles_for(std::size_t m) const {
        if (smc_budget == 0 || m == 0) return smc_particles;
        return std::max(smc_min_particles, std::min(smc_particles, smc_budget / m));
    }
};

// F(xi) = (sqrt(2/pi))^n int Phi(xi, u) du over (0,inf)^n. Single intervals
// are closed-form sqrt(2/(pi l)); quadrature up to n_max; beyond that Monte
// Carlo (u-space importance sampling, or the sequential path-space estimator
// for large n).
inline FEstimate cluster_weight_F(const IntervalCluster& cl, FMode mode = FMode::automatic, Rng* rng = nullptr,
                                  const FOptions& opt = {}) {
    std::size_t n = cl.n();
    if (mode == FMode::quadrature && n > opt.quadrature_n_max)
        throw config_error("cluster_weight_F: quadrature mode limited to n <= " +
                           std::to_string(opt.quadrature_n_max));
    if (n == 1 && (mode == FMode::automatic || mode == FMode::quadrature)) {
        FEstimate fe;
        fe.mode = FMode::quadrature;
        fe.log_value = 0.5 * std::log(2.0 / (M_PI * cl.intervals[0].length()));
        return fe;
    }
    if (mode == FMode::automatic) {
        if (n <= opt.quadrature_n_max) mode = FMode::quadrature;
        else if (n <= opt.importance_n_max) mode = FMode::importance;
        else mode = FMode::smc;
    }
    switch (mode) {
        case FMode::quadrature: {
            FEstimate fe;
            fe.mode = FMode::quadrature;
            fe.log_value = std::log(detail::f_quadrature(cl));
            return fe;
        }
        case FMode::importance:
            if (!rng) throw config_error("cluster_weight_F: Monte Carlo mode needs an rng");
            return detail::f_importance(cl, *rng, opt.importance_samples);
        case FMode::smc:
            if (!rng) throw config_error("cluster_weight_F: Monte Carlo mode needs an rng");
            return detail::f_smc(cl, *rng, opt.particles_for(cl.m()));
        default:
            throw config_error("cluster_weight_F: bad mode");
    }
}

}  // namespace polaron
