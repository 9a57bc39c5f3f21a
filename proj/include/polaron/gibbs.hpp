#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "polaron/common.hpp"
#include "polaron/quadrature.hpp"
#include "polaron/rng.hpp"
#include "polaron/stats.hpp"

namespace polaron {

inline double coulomb_v(double r) { return 1.0 / r; }
inline double v_eta(double r2, double eta) { return 1.0 / std::sqrt(eta * eta + r2); }
inline double y_eta(double r, double eta) { return 1.0 / r - v_eta(r * r, eta); }

struct PolaronParams {
    double epsilon = 1.0;
    double horizon = 2.0;  // T; the path lives on [-T, T]
    double eta = 0.05;
    double delta = 0.01;
    double beta = 1.0;

    std::size_t steps() const { return static_cast<std::size_t>(std::llround(2.0 * horizon / delta)); }

    void validate() const {
        if (!(epsilon > 0)) throw config_error("PolaronParams: epsilon must be > 0");
        if (!(horizon > 0)) throw config_error("PolaronParams: horizon must be > 0");
        if (eta < 0) throw config_error("PolaronParams: eta must be >= 0");
        if (!(delta > 0)) throw config_error("PolaronParams: delta must be > 0");
        if (beta < 0 || beta > 1) throw config_error("PolaronParams: beta must lie in [0,1]");
        double m = 2.0 * horizon / delta;
        if (std::fabs(m - std::llround(m)) > 1e-9) throw config_error("PolaronParams: delta must divide 2*horizon");
    }

    static double default_delta(double eps) { return std::min(0.01, 1.0 / (10.0 * eps)); }
};

// Path of M Brownian-reference increments on [-T,T]; omega(-T) pinned at 0.
struct DiscretePath {
    double delta = 0;
    std::vector<Vec3> increments;

    std::vector<Vec3> positions() const {
        std::vector<Vec3> p(increments.size() + 1);
        p[0] = Vec3{};
        for (std::size_t i = 0; i < increments.size(); ++i) p[i + 1] = p[i] + increments[i];
        return p;
    }

    Vec3 end_to_end() const {
        Vec3 s{};
        for (const auto& g : increments) s += g;
        return s;
    }
};

inline DiscretePath sample_reference_path(const PolaronParams& par, Rng& rng) {
    DiscretePath p;
    p.delta = par.delta;
    p.increments.resize(par.steps());
    double sd = std::sqrt(par.delta);
    for (auto& g : p.increments) g = sd * normal3(rng);
    return p;
}

// kernel values eps*exp(-eps*delta*d) for lag index d
struct KernelCache {
    std::vector<double> k;

    KernelCache() = default;
    KernelCache(const PolaronParams& par) {
        std::size_t m = par.steps();
        k.resize(m + 1);
        for (std::size_t d = 0; d <= m; ++d) k[d] = par.epsilon * std::exp(-par.epsilon * par.delta * double(d));
    }
};

// Discrete interaction
//   H = beta * delta^2 * sum_{k<l} eps e^{-eps delta (l-k)} V_eta(omega_k - omega_l),
// the Riemann sum of (beta/2) iint eps e^{-eps|t-s|} V_eta(omega_t - omega_s)
// over [-T,T]^2 with the diagonal excluded.
inline double hamiltonian(const std::vector<Vec3>& pos, const PolaronParams& par, const KernelCache& kc) {
    if (par.beta == 0.0) return 0.0;
    if (!(par.eta > 0)) throw numeric_error("hamiltonian: eta must be > 0 (Coulomb singularity)");
    const double eta2 = par.eta * par.eta;
    double h = 0;
    std::size_t n = pos.size();
    for (std::size_t l = 1; l < n; ++l) {
        const Vec3 pl = pos[l];
        double row = 0;
        for (std::size_t k = 0; k < l; ++k) {
            double r2 = norm2(pl - pos[k]);
            row += kc.k[l - k] / std::sqrt(eta2 + r2);
        }
        h += row;
    }
    return par.beta * par.delta * par.delta * h;
}

inline double hamiltonian(const DiscretePath& path, const PolaronParams& par) {
    KernelCache kc(par);
    return hamiltonian(path.positions(), par, kc);
}

// Interaction difference for a proposal that replaces the last `block` increments:
// positions 0..a stay fixed (a = M-block) and only pairs with the larger index
// beyond a contribute.
inline double hamiltonian_tail_delta(const std::vector<Vec3>& pos, const std::vector<Vec3>& pos_new,
                                     std::size_t block, const PolaronParams& par, const KernelCache& kc) {
    if (par.beta == 0.0) return 0.0;
    const double eta2 = par.eta * par.eta;
    std::size_t n = pos.size();
    std::size_t a = n - 1 - block;
    double dh = 0;
    for (std::size_t l = a + 1; l < n; ++l) {
        double row = 0;
        for (std::size_t k = 0; k < l; ++k)
            row += kc.k[l - k] * (1.0 / std::sqrt(eta2 + norm2(pos_new[l] - pos_new[k])) -
                                  1.0 / std::sqrt(eta2 + norm2(pos[l] - pos[k])));
        dh += row;
    }
    return par.beta * par.delta * par.delta * dh;
}

struct ChainState {
    DiscretePath path;
    std::vector<Vec3> pos;
    double H = 0;
};

inline ChainState make_chain_state(const PolaronParams& par, const KernelCache& kc, Rng& rng) {
    ChainState st;
    st.path = sample_reference_path(par, rng);
    st.pos = st.path.positions();
    st.H = hamiltonian(st.pos, par, kc);
    return st;
}

// One global pCN move: g' = sqrt(1-rho^2) g + rho xi preserves the Brownian
// reference, so the acceptance ratio is exp(H'-H).
inline bool pcn_step(ChainState& st, const PolaronParams& par, const KernelCache& kc, double rho, Rng& rng) {
    if (rho < 0 || rho > 1) throw config_error("pcn_step: rho must lie in [0,1]");
    const double keep = std::sqrt(1.0 - rho * rho);
    const double sd = std::sqrt(par.delta);
    DiscretePath prop;
    prop.delta = par.delta;
    prop.increments.resize(st.path.increments.size());
    for (std::size_t i = 0; i < prop.increments.size(); ++i)
        prop.increments[i] = keep * st.path.increments[i] + (rho * sd) * normal3(rng);
    std::vector<Vec3> pos = prop.positions();
    double hn = hamiltonian(pos, par, kc);
    if (std::log(uniform(rng)) < hn - st.H) {
        st.path = std::move(prop);
        st.pos = std::move(pos);
        st.H = hn;
        return true;
    }
    return false;
}

// pCN on the last `block` increments only, with the incremental interaction
// update (cost O(M*block) instead of O(M^2)).
inline bool pcn_tail_step(ChainState& st, const PolaronParams& par, const KernelCache& kc, double rho,
                          std::size_t block, Rng& rng) {
    std::size_t m = st.path.increments.size();
    block = std::min(std::max<std::size_t>(1, block), m);
    const double keep = std::sqrt(1.0 - rho * rho);
    const double sd = std::sqrt(par.delta);
    std::vector<Vec3> pos_new(st.pos);
    std::vector<Vec3> g_new(block);
    for (std::size_t j = 0; j < block; ++j)
        g_new[j] = keep * st.path.increments[m - block + j] + (rho * sd) * normal3(rng);
    for (std::size_t j = 0; j < block; ++j) {
        std::size_t l = m - block + j + 1;
        pos_new[l] = pos_new[l - 1] + g_new[j];
    }
    double dh = hamiltonian_tail_delta(st.pos, pos_new, block, par, kc);
    if (std::log(uniform(rng)) < dh) {
        for (std::size_t j = 0; j < block; ++j) st.path.increments[m - block + j] = g_new[j];
        st.pos = std::move(pos_new);
        st.H += dh;
        return true;
    }
    return false;
}

struct ChainOptions {
    std::size_t burn_in = 0;    // 0: n_steps/5
    std::size_t thin = 10;
    double rho0 = 0.2;
    double target_acceptance = 0.25;
    double tail_move_fraction = 0.25;
};

struct ChainResult {
    std::vector<DiscretePath> samples;        // thinned post-burn-in paths
    std::vector<double> h_trace;              // H at thinned samples (beta-multiplied)
    std::vector<double> acceptance_trace;     // acceptance rate per adaptation window
    double acceptance = 0;
    double rho = 0;
    double iact_h = 1;
    MeanErr e_h;
};

inline ChainResult run_chain(const PolaronParams& par, std::size_t n_steps, Rng& rng, ChainOptions opt = {}) {
    par.validate();
    if (n_steps < 10000) throw config_error("run_chain: need at least 1e4 steps");
    if (opt.burn_in == 0) opt.burn_in = n_steps / 5;
    KernelCache kc(par);
    ChainState st = make_chain_state(par, kc, rng);
    std::size_t m = st.path.increments.size();
    double rho = opt.rho0;
    ChainResult res;
    std::size_t window = 200, win_acc = 0, win_cnt = 0;
    std::size_t acc_total = 0, cnt_total = 0;
    std::uniform_int_distribution<std::size_t> block_dist(1, m);
    for (std::size_t it = 0; it < n_steps; ++it) {
        bool accepted;
        if (uniform(rng) < opt.tail_move_fraction)
            accepted = pcn_tail_step(st, par, kc, rho, block_dist(rng), rng);
        else
            accepted = pcn_step(st, par, kc, rho, rng);
        ++win_cnt;
        win_acc += accepted ? 1 : 0;
        if (it >= opt.burn_in) {
            ++cnt_total;
            acc_total += accepted ? 1 : 0;
        }
        if (win_cnt == window) {
            double a = double(win_acc) / double(window);
            res.acceptance_trace.push_back(a);
            if (it < opt.burn_in) {
                rho *= std::exp(0.5 * (a - opt.target_acceptance));
                rho = std::min(1.0, std::max(1e-4, rho));
            }
            win_acc = win_cnt = 0;
        }
        if (it >= opt.burn_in && (it - opt.burn_in) % opt.thin == 0) {
            res.samples.push_back(st.path);
            res.h_trace.push_back(st.H);
        }
    }
    res.rho = rho;
    res.acceptance = cnt_total ? double(acc_total) / double(cnt_total) : 0.0;
    if (par.beta > 0 && res.acceptance < 0.01)
        throw mixing_error("run_chain: acceptance " + std::to_string(res.acceptance) + " < 0.01 after adaptation");
    res.iact_h = integrated_autocorr_time(res.h_trace);
    res.e_h.value = vec_mean(res.h_trace);
    res.e_h.stderr_ = batch_means_stderr(res.h_trace);
    return res;
}

// Per-coordinate empirical variance of (2T)^{-1/2}(omega(T)-omega(-T)),
// averaged over coordinates; stderr by batch means.
inline MeanErr estimate_sigma2(const std::vector<DiscretePath>& samples, double horizon) {
    if (samples.size() < 50) throw insufficient_sample_error("estimate_sigma2: fewer than 50 samples");
    double scale = 1.0 / std::sqrt(2.0 * horizon);
    std::vector<Vec3> ends(samples.size());
    Vec3 mean{};
    for (std::size_t i = 0; i < samples.size(); ++i) {
        ends[i] = scale * samples[i].end_to_end();
        mean += ends[i];
    }
    mean = (1.0 / double(samples.size())) * mean;
    std::vector<double> w(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) w[i] = norm2(ends[i] - mean) / 3.0;
    double tau = integrated_autocorr_time(w);
    if (double(w.size()) / std::max(1.0, tau) < 50)
        throw insufficient_sample_error("estimate_sigma2: fewer than 50 effective samples");
    MeanErr r;
    r.value = vec_mean(w) * double(w.size()) / double(w.size() - 1);
    r.stderr_ = batch_means_stderr(w);
    return r;
}

struct ThermoRow {
    double beta;
    double e_h1;  // E_beta[H at multiplier 1]
    double stderr_;
};

struct ThermoResult {
    MeanErr g;  // (2T)^{-1} log Z estimate
    std::vector<ThermoRow> table;
};

// Thermodynamic integration: d/dbeta log Z(beta) = E_beta[H_1] with H linear
// in beta, so (2T)^{-1} log Z = (2T)^{-1} int_0^1 E_beta[H_1] dbeta
// (trapezoid over the grid). Chains at each beta; H_1 evaluated on thinned
// samples.
inline ThermoResult free_energy_thermo_integration(PolaronParams par, const std::vector<double>& beta_grid,
                                                   std::size_t n_steps, Rng& rng, ChainOptions opt = {}) {
    if (beta_grid.size() == 1 && beta_grid[0] == 0.0) return {};  // reference only
    if (beta_grid.size() < 8) throw config_error("free_energy_thermo_integration: need >= 8 beta points");
    if (!std::is_sorted(beta_grid.begin(), beta_grid.end()))
        throw config_error("free_energy_thermo_integration: beta grid must be sorted");
    if (beta_grid.front() != 0.0 || beta_grid.back() != 1.0)
        throw config_error("free_energy_thermo_integration: beta grid must span [0,1]");
    ThermoResult res;
    PolaronParams base = par;
    base.beta = 1.0;
    KernelCache kc(base);
    for (double b : beta_grid) {
        PolaronParams pb = par;
        pb.beta = b;
        ChainResult cr = run_chain(pb, n_steps, rng, opt);
        std::vector<double> h1(cr.samples.size());
        for (std::size_t i = 0; i < cr.samples.size(); ++i) {
            if (b > 0)
                h1[i] = cr.h_trace[i] / b;  // H linear in beta
            else
                h1[i] = hamiltonian(cr.samples[i].positions(), base, kc);
        }
        res.table.push_back({b, vec_mean(h1), batch_means_stderr(h1)});
    }
    double integral = 0, var = 0;
    for (std::size_t i = 0; i + 1 < res.table.size(); ++i) {
        double w = 0.5 * (res.table[i + 1].beta - res.table[i].beta);
        integral += w * (res.table[i].e_h1 + res.table[i + 1].e_h1);
        var += sq(w * res.table[i].stderr_) + sq(w * res.table[i + 1].stderr_);
    }
    res.g.value = integral / (2.0 * par.horizon);
    res.g.stderr_ = std::sqrt(var) / (2.0 * par.horizon);
    return res;
}

// Direct reweighting estimator (2T)^{-1} log E_ref[e^{H}], usable at small
// coupling; an independent route to the same free energy.
inline MeanErr free_energy_reweighting(const PolaronParams& par, std::size_t n_paths, Rng& rng) {
    par.validate();
    KernelCache kc(par);
    std::vector<double> ws(n_paths);
    for (std::size_t i = 0; i < n_paths; ++i) {
        DiscretePath p = sample_reference_path(par, rng);
        ws[i] = hamiltonian(p.positions(), par, kc);
    }
    double hmax = *std::max_element(ws.begin(), ws.end());
    std::vector<double> es(n_paths);
    for (std::size_t i = 0; i < n_paths; ++i) es[i] = std::exp(ws[i] - hmax);
    double m = vec_mean(es);
    MeanErr r;
    r.value = (hmax + std::log(m)) / (2.0 * par.horizon);
    // delta method on log of the mean
    r.stderr_ = std::sqrt(vec_variance(es) / double(n_paths)) / m / (2.0 * par.horizon);
    return r;
}

// F_eps(omega) = int_0^{T'} eps e^{-eps r} V_eta(omega(r)-omega(0)) dr by
// trapezoid on the path grid; the dropped tail is bounded by e^{-eps T'}/eta.
inline double empirical_f_epsilon(const std::vector<Vec3>& positions, double dt, double eps, double eta) {
    if (!(eta > 0)) throw config_error("empirical_f_epsilon: eta must be > 0 (singular integrand at r=0)");
    double span = dt * double(positions.size() - 1);
    if (eps * span < 5.0)
        throw config_error("empirical_f_epsilon: eps*T' < 5, truncation error too large");
    std::vector<double> f(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i) {
        double r = dt * double(i);
        f[i] = eps * std::exp(-eps * r) * v_eta(norm2(positions[i] - positions[0]), eta);
    }
    return trapezoid(f, dt);
}

struct TruncationCheck {
    bool ok = false;
    double c_star = 0;       // max of sqrt(s)/( sqrt(1+s^2) (s+sqrt(1+s^2)) )
    double worst_ratio = 0;  // max over the grid of Y_eta(x) |x|^{3/2} / sqrt(eta) / c_star
};

// Verifies (V - V_eta)(x) <= C* sqrt(eta) / |x|^{3/2} with C* fixed once by
// maximizing the scaling profile on a fine reference grid; Y_eta(x) =
// eta^{-1} phi(x/eta) makes the bound grid-independent.
inline TruncationCheck truncation_bound_check(double eta, const std::vector<double>& x_grid) {
    if (eta < 0 || eta > 1) throw config_error("truncation_bound_check: eta must lie in (0,1]");
    TruncationCheck res;
    double c = 0;
    for (int i = 1; i <= 200000; ++i) {
        double s = 1e-4 * double(i);  // reference grid up to s=20
        double g = std::sqrt(s) / (std::sqrt(1.0 + s * s) * (s + std::sqrt(1.0 + s * s)));
        c = std::max(c, g);
    }
    res.c_star = c;
    if (eta == 0.0) {  // Y_0 = 0 identically
        res.ok = true;
        res.worst_ratio = 0;
        return res;
    }
    double worst = 0;
    for (double x : x_grid) {
        if (!(x > 0) || x > 10) throw config_error("truncation_bound_check: |x| grid must lie in (0,10]");
        double ratio = y_eta(x, eta) * std::pow(x, 1.5) / std::sqrt(eta);
        worst = std::max(worst, ratio / c);
    }
    res.worst_ratio = worst;
    res.ok = worst <= 1.0 + 1e-12;
    return res;
}

}  // namespace polaron
