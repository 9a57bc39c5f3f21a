#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "polaron/grid.hpp"

namespace polaron {

// Hartree potential of the radial density psi^2 by the shell theorem:
//   V(r) = 4pi/r int_0^r s^2 psi^2 ds + 4pi int_r^Rmax s psi^2 ds,
// V(0) taken as the r->0 limit 4pi int s psi^2 ds.
inline RadialPotential hartree_potential(const RadialProfile& p, bool check_normalized = true) {
    if (check_normalized) p.check_invariants();
    const auto& g = p.grid;
    const double h = g.h();
    std::size_t nn = g.nodes();
    std::vector<double> s2(nn), s1(nn);
    for (std::size_t i = 0; i < nn; ++i) {
        double r = g.r(i), psi2 = sq(p.values[i]);
        s2[i] = r * r * psi2;
        s1[i] = r * psi2;
    }
    // cumulative trapezoids
    std::vector<double> c2(nn, 0.0), c1(nn, 0.0);
    for (std::size_t i = 1; i < nn; ++i) {
        c2[i] = c2[i - 1] + 0.5 * h * (s2[i] + s2[i - 1]);
        c1[i] = c1[i - 1] + 0.5 * h * (s1[i] + s1[i - 1]);
    }
    const double c1_tot = c1.back();
    RadialPotential V{g, std::vector<double>(nn)};
    V.values[0] = 4.0 * M_PI * c1_tot;
    for (std::size_t i = 1; i < nn; ++i) V.values[i] = 4.0 * M_PI * (c2[i] / g.r(i) + (c1_tot - c1[i]));
    return V;
}

struct EnergyTerms {
    double coulomb = 0;  // double Coulomb integral of psi^2 against itself
    double kinetic = 0;  // |grad psi|_2^2
    double energy() const { return coulomb - 0.5 * kinetic; }
};

inline EnergyTerms pekar_energy_terms(const RadialProfile& p, bool check_normalized = true) {
    if (p.grid.n < 3) throw config_error("pekar_energy: grid too coarse for finite differences");
    if (check_normalized) p.check_invariants();
    const auto& g = p.grid;
    const double h = g.h();
    std::size_t nn = g.nodes();
    RadialPotential V = hartree_potential(p, false);
    std::vector<double> f(nn);
    for (std::size_t i = 0; i < nn; ++i) f[i] = sq(g.r(i)) * sq(p.values[i]) * V.values[i];
    double coulomb = 4.0 * M_PI * trapezoid(f, h);
    // central differences, one-sided second order at the ends
    std::vector<double> d(nn);
    d[0] = (-3.0 * p.values[0] + 4.0 * p.values[1] - p.values[2]) / (2.0 * h);
    d[nn - 1] = (3.0 * p.values[nn - 1] - 4.0 * p.values[nn - 2] + p.values[nn - 3]) / (2.0 * h);
    for (std::size_t i = 1; i + 1 < nn; ++i) d[i] = (p.values[i + 1] - p.values[i - 1]) / (2.0 * h);
    for (std::size_t i = 0; i < nn; ++i) f[i] = sq(g.r(i)) * sq(d[i]);
    double kinetic = 4.0 * M_PI * trapezoid(f, h);
    return {coulomb, kinetic};
}

inline double pekar_energy(const RadialProfile& p) { return pekar_energy_terms(p).energy(); }

namespace detail {

// Ground state of -(1/2)u'' + W(r) u on the interior nodes (Dirichlet ends),
// by inverse power iteration with a Gershgorin shift; Thomas solves.
inline std::pair<std::vector<double>, double> tridiag_ground_state(const std::vector<double>& W, double h) {
    std::size_t n = W.size() - 2;  // interior nodes
    double off = -0.5 / (h * h);
    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i) diag[i] = 1.0 / (h * h) + W[i + 1];
    double shift = *std::min_element(diag.begin(), diag.end()) + 2.0 * off - 0.1;
    std::vector<double> a(n), x(n, 1.0), cp(n), dp(n), y(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = diag[i] - shift;
    double lam = 0, lam_prev = 1e300;
    for (int it = 0; it < 800; ++it) {
        cp[0] = off / a[0];
        dp[0] = x[0] / a[0];
        for (std::size_t i = 1; i < n; ++i) {
            double den = a[i] - off * cp[i - 1];
            cp[i] = off / den;
            dp[i] = (x[i] - off * dp[i - 1]) / den;
        }
        y[n - 1] = dp[n - 1];
        for (std::size_t i = n - 1; i-- > 0;) y[i] = dp[i] - cp[i] * y[i + 1];
        double nrm = 0;
        for (double v : y) nrm += v * v;
        nrm = std::sqrt(nrm);
        for (double& v : y) v /= nrm;
        // Rayleigh quotient
        double num = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double t = diag[i] * y[i];
            if (i > 0) t += off * y[i - 1];
            if (i + 1 < n) t += off * y[i + 1];
            num += y[i] * t;
        }
        lam = num;
        x = y;
        if (std::fabs(lam - lam_prev) < 1e-14 * std::max(1.0, std::fabs(lam))) break;
        lam_prev = lam;
    }
    // Perron sign: make the dominant component positive
    std::size_t imax = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (std::fabs(x[i]) > std::fabs(x[imax])) imax = i;
    if (x[imax] < 0)
        for (double& v : x) v = -v;
    std::vector<double> u(W.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) u[i + 1] = x[i];
    return {u, lam};
}

}  // namespace detail

struct ScfStep {
    int iteration;
    double energy;
    double virial_residual;
    double mixing;
};

struct SolveResult {
    RadialProfile profile;
    double g0 = 0;
    double coulomb = 0;
    double kinetic = 0;
    double virial_residual = 0;
    double eigenvalue = 0;
    int iterations = 0;
    std::vector<ScfStep> trace;
};

// Self-consistent maximization of the Pekar functional. Each step solves the
// linear ground state of -(1/2)Lap - 2 V_psi on u = r*psi (tridiagonal, the
// r=0 coordinate singularity drops out), then mixes with damping m; m is
// halved whenever the candidate would lower the energy by more than tol.
//
// Stopping: |dE| < tol and virial residual < max(10 tol, 10 h^2). The h^2
// floor is the discretization limit of the continuum identity V = K on a
// fixed grid.
inline SolveResult solve_ground_state(const RadialGrid& grid, const RadialProfile& init, double tol = 1e-8,
                                      int max_iterations = 300) {
    if (!(tol > 0)) throw config_error("solve_ground_state: tol must be positive");
    const double h = grid.h();
    const double virial_target = std::max(10.0 * tol, 10.0 * h * h);
    RadialProfile psi = normalized(grid, init.values);
    EnergyTerms et = pekar_energy_terms(psi, false);
    double e_prev = et.energy();
    double m = 0.5;
    SolveResult res;
    res.trace.reserve(64);
    for (int it = 0; it < max_iterations; ++it) {
        RadialPotential V = hartree_potential(psi, false);
        std::vector<double> W(grid.nodes());
        for (std::size_t i = 0; i < W.size(); ++i) W[i] = -2.0 * V.values[i];
        auto [u, lam] = detail::tridiag_ground_state(W, h);
        std::vector<double> phi(grid.nodes());
        for (std::size_t i = 1; i < phi.size(); ++i) phi[i] = std::max(u[i], 0.0) / grid.r(i);
        phi[0] = (4.0 * phi[1] - phi[2]) / 3.0;
        RadialProfile cand;
        EnergyTerms cet;
        double ec = 0;
        for (int tries = 0;; ++tries) {
            std::vector<double> mix(grid.nodes());
            for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = (1.0 - m) * psi.values[i] + m * phi[i];
            cand = normalized(grid, std::move(mix));
            cet = pekar_energy_terms(cand, false);
            ec = cet.energy();
            if (ec >= e_prev - tol || tries >= 30) break;
            m *= 0.5;
        }
        psi = std::move(cand);
        double vir = std::fabs(cet.coulomb - cet.kinetic) / cet.kinetic;
        res.trace.push_back({it, ec, vir, m});
        res.g0 = ec;
        res.coulomb = cet.coulomb;
        res.kinetic = cet.kinetic;
        res.virial_residual = vir;
        res.eigenvalue = lam;
        res.iterations = it + 1;
        if (std::fabs(ec - e_prev) < tol && vir < virial_target) {
            // Dirichlet end forces psi(r_max)=0 exactly; replace by log-linear
            // extrapolation so the tail stays strictly positive for the drift.
            std::size_t nn = grid.nodes();
            if (psi.values[nn - 2] > 0 && psi.values[nn - 3] > 0)
                psi.values[nn - 1] = sq(psi.values[nn - 2]) / psi.values[nn - 3];
            res.profile = normalized(grid, psi.values);
            return res;
        }
        e_prev = ec;
    }
    throw iteration_limit_error("solve_ground_state: no convergence after " + std::to_string(max_iterations) +
                                " iterations (last dE state: E=" + std::to_string(res.g0) +
                                ", virial=" + std::to_string(res.virial_residual) + ")");
}

// Radial log-derivative b(r) = psi'(r)/psi(r), stored at the nodes with linear
// interpolation in between and constant extrapolation past r_max. The 3D drift
// is b(|x|) x/|x|. Differences are taken on log psi, so any log-quadratic psi
// (Gaussian) is reproduced exactly at the nodes.
struct DriftField {
    RadialGrid grid;
    std::vector<double> b;

    double at(double r) const {
        if (r <= 0) return 0.0;
        if (r >= grid.r_max) return b.back();
        double t = r / grid.h();
        auto i = static_cast<std::size_t>(t);
        double w = t - static_cast<double>(i);
        return (1.0 - w) * b[i] + w * b[i + 1];
    }
};

inline DriftField drift_field(const RadialProfile& p) {
    std::size_t nn = p.grid.nodes();
    const double h = p.grid.h();
    for (std::size_t i = 1; i + 1 < nn; ++i)
        if (!(p.values[i] > 0))
            throw numeric_error("drift_field: psi must be positive at interior node " + std::to_string(i));
    std::vector<double> lg(nn);
    for (std::size_t i = 0; i < nn; ++i) lg[i] = std::log(std::max(p.values[i], 1e-300));
    std::vector<double> b(nn);
    b[0] = 0.0;  // psi'(0) = 0 for a smooth radial function
    for (std::size_t i = 1; i + 1 < nn; ++i) b[i] = (lg[i + 1] - lg[i - 1]) / (2.0 * h);
    b[nn - 1] = (3.0 * lg[nn - 1] - 4.0 * lg[nn - 2] + lg[nn - 3]) / (2.0 * h);
    return DriftField{p.grid, std::move(b)};
}

}  // namespace polaron
