#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <sstream>

#include "polaron/pekar.hpp"

using namespace polaron;

namespace {

RadialProfile gaussian_profile(const RadialGrid& g, double sigma) {
    std::vector<double> v(g.nodes());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::exp(-sq(g.r(i)) / (4.0 * sigma * sigma));
    return normalized(g, std::move(v));
}

// ----- independent oracle: 2-Gaussian mixtures, closed-form energy ---------
// psi = c1 e^{-a1 r^2} + c2 e^{-a2 r^2}; overlap, kinetic and Coulomb terms
// have closed forms, so the oracle never touches the grid machinery.
double mixture_energy(double la1, double la2, double wraw) {
    double a[2] = {std::exp(la1), std::exp(la2)};
    double sig = 1.0 / (1.0 + std::exp(-wraw));
    double c[2] = {1.0 - sig, sig};
    double S[2][2], K[2][2];
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            double p = a[i] + a[j];
            S[i][j] = std::pow(M_PI / p, 1.5);
            K[i][j] = 6.0 * a[i] * a[j] / p * std::pow(M_PI / p, 1.5);
        }
    double nrm = 0, kin = 0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) nrm += c[i] * c[j] * S[i][j];
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) kin += c[i] * c[j] * K[i][j];
    kin /= nrm;
    double dd = 0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                for (int l = 0; l < 2; ++l) {
                    double p = a[i] + a[j], q = a[k] + a[l];
                    dd += c[i] * c[j] * c[k] * c[l] * 2.0 * std::pow(M_PI, 2.5) / (p * q * std::sqrt(p + q));
                }
    dd /= nrm * nrm;
    return dd - 0.5 * kin;
}

double nelder_mead_max() {
    using P = std::array<double, 3>;
    auto f = [](const P& p) { return -mixture_energy(p[0], p[1], p[2]); };
    double best = 1e300;
    P best_pt{};
    for (P start : {P{-1.5, 0.5, 0.0}, P{-1.0, -1.0, 0.0}, P{-2.0, 1.0, -1.0}}) {
        std::array<P, 4> simplex;
        simplex[0] = start;
        for (int i = 1; i < 4; ++i) {
            simplex[i] = start;
            simplex[i][i - 1] += 0.5;
        }
        std::array<double, 4> fv;
        for (int i = 0; i < 4; ++i) fv[i] = f(simplex[i]);
        for (int it = 0; it < 2000; ++it) {
            std::array<int, 4> ord{0, 1, 2, 3};
            std::sort(ord.begin(), ord.end(), [&](int a, int b) { return fv[a] < fv[b]; });
            if (fv[ord[3]] - fv[ord[0]] < 1e-13) break;
            P centroid{};
            for (int k = 0; k < 3; ++k)
                for (int d = 0; d < 3; ++d) centroid[d] += simplex[ord[k]][d] / 3.0;
            auto blend = [&](double t) {
                P p;
                for (int d = 0; d < 3; ++d) p[d] = centroid[d] + t * (simplex[ord[3]][d] - centroid[d]);
                return p;
            };
            P refl = blend(-1.0);
            double fr = f(refl);
            if (fr < fv[ord[0]]) {
                P exp_ = blend(-2.0);
                double fe = f(exp_);
                if (fe < fr) {
                    simplex[ord[3]] = exp_;
                    fv[ord[3]] = fe;
                } else {
                    simplex[ord[3]] = refl;
                    fv[ord[3]] = fr;
                }
            } else if (fr < fv[ord[2]]) {
                simplex[ord[3]] = refl;
                fv[ord[3]] = fr;
            } else {
                P con = blend(0.5);
                double fc = f(con);
                if (fc < fv[ord[3]]) {
                    simplex[ord[3]] = con;
                    fv[ord[3]] = fc;
                } else {
                    for (int k = 1; k < 4; ++k) {
                        for (int d = 0; d < 3; ++d)
                            simplex[ord[k]][d] = 0.5 * (simplex[ord[k]][d] + simplex[ord[0]][d]);
                        fv[ord[k]] = f(simplex[ord[k]]);
                    }
                }
            }
        }
        for (int i = 0; i < 4; ++i)
            if (fv[i] < best) {
                best = fv[i];
                best_pt = simplex[i];
            }
    }
    (void)best_pt;
    return -best;
}

}  // namespace

TEST_CASE("hartree potential of the uniform ball matches the shell formula") {
    RadialGrid g(4000, 4.0);
    std::vector<double> v(g.nodes(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i)
        if (g.r(i) <= 1.0) v[i] = 1.0;
    RadialProfile p = normalized(g, std::move(v));
    RadialPotential V = hartree_potential(p);
    for (double r : {0.0, 0.4, 0.8}) {
        auto i = static_cast<std::size_t>(std::llround(r / g.h()));
        CHECK(std::fabs(V.values[i] - 0.5 * (3.0 - r * r)) < 5e-3);
    }
    for (double r : {1.5, 2.5, 3.5}) {
        auto i = static_cast<std::size_t>(std::llround(r / g.h()));
        CHECK(std::fabs(V.values[i] - 1.0 / r) < 1e-9);
    }
    // r V(r) -> total mass at the cutoff
    CHECK(std::fabs(g.r_max * V.values.back() - 1.0) < 1e-3);
}

TEST_CASE("hartree potential sees a concentrated profile as a point mass") {
    RadialGrid g(10000, 2.0);
    std::vector<double> v(g.nodes(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i)
        if (g.r(i) <= 1e-3) v[i] = 1.0;
    RadialProfile p = normalized(g, std::move(v));
    RadialPotential V = hartree_potential(p);
    CHECK(std::fabs(V.values.back() - 0.5) < 1e-6);  // V(2) = 1/2
}

TEST_CASE("hartree potential rejects non-normalized input; zero profile allowed unchecked") {
    RadialGrid g(200, 5.0);
    RadialProfile bad{g, std::vector<double>(g.nodes(), 0.1)};
    CHECK_THROWS_AS(hartree_potential(bad), numeric_error);
    RadialProfile zero{g, std::vector<double>(g.nodes(), 0.0)};
    RadialPotential V = hartree_potential(zero, false);
    for (double x : V.values) CHECK(x == 0.0);
}

TEST_CASE("pekar energy of Gaussian trials matches the closed forms") {
    RadialGrid g(2000, 20.0);
    const double s_star = 3.0 * std::sqrt(M_PI) / 4.0;
    CHECK(std::fabs(pekar_energy(gaussian_profile(g, s_star)) - 2.0 / (3.0 * M_PI)) < 1e-3);
    CHECK(std::fabs(pekar_energy(gaussian_profile(g, 1.0)) - (1.0 / std::sqrt(M_PI) - 3.0 / 8.0)) < 1e-3);
    RadialGrid fine(4000, 4.0);
    CHECK(pekar_energy(gaussian_profile(fine, 0.1)) < 0.0);  // kinetic dominates
}

TEST_CASE("pekar energy requires a usable grid") {
    RadialProfile p;  // default grid: 0 intervals
    CHECK_THROWS_AS(pekar_energy(p), config_error);
}

TEST_CASE("scaling covariance of the energy terms") {
    RadialGrid g(2000, 16.0);
    RadialProfile psi = gaussian_profile(g, 1.3);
    EnergyTerms base = pekar_energy_terms(psi);
    for (double theta : {0.5, 2.0}) {
        RadialGrid gt(2000, 16.0 / theta);
        std::vector<double> v(gt.nodes());
        for (std::size_t i = 0; i < v.size(); ++i)
            v[i] = std::pow(theta, 1.5) * std::exp(-sq(theta * gt.r(i)) / (4.0 * 1.3 * 1.3));
        RadialProfile scaled = normalized(gt, std::move(v));
        double expect = theta * base.coulomb - 0.5 * theta * theta * base.kinetic;
        CHECK(std::fabs(pekar_energy(scaled) - expect) < 2e-3);
    }
}

TEST_CASE("ground state solver reaches the maximizer", "[solver]") {
    RadialGrid g(2000, 20.0);
    SolveResult res = solve_ground_state(g, gaussian_profile(g, 1.0), 1e-8);

    SECTION("dominates the Gaussian trial bound") { CHECK(res.g0 >= 2.0 / (3.0 * M_PI)); }
    SECTION("virial identity at the fixed point") {
        CHECK(std::fabs(res.coulomb - res.kinetic) / res.kinetic < 1e-3);
    }
    SECTION("agrees with the Gaussian-mixture oracle within 1%") {
        double oracle = nelder_mead_max();
        CHECK(oracle > 2.0 / (3.0 * M_PI));  // mixture family dominates one Gaussian
        CHECK(std::fabs(res.g0 - oracle) / oracle < 0.01);
    }
    SECTION("SCF trace is monotone up to tol and preserves normalization") {
        for (std::size_t i = 1; i < res.trace.size(); ++i)
            CHECK(res.trace[i].energy >= res.trace[i - 1].energy - 1e-8);
        CHECK(res.profile.is_normalized(1e-8));
        CHECK(res.profile.values.back() <= 1e-6);
    }
    SECTION("solved drift is inward") {
        DriftField b = drift_field(res.profile);
        for (std::size_t i = 1; i < b.b.size(); ++i) CHECK(b.b[i] < 0.0);
    }
}

TEST_CASE("solver reports iteration-limit with residuals") {
    RadialGrid g(200, 10.0);
    CHECK_THROWS_AS(solve_ground_state(g, gaussian_profile(g, 1.0), 1e-8, 1), iteration_limit_error);
}

TEST_CASE("drift field is exact for log-quadratic profiles") {
    RadialGrid g(500, 8.0);
    double sigma = 0.9;
    RadialProfile psi = gaussian_profile(g, sigma);
    DriftField b = drift_field(psi);
    for (std::size_t i = 0; i < b.b.size(); ++i)
        CHECK(std::fabs(b.b[i] - (-g.r(i) / (2.0 * sigma * sigma))) < 1e-9);
    // interpolation between nodes and constant extrapolation past r_max
    CHECK(std::fabs(b.at(1.23456) - (-1.23456 / (2.0 * sigma * sigma))) < 1e-6);
    CHECK(b.at(100.0) == b.b.back());
}

TEST_CASE("drift field of a constant profile vanishes") {
    RadialGrid g(200, 5.0);
    RadialProfile flat{g, std::vector<double>(g.nodes(), 0.7)};  // unnormalizable test mode
    DriftField b = drift_field(flat);
    for (double x : b.b) CHECK(x == 0.0);
}

TEST_CASE("drift field rejects zero crossings") {
    RadialGrid g(200, 5.0);
    std::vector<double> v(g.nodes(), 1.0);
    v[100] = -1e-9;
    RadialProfile p{g, std::move(v)};
    CHECK_THROWS_AS(drift_field(p), numeric_error);
}

TEST_CASE("profile CSV round-trips") {
    RadialGrid g(150, 3.0);
    RadialProfile p = gaussian_profile(g, 0.5);
    std::stringstream ss;
    write_profile_csv(p, ss);
    RadialProfile back = read_profile_csv(ss);
    REQUIRE(back.values.size() == p.values.size());
    for (std::size_t i = 0; i < p.values.size(); ++i) CHECK(back.values[i] == p.values[i]);
    CHECK(back.grid.r_max == p.grid.r_max);
}
