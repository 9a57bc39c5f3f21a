#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "polaron/io.hpp"
#include "polaron/renewal.hpp"

using namespace polaron;

namespace {

RenewalOptions fast_opts() {
    RenewalOptions o;
    o.f_options.quadrature_n_max = 2;
    o.f_options.importance_samples = 2048;
    o.f_options.smc_particles = 256;
    return o;
}

}  // namespace

TEST_CASE("q(lambda): decay, monotonicity and the n=1 analytic sub-sum", "[qlambda]") {
    const double alpha = 1.0;
    Rng rng = make_rng(41, 0, "q");
    RenewalOptions opt = fast_opts();
    opt.n_clusters = 1200;
    auto ens = sample_cluster_ensemble(alpha, rng, opt);

    SECTION("dominated decay and pointwise monotonicity under shared seeds") {
        double prev = 1e300;
        for (double lam : {0.0, 0.25, 0.5, 1.0, 2.0, 5.0, 20.0}) {
            QEstimate qe = q_of_ensemble(alpha, lam, ens);
            CHECK(qe.q < prev);
            prev = qe.q;
        }
        CHECK(q_of_ensemble(alpha, 50.0, ens).q < 1e-3);
    }
    SECTION("restriction to single-interval clusters matches the analytic integral") {
        for (double lam : {0.2, 0.8}) {
            std::vector<double> w(ens.size(), 0.0);
            for (std::size_t i = 0; i < ens.size(); ++i)
                if (ens[i].cluster.n() == 1) w[i] = std::exp(ens[i].log_weight(lam));
            // e^{-(1+alpha+lam) l} sqrt(2/(pi l)) integrated over l, via l = t^2
            double rate = 1.0 + alpha + lam;
            double analytic = 2.0 * std::sqrt(2.0 / M_PI) *
                              integrate([&](double t) { return std::exp(-rate * t * t); }, 0.0, 30.0, 1e-12);
            CHECK(std::fabs(analytic - std::sqrt(2.0 / rate)) < 1e-9);  // sanity on the oracle itself
            double mean = vec_mean(w);
            double se = std::sqrt(vec_variance(w) / double(w.size()));
            CHECK(std::fabs(mean - analytic) < 3.0 * se);
        }
    }
    SECTION("q_lambda front door") {
        Rng r2 = make_rng(41, 1, "q");
        QEstimate qe = q_lambda(alpha, 0.5, 600, r2, fast_opts());
        CHECK(qe.q > 0.5);
        CHECK(qe.q < 1.3);
        CHECK(qe.stderr_ > 0);
        CHECK_THROWS_AS(q_lambda(alpha, -2.0, 100, r2, fast_opts()), config_error);  // lambda <= -alpha
    }
}

TEST_CASE("heavy-tail warning fires where a few clusters dominate") {
    Rng rng = make_rng(41, 2, "qheavy");
    RenewalOptions opt = fast_opts();
    opt.n_clusters = 500;
    auto ens = sample_cluster_ensemble(2.0, rng, opt);
    CHECK(q_of_ensemble(2.0, 0.05, ens).heavy_tail);  // dominated by rare large clusters
    CHECK(!q_of_ensemble(2.0, 2.5, ens).heavy_tail);  // tilt suppresses them
}

TEST_CASE("solve_lambda finds the tilt root at alpha=1", "[lambda]") {
    Rng rng = make_rng(41, 3, "root");
    RenewalOptions opt = fast_opts();
    opt.n_clusters = 1500;
    LambdaSolveResult ls = solve_lambda(1.0, 0.05, 2.0, 1e-3, rng, opt);
    CHECK(ls.lambda_star > 0.1);
    CHECK(ls.lambda_star < 1.0);
    // by construction of the stopping rule
    CHECK(std::fabs(ls.q_at_root.q - 1.0) < 3.0 * std::max(ls.q_at_root.stderr_, 1e-3));
    // the recorded curve is monotone in lambda
    for (std::size_t i = 1; i < ls.curve.size(); ++i) CHECK(ls.curve[i].q <= ls.curve[i - 1].q + 1e-12);
}

TEST_CASE("solve_lambda raises root-not-found on a bracket without sign change") {
    Rng rng = make_rng(41, 4, "root");
    RenewalOptions opt = fast_opts();
    opt.n_clusters = 600;
    // at alpha=2 the stable region lambda >= 1 has q < 1 throughout
    CHECK_THROWS_AS(solve_lambda(2.0, 1.0, 2.5, 1e-3, rng, opt), root_not_found_error);
}

TEST_CASE("lambda* grows with alpha (shared seeds)", "[lambda][heavy]") {
    RenewalOptions opt = fast_opts();
    opt.n_clusters = 300;
    double prev = 0.0;
    struct Box {
        double alpha, lo, hi;
    };
    for (Box b : {Box{1.0, 0.05, 2.0}, Box{4.0, 0.5, 4.0}, Box{8.0, 2.0, 9.0}}) {
        Rng rng = make_rng(41, 5, "mono");  // same stream for every alpha
        LambdaSolveResult ls = solve_lambda(b.alpha, b.lo, b.hi, 5e-3, rng, opt);
        CHECK(ls.lambda_star > prev);
        prev = ls.lambda_star;
    }
}

TEST_CASE("tilted sampler", "[tilted]") {
    SECTION("test mode (F forced to 1, lambda=0) reproduces Pi_alpha") {
        Rng rng = make_rng(41, 6, "tilt");
        RenewalOptions opt = fast_opts();
        opt.force_unit_weight = true;
        auto tilted = sample_tilted_clusters(1.0, 0.0, 3000, rng, opt);
        std::vector<double> ja(tilted.size());
        for (std::size_t i = 0; i < tilted.size(); ++i) ja[i] = tilted[i].j_length;
        std::vector<double> jb;
        for (int i = 0; i < 3000; ++i) jb.push_back(sample_busy_period(1.0, rng).j_length());
        double ks = ks_distance(ja, jb);
        CHECK(ks < 1.36 * std::sqrt(2.0 / 3000.0));  // 5% KS band
    }
    SECTION("tilt shrinks clusters: E[J] under the tilted law is smaller") {
        Rng rng = make_rng(41, 7, "tilt");
        RenewalOptions opt = fast_opts();
        double lambda = 0.45;
        TiltedSamplerStats stats;
        auto tilted = sample_tilted_clusters(1.0, lambda, 500, rng, opt, &stats);
        std::vector<double> jt(tilted.size());
        for (std::size_t i = 0; i < tilted.size(); ++i) jt[i] = tilted[i].j_length;
        std::vector<double> jp;
        for (int i = 0; i < 4000; ++i) jp.push_back(sample_busy_period(1.0, rng).j_length());
        double se = std::sqrt(vec_variance(jt) / jt.size() + vec_variance(jp) / jp.size());
        CHECK(vec_mean(jt) < vec_mean(jp) - 1.0 * se);
        CHECK(stats.acceptance > 1e-3);
    }
}

TEST_CASE("sigma2 of the cluster representation", "[sigma2]") {
    SECTION("test mode: all variances forced to sigma* gives exactly 1") {
        Rng rng = make_rng(41, 8, "s2");
        RenewalOptions opt = fast_opts();
        opt.force_unit_weight = true;
        Sigma2Result r = sigma2(1.0, 0.0, 200, rng, Sigma2Mode::rejection, opt);
        CHECK(r.value == 1.0);
    }
    SECTION("alpha=1 at the solved tilt lies in (0,1]") {
        Rng rng = make_rng(41, 9, "s2");
        RenewalOptions opt = fast_opts();
        opt.n_clusters = 1200;
        LambdaSolveResult ls = solve_lambda(1.0, 0.05, 2.0, 1e-3, rng, opt);
        Sigma2Result r = sigma2(1.0, ls.lambda_star, 400, rng, Sigma2Mode::automatic, opt);
        CHECK(r.value > 0.0);
        CHECK(r.value <= 1.0 + 3.0 * r.stderr_);
        CHECK(r.stderr_ < 0.05);
        // rejection and importance modes agree
        Rng rng2 = make_rng(41, 10, "s2");
        Sigma2Result ri = sigma2(1.0, ls.lambda_star, 2000, rng2, Sigma2Mode::importance, opt);
        CHECK(std::fabs(r.value - ri.value) < 3.0 * std::sqrt(sq(r.stderr_) + sq(ri.stderr_)));
    }
}

TEST_CASE("assembled stationary polaron", "[assemble]") {
    SECTION("untilted test mode is Brownian") {
        Rng rng = make_rng(41, 11, "asm");
        RenewalOptions opt = fast_opts();
        opt.force_unit_weight = true;
        AssembledPath ap = assemble_stationary_polaron(1.0, 0.0, 2000.0, 0.05, rng, opt);
        std::vector<double> sq_inc;
        double lag = 1.0;
        for (double s = 0; s + lag <= ap.span(); s += 5.0 * lag) {
            Vec3 d = ap.at(s + lag) - ap.at(s);
            for (int c = 0; c < 3; ++c) sq_inc.push_back(d[c] * d[c]);
        }
        double se = std::sqrt(vec_variance(sq_inc) / double(sq_inc.size()));
        CHECK(std::fabs(vec_mean(sq_inc) - lag) < 3.0 * se);
    }
    SECTION("renewal consistency and long-run variance at alpha=1") {
        Rng rng = make_rng(41, 12, "asm");
        RenewalOptions opt = fast_opts();
        opt.n_clusters = 1200;
        LambdaSolveResult ls = solve_lambda(1.0, 0.05, 2.0, 1e-3, rng, opt);
        double lam = ls.lambda_star;
        AssembledPath ap = assemble_stationary_polaron(1.0, lam, 800.0, 0.02, rng, opt);
        double gap_sum = 0, cluster_sum = 0;
        std::vector<double> gaps, clens;
        for (const auto& s : ap.config.segments) {
            (s.dormant ? gap_sum : cluster_sum) += s.length;
            (s.dormant ? gaps : clens).push_back(s.length);
        }
        double c = 1.0 / (1.0 + lam);
        // realized dormant means match Exp(alpha+lambda)
        double se_gap = std::sqrt(vec_variance(gaps) / double(gaps.size()));
        CHECK(std::fabs(vec_mean(gaps) - c) < 3.0 * se_gap);
        // dormant time fraction matches the renewal-reward ratio built from
        // the sampler's own cluster means
        double frac = gap_sum / (gap_sum + cluster_sum);
        double expect = c / (c + vec_mean(clens));
        double se_frac = se_gap / (c + vec_mean(clens));  // leading-order
        double se_cl = std::sqrt(vec_variance(clens) / double(clens.size()));
        double comb = std::sqrt(sq(se_frac) + sq(se_cl * frac / (c + vec_mean(clens))));
        CHECK(std::fabs(frac - expect) < 3.0 * comb + 0.01);
        // long-run increment variance per unit time tracks sigma2(alpha)
        Rng rng2 = make_rng(41, 13, "asm");
        Sigma2Result s2 = sigma2(1.0, lam, 400, rng2, Sigma2Mode::automatic, opt);
        double lag = 4.0;
        std::vector<double> sq_inc;
        for (double s = 0; s + lag <= ap.span(); s += 2.5 * lag) {
            Vec3 d = ap.at(s + lag) - ap.at(s);
            for (int cc = 0; cc < 3; ++cc) sq_inc.push_back(d[cc] * d[cc]);
        }
        double rate = vec_mean(sq_inc) / lag;
        double se_rate = std::sqrt(vec_variance(sq_inc) / double(sq_inc.size())) / lag * 2.0;  // correlated windows
        CHECK(std::fabs(rate - s2.value) < 3.0 * std::sqrt(sq(se_rate) + sq(s2.stderr_)));
    }
}

TEST_CASE("mixing configuration JSON round-trip") {
    Rng rng = make_rng(41, 14, "json");
    RenewalOptions opt = fast_opts();
    opt.n_clusters = 5;
    AssembledPath ap = assemble_stationary_polaron(1.0, 0.4, 5.0, 0.05, rng, opt);
    json j = mixing_to_json(ap.config);
    MixingConfiguration back = mixing_from_json(j);
    REQUIRE(back.segments.size() == ap.config.segments.size());
    for (std::size_t i = 0; i < back.segments.size(); ++i) {
        CHECK(back.segments[i].dormant == ap.config.segments[i].dormant);
        if (!back.segments[i].dormant) {
            REQUIRE(back.segments[i].cluster.n() == ap.config.segments[i].cluster.n());
            CHECK(back.segments[i].u.u == ap.config.segments[i].u.u);
            CHECK(back.segments[i].cluster.j_length() == ap.config.segments[i].cluster.j_length());
        } else {
            CHECK(back.segments[i].length == ap.config.segments[i].length);
        }
    }
}
