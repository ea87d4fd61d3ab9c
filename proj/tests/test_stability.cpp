#include "support.hpp"

#include "emdyn/errors.hpp"
#include "emdyn/stability.hpp"

#include <doctest.h>

#include <cmath>

using namespace testing;

namespace {

struct Fitted {
    ModelSpec spec;
    Dataset data;
    MixtureParams star;
};

Fitted fit(const ModelSpec& spec, const MixtureParams& truth, int n, std::uint64_t seed) {
    Fitted f{spec, synthesize(spec, truth, n, seed), {}};
    const Trajectory t = run(spec, truth, f.data, {});
    REQUIRE(t.status == RunStatus::converged);
    f.star = unflatten(spec, t.last().theta);
    return f;
}

Fitted separated_gaussian() {
    return fit(gaussian_spec(2, 1), gaussian_params({0.4, 0.6}, {-3.0, 3.0}, {1.0, 1.0}), 200, 7);
}

Fitted separated_means_only() {
    return fit(means_only_spec(), gaussian_params({0.5, 0.5}, {-3.0, 3.0}, {1.0, 1.0}), 200, 7);
}

std::vector<Eigen::VectorXd> geometric(double ratio, int n) {
    std::vector<Eigen::VectorXd> out;
    const Eigen::Vector2d v(3.0, -4.0);
    for (int k = 0; k < n; ++k) out.emplace_back(Eigen::Vector2d(1.0, 1.0) + std::pow(ratio, k) * v);
    return out;
}

// L(z) = exp(-|z|^2) with F(z) = z / 2.
ChartProblem gaussian_bump(Eigen::Index dim) {
    ChartProblem p;
    p.dim = dim;
    p.log_objective = [](const Eigen::VectorXd& z) { return -z.squaredNorm(); };
    p.log_objective_after_step = [](const Eigen::VectorXd& z) { return -z.squaredNorm() / 4.0; };
    p.divergence = [](const Eigen::VectorXd& z) { return 0.1 * z.squaredNorm(); };
    return p;
}

}  // namespace

TEST_CASE("estimate_rate") {
    SUBCASE("geometric sequence") {
        const RateEstimate r = estimate_rate(geometric(0.5, 30), Eigen::Vector2d(1.0, 1.0));
        CHECK(std::abs(r.mu - 0.5) <= 1e-9);
        CHECK_FALSE(r.sublinear);
        CHECK(r.window.size() == 10);
    }
    SUBCASE("harmonic sequence is flagged sublinear") {
        std::vector<Eigen::VectorXd> states;
        for (int k = 1; k <= 200; ++k) states.emplace_back(Eigen::Vector2d(1.0 / k, 2.0 / k));
        const RateEstimate r = estimate_rate(states, Eigen::Vector2d::Zero());
        CHECK(r.mu > 0.99);
        CHECK(r.mu < 1.0);
        CHECK(r.sublinear);
    }
    SUBCASE("too few usable ratios") {
        std::vector<Eigen::VectorXd> states = geometric(0.5, 3);
        CHECK_THROWS_AS(estimate_rate(states, Eigen::Vector2d(1.0, 1.0)), InsufficientData);
        // Ratios whose denominator is below 1e-13 are discarded.
        states = geometric(1e-8, 10);
        CHECK_THROWS_AS(estimate_rate(states, Eigen::Vector2d(1.0, 1.0)), InsufficientData);
    }
    SUBCASE("EM on well-separated data") {
        const ModelSpec s = gaussian_spec(2, 1);
        const Dataset d = synthesize(s, gaussian_params({0.5, 0.5}, {-2.0, 2.0}, {1.0, 1.0}), 200, 3);
        const Trajectory t = run(s, random_init(s, d, 9), d, {});
        REQUIRE(t.status == RunStatus::converged);
        const RateEstimate r = estimate_rate(t, t.last().theta);
        CHECK(r.mu < 1.0);
        CHECK(r.mu >= 0.0);
    }
}

TEST_CASE("gamma formula") {
    CHECK(std::abs(*exponential_gamma(1.0, 0.5) - std::log(2.0)) <= 1e-12);
    CHECK_FALSE(exponential_gamma(1.0, 1.0).has_value());
    CHECK_FALSE(exponential_gamma(1.0, 0.0).has_value());
    CHECK_FALSE(exponential_gamma(0.5, 1.0).has_value());
}

TEST_CASE("verify_exponential_trace") {
    const Eigen::Vector2d star(1.0, 1.0);
    const TraceReport ok = verify_exponential_trace(geometric(0.5, 20), star, 1.0, std::log(2.0));
    CHECK(ok.holds);
    CHECK_FALSE(ok.first_violation.has_value());
    CHECK(ok.worst_ratio == doctest::Approx(1.0).epsilon(1e-12));
    const TraceReport bad = verify_exponential_trace(geometric(0.5, 20), star, 1.0, std::log(4.0));
    CHECK_FALSE(bad.holds);
    REQUIRE(bad.first_violation.has_value());
    CHECK(*bad.first_violation == 1);
}

TEST_CASE("exponential constants on an analytic objective") {
    ExponentialOptions opt;
    opt.radius = 0.1;
    opt.n_samples = 400;
    opt.seed = 3;
    const ExponentialConstants k = exponential_constants(gaussian_bump(3), opt);
    // Hessian of exp(-|z|^2) at 0 is -2 I.
    CHECK(k.a == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(k.a_center == doctest::Approx(1.0).epsilon(1e-6));
    // V / |z| = (1 - exp(-r^2)) / r is increasing in r, so d is attained on the outer shell.
    const double r = opt.radius;
    CHECK(k.d == doctest::Approx((1.0 - std::exp(-r * r)) / r).epsilon(1e-9));
    // (exp(-r^2/4) - exp(-r^2)) / r^2 decreases in r; the smallest sample ratio sits just inside r.
    CHECK(k.b <= 0.75);
    CHECK(k.b >= (std::exp(-r * r / 4.0) - std::exp(-r * r)) / (r * r) - 1e-12);
    REQUIRE(k.gamma.has_value());
    CHECK(*k.gamma == doctest::Approx(std::log(k.a) - std::log(k.a - k.b)).epsilon(1e-14));
    CHECK(*k.c == doctest::Approx(k.d / k.a).epsilon(1e-15));

    SUBCASE("log units use the Hessian of log L and the divergence") {
        ExponentialOptions lo = opt;
        lo.units = LyapunovUnits::log_likelihood;
        const ExponentialConstants kl = exponential_constants(gaussian_bump(3), lo);
        CHECK(kl.a == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(kl.b == doctest::Approx(0.1).epsilon(1e-9));
        CHECK(kl.d == doctest::Approx(r).epsilon(1e-9));
    }
    SUBCASE("a point above the center is rejected") {
        ChartProblem p = gaussian_bump(2);
        p.log_objective = [](const Eigen::VectorXd& z) { return z[0] - z.squaredNorm(); };
        CHECK_THROWS_AS(exponential_constants(p, opt), NotLocalMaxInBall);
    }
}

TEST_CASE("classify_equilibrium") {
    const Fitted f = separated_gaussian();
    SUBCASE("converged EM limit is a stationary local maximum") {
        const StabilityCertificate c = classify_equilibrium(f.spec, f.star, f.data);
        CHECK(c.is_fixed_point);
        CHECK(c.grad_norm <= 1e-5);
        CHECK(c.hessian_max_eigenvalue < 0.0);
        CHECK(c.classification == EquilibriumClass::local_max);
        ClassifyOptions best;
        best.best_known_loglik = c.loglik;
        CHECK(classify_equilibrium(f.spec, f.star, f.data, best).classification ==
              EquilibriumClass::mle_candidate);
    }
    SUBCASE("collapsed point on bimodal data is a saddle") {
        const StabilityCertificate c = classify_equilibrium(f.spec, collapsed_point(f.spec, f.data), f.data);
        CHECK(c.is_fixed_point);
        CHECK(c.grad_norm <= 1e-5);
        CHECK(c.hessian_max_eigenvalue > 0.0);
        CHECK(c.classification == EquilibriumClass::saddle);
    }
    SUBCASE("generic point is not stationary") {
        Rng rng(2);
        const StabilityCertificate c = classify_equilibrium(f.spec, random_params(f.spec, rng), f.data);
        CHECK_FALSE(c.is_fixed_point);
        CHECK(c.fixed_point_residual > 1e-8);
        CHECK(c.classification == EquilibriumClass::non_stationary);
    }
    SUBCASE("floors active means boundary") {
        MixtureParams edge = f.star;
        edge.weights = Eigen::Vector2d(1e-6, 1.0 - 1e-6);
        CHECK(classify_equilibrium(f.spec, edge, f.data).classification == EquilibriumClass::boundary);
    }
    SUBCASE("label permutation gives the same certificate") {
        const MixtureParams swapped = gaussian_params(
            {f.star.weights[1], f.star.weights[0]}, {f.star.means(1, 0), f.star.means(0, 0)},
            {std::exp(f.star.log_variances(1, 0)), std::exp(f.star.log_variances(0, 0))});
        MixtureParams exact = swapped;
        exact.log_variances(0, 0) = f.star.log_variances(1, 0);
        exact.log_variances(1, 0) = f.star.log_variances(0, 0);
        const StabilityCertificate a = classify_equilibrium(f.spec, f.star, f.data);
        const StabilityCertificate b = classify_equilibrium(f.spec, exact, f.data);
        CHECK(std::abs(a.loglik - b.loglik) <= 1e-10);
        CHECK(std::abs(a.grad_norm - b.grad_norm) <= 1e-10);
        CHECK(std::abs(a.fixed_point_residual - b.fixed_point_residual) <= 1e-10);
        CHECK(std::abs(a.hessian_max_eigenvalue - b.hessian_max_eigenvalue) <= 1e-10);
        CHECK(a.classification == b.classification);
    }
}

TEST_CASE("exponential constants on a fitted mixture") {
    const Fitted f = separated_gaussian();
    ExponentialOptions opt;
    opt.radius = 1e-2;
    opt.n_samples = 1000;
    opt.seed = 5;
    const ExponentialConstants k = exponential_constants(f.spec, f.star, f.data, opt);
    CHECK(k.a > 0.0);
    CHECK(k.b >= 0.0);
    CHECK(k.d >= 0.0);
    CHECK(k.a >= k.a_center - 1e-6);
    CHECK(k.a >= k.a_quadratic);
    CHECK(k.shells.size() == 8);
    CHECK(k.shells.back().radius == doctest::Approx(opt.radius / 256.0));

    SUBCASE("a denser resample agrees within 20%") {
        ExponentialOptions dense = opt;
        dense.n_samples = 10000;
        dense.seed = 6;
        const ExponentialConstants kd = exponential_constants(f.spec, f.star, f.data, dense);
        CHECK(std::abs(kd.a - k.a) <= 0.2 * kd.a);
        CHECK(std::abs(kd.b - k.b) <= 0.2 * kd.b);
        CHECK(std::abs(kd.d - k.d) <= 0.2 * kd.d);
    }
    SUBCASE("results do not depend on the thread count") {
        ExponentialOptions one = opt;
        one.threads = 1;
        ExponentialOptions four = opt;
        four.threads = 4;
        const ExponentialConstants a = exponential_constants(f.spec, f.star, f.data, one);
        const ExponentialConstants b = exponential_constants(f.spec, f.star, f.data, four);
        CHECK(a.a == b.a);
        CHECK(a.b == b.b);
        CHECK(a.d == b.d);
        CHECK(a.rejected_samples == b.rejected_samples);
    }
    SUBCASE("c = d / a grows linearly with the radius in the quadratic regime") {
        ExponentialOptions half = opt;
        half.radius = opt.radius / 2.0;
        const ExponentialConstants kh = exponential_constants(f.spec, f.star, f.data, half);
        CHECK(*kh.c / *k.c == doctest::Approx(0.5).epsilon(0.05));
    }
    SUBCASE("a saddle is not a local maximum in any ball") {
        CHECK_THROWS_AS(exponential_constants(f.spec, collapsed_point(f.spec, f.data), f.data, opt),
                        NotLocalMaxInBall);
    }
}

TEST_CASE("certify_stability") {
    SUBCASE("small radius: the envelope fails at k = 0 because c < 1") {
        const Fitted f = separated_gaussian();
        CertifyOptions opt;
        opt.exponential.seed = 7;
        const StabilityCertificate c = certify_stability(f.spec, f.star, f.data, opt);
        REQUIRE(c.constants.has_value());
        REQUIRE(c.constants->c.has_value());
        CHECK(*c.constants->c < 1.0);
        REQUIRE(c.trace.has_value());
        CHECK_FALSE(c.trace->holds);
        CHECK(*c.trace->first_violation == 0);
        REQUIRE(c.empirical_rate.has_value());
        CHECK(*c.empirical_rate < 1.0);
    }
    SUBCASE("radius 2 in log units on the two-mean model") {
        const Fitted f = separated_means_only();
        CertifyOptions opt;
        opt.exponential.seed = 7;
        opt.exponential.radius = 2.0;
        opt.exponential.units = LyapunovUnits::log_likelihood;
        const StabilityCertificate c = certify_stability(f.spec, f.star, f.data, opt);
        CHECK(c.classification == EquilibriumClass::local_max);
        REQUIRE(c.constants.has_value());
        const ExponentialConstants& k = *c.constants;
        REQUIRE(k.gamma.has_value());
        CHECK(k.a > k.b);
        CHECK(k.b > 0.0);
        REQUIRE(c.trace.has_value());
        CHECK(c.trace->holds);
        REQUIRE(c.empirical_rate.has_value());
        CHECK(*c.empirical_rate <= k.d / k.a + 0.05);
        CHECK(c.bound_satisfied.value_or(false));
    }
    SUBCASE("saddles get no constants") {
        const Fitted f = separated_gaussian();
        const StabilityCertificate c =
            certify_stability(f.spec, collapsed_point(f.spec, f.data), f.data, CertifyOptions{});
        CHECK_FALSE(c.constants.has_value());
        CHECK(c.classification == EquilibriumClass::saddle);
    }
}
