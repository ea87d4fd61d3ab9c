#include "support.hpp"

#include "emdyn/errors.hpp"
#include "emdyn/lyapunov.hpp"

#include <doctest.h>

#include <cmath>

using namespace testing;

namespace {

struct Fitted {
    ModelSpec spec;
    Dataset data;
    MixtureParams star;
};

Fitted fitted_gaussian() {
    Fitted f;
    f.spec = gaussian_spec(2, 1);
    f.data = synthesize(f.spec, gaussian_params({0.4, 0.6}, {-2.0, 2.0}, {1.0, 1.0}), 120, 3);
    const Trajectory t = run(f.spec, random_init(f.spec, f.data, 2), f.data, {});
    REQUIRE(t.status == RunStatus::converged);
    f.star = unflatten(f.spec, t.last().theta);
    return f;
}

// Uniform point of the ball of radius r around x in the span of U.
Eigen::VectorXd ball_point(Rng& rng, const Eigen::VectorXd& x, const Eigen::MatrixXd& U, double r) {
    Eigen::VectorXd z(U.cols());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
    const double rho = r * std::pow(rng.uniform(), 1.0 / static_cast<double>(z.size()));
    return x + U * (z * (rho / z.norm()));
}

}  // namespace

TEST_CASE("lyapunov_value") {
    const ModelSpec s = gaussian_spec(2, 1);
    const Dataset d = dataset_1d({-1.2, 0.3, 0.9, 2.0, 2.2});
    const MixtureParams star = gaussian_params({0.5, 0.5}, {-0.5, 1.5}, {1.0, 0.8});
    CHECK(lyapunov_value(s, star, star, d).scaled == 0.0);
    CHECK(lyapunov_value(s, star, star, d, LyapunovUnits::log_likelihood).scaled == 0.0);

    SUBCASE("direct evaluation oracle") {
        Rng rng(4);
        for (int t = 0; t < 30; ++t) {
            const MixtureParams theta = random_params(s, rng);
            const double l_star = std::exp(loglik_oracle(s, star, d));
            const double l = std::exp(loglik_oracle(s, theta, d));
            const ScaledValue v = lyapunov_value(s, theta, star, d);
            CHECK(v.value() == doctest::Approx(l_star - l).epsilon(1e-10).scale(l_star));
            const ScaledValue lv = lyapunov_value(s, theta, star, d, LyapunovUnits::log_likelihood);
            CHECK(lv.value() == doctest::Approx(std::log(l_star) - std::log(l)).epsilon(1e-12));
        }
    }
    SUBCASE("lower likelihood gives a positive value") {
        MixtureParams worse = star;
        worse.means(0, 0) = -10.0;
        CHECK(log_likelihood(s, worse, d) < log_likelihood(s, star, d));
        CHECK(lyapunov_value(s, worse, star, d).scaled > 0.0);
    }
    SUBCASE("large datasets do not underflow") {
        const Fitted f = fitted_gaussian();
        MixtureParams nudged = f.star;
        nudged.means(0, 0) += 0.01;
        const ScaledValue v = lyapunov_value(f.spec, nudged, f.star, f.data);
        CHECK(v.scaled > 0.0);
        CHECK(v.log_scale < -100.0);
    }
}

TEST_CASE("lyapunov_decrement") {
    const Fitted f = fitted_gaussian();
    SUBCASE("zero at a fixed point") {
        const MixtureParams c = collapsed_point(f.spec, f.data);
        CHECK(lyapunov_decrement(f.spec, c, f.star, f.data, StepMap::em()).scaled == 0.0);
    }
    SUBCASE("non-positive at random points") {
        Rng rng(6);
        for (int t = 0; t < 100; ++t) {
            const MixtureParams theta = random_params(f.spec, rng);
            for (LyapunovUnits u : {LyapunovUnits::likelihood, LyapunovUnits::log_likelihood}) {
                const ScaledValue dv = lyapunov_decrement(f.spec, theta, f.star, f.data, StepMap::em(), u);
                CHECK(dv.scaled <= 1e-12 * (1.0 + std::abs(dv.scaled)));
            }
        }
    }
    SUBCASE("V positive definite and decrement negative definite near the maximizer") {
        Rng rng(8);
        const Eigen::VectorXd x = flatten(f.spec, f.star);
        const Eigen::MatrixXd U = free_tangent_basis(f.spec);
        for (int t = 0; t < 1000; ++t) {
            const MixtureParams theta = unflatten(f.spec, ball_point(rng, x, U, 1e-2));
            CHECK(lyapunov_value(f.spec, theta, f.star, f.data).scaled >= 0.0);
            CHECK(lyapunov_decrement(f.spec, theta, f.star, f.data, StepMap::em()).scaled < -1e-14);
        }
    }
}

TEST_CASE("Q decomposition residual") {
    Rng rng(12);
    SUBCASE("identity on random pairs, both families") {
        for (const ModelSpec& s : {gaussian_spec(3, 2), poisson_spec(3)}) {
            const Dataset d = random_dataset(s, 50, 13);
            for (int t = 0; t < 500; ++t) {
                const MixtureParams a = random_params(s, rng);
                const MixtureParams b = random_params(s, rng);
                const QDecomposition q = q_decomposition(s, a, b, d);
                CHECK(std::abs(q.residual()) <= 1e-8 * (1.0 + std::abs(q.q)));
            }
        }
    }
    SUBCASE("equal arguments") {
        const ModelSpec s = gaussian_spec(2, 1);
        const Dataset d = random_dataset(s, 20, 3);
        const MixtureParams a = random_params(s, rng);
        const QDecomposition q = q_decomposition(s, a, a, d);
        CHECK(q.kl == 0.0);
        CHECK(std::abs(q.residual()) <= 1e-10 * (1.0 + std::abs(q.q)));
    }
    SUBCASE("a wrong KL breaks the identity") {
        const ModelSpec s = gaussian_spec(2, 1);
        const Dataset d = random_dataset(s, 30, 5);
        double worst_reversed = 0.0;
        double worst_dropped_term = 0.0;
        for (int t = 0; t < 20; ++t) {
            const MixtureParams a = random_params(s, rng);
            const MixtureParams b = random_params(s, rng);
            QDecomposition q = q_decomposition(s, a, b, d);
            // Divergence taken in the wrong direction.
            QDecomposition reversed = q;
            reversed.kl = posterior_kl(s, a, b, d);
            worst_reversed = std::max(worst_reversed, std::abs(reversed.residual()));
            // Divergence summed over all but the last observation.
            Dataset head;
            head.y = d.y.topRows(d.size() - 1);
            QDecomposition dropped = q;
            dropped.kl = posterior_kl(s, b, a, head);
            worst_dropped_term = std::max(worst_dropped_term, std::abs(dropped.residual()));
        }
        CHECK(worst_reversed > 1e-3);
        CHECK(worst_dropped_term > 1e-6);
    }
}

TEST_CASE("ascent_certificate") {
    const Fitted f = fitted_gaussian();
    SUBCASE("fixed point has zero slack") {
        const MixtureParams c = collapsed_point(f.spec, f.data);
        for (const StepMap& m : {StepMap::em(), StepMap::delta_em(1e-3)}) {
            const AscentCertificate cert = ascent_certificate(f.spec, c, f.data, m);
            CHECK(cert.slack == 0.0);
            CHECK(cert.lhs == cert.rhs);
        }
    }
    SUBCASE("random points have non-negative slack") {
        Rng rng(14);
        for (int t = 0; t < 100; ++t) {
            const MixtureParams theta = random_params(f.spec, rng);
            CHECK(ascent_certificate(f.spec, theta, f.data, StepMap::em()).slack >= -1e-9);
            CHECK(ascent_certificate(f.spec, theta, f.data, StepMap::delta_em(1e-2)).slack >= -1e-9);
        }
    }
}

TEST_CASE("lyapunov_trace along an EM run") {
    const ModelSpec s = gaussian_spec(2, 1);
    const Dataset d = random_dataset(s, 80, 15);
    const Trajectory t = run(s, random_init(s, d, 4), d, {});
    for (LyapunovUnits u : {LyapunovUnits::likelihood, LyapunovUnits::log_likelihood}) {
        const LyapunovTrace trace = lyapunov_trace(s, t, d, u);
        REQUIRE(trace.v.size() == t.rows.size());
        for (std::size_t k = 0; k < trace.v.size(); ++k) {
            CHECK(trace.v[k] >= -1e-12);
            CHECK(trace.dv[k] <= 1e-12);
            CHECK(trace.slack[k] == t.rows[k].ascent_slack);
        }
        CHECK(trace.dv.back() == 0.0);
    }
}

TEST_CASE("units names") {
    CHECK(units_from_string("likelihood") == LyapunovUnits::likelihood);
    CHECK(units_from_string(to_string(LyapunovUnits::log_likelihood)) == LyapunovUnits::log_likelihood);
    CHECK_THROWS_AS(units_from_string("bits"), InputError);
}
