#include "support.hpp"

#include "emdyn/errors.hpp"
#include "emdyn/numdiff.hpp"
#include "emdyn/stability.hpp"

#include <doctest.h>

#include <cmath>

using namespace testing;

TEST_CASE("gradient of a quadratic form") {
    Eigen::Matrix3d A;
    A << 2.0, 0.5, -1.0, 0.5, 3.0, 0.25, -1.0, 0.25, 1.5;
    const auto f = [&](const Eigen::VectorXd& x) { return x.dot(A * x); };
    const Eigen::Vector3d x(0.3, -1.2, 2.0);
    const Eigen::VectorXd g = numeric_gradient(f, x);
    CHECK((g - 2.0 * A * x).norm() <= 1e-8);
    const Eigen::MatrixXd H = numeric_hessian(f, x);
    CHECK((H - 2.0 * A).norm() <= 1e-6);
    CHECK((H - H.transpose()).norm() == 0.0);
}

TEST_CASE("derivatives of a test polynomial match the analytic ones") {
    // f(x, y, z) = x^3 y - 2 y^2 z + z^4 / 4 + x z
    const auto f = [](const Eigen::VectorXd& v) {
        const double x = v[0], y = v[1], z = v[2];
        return x * x * x * y - 2.0 * y * y * z + z * z * z * z / 4.0 + x * z;
    };
    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
        const Eigen::Vector3d v(2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0);
        const double x = v[0], y = v[1], z = v[2];
        const Eigen::Vector3d grad(3.0 * x * x * y + z, x * x * x - 4.0 * y * z, -2.0 * y * y + z * z * z + x);
        Eigen::Matrix3d hess;
        hess << 6.0 * x * y, 3.0 * x * x, 1.0,
                3.0 * x * x, -4.0 * z, -4.0 * y,
                1.0, -4.0 * y, 3.0 * z * z;
        CHECK((numeric_gradient(f, v) - grad).cwiseAbs().maxCoeff() <= 1e-7);
        CHECK((numeric_hessian(f, v) - hess).cwiseAbs().maxCoeff() <= 1e-5);
    }
}

TEST_CASE("log-likelihood gradient vanishes at a single-component MLE") {
    const ModelSpec s = gaussian_spec(1, 2);
    const Dataset d = random_dataset(s, 40, 4);
    const MixtureParams mle = m_step(s, collapsed_point(s, d), d).params;
    CHECK(log_likelihood_gradient(s, mle, d).norm() <= 1e-6);
}

TEST_CASE("non-finite evaluations name the probe point") {
    const auto f = [](const Eigen::VectorXd& v) { return v[0] > 0.0 ? std::log(-1.0) : v[0]; };
    try {
        numeric_gradient(f, Eigen::VectorXd::Zero(1));
        FAIL("expected a numerical error");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("1e-05") != std::string::npos);
    }
    CHECK_THROWS_AS(numeric_hessian(f, Eigen::VectorXd::Zero(1)), NumericalError);
}
