#pragma once

// Shared fixtures and independent oracles for the test suites. The oracles
// recompute quantities from textbook formulas with plain loops and no
// log-space tricks, so they only see small, well-scaled inputs.

#include "emdyn/commands.hpp"
#include "emdyn/models.hpp"
#include "emdyn/rng.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace testing {

using namespace emdyn;

inline ModelSpec gaussian_spec(int k, int d) {
    ModelSpec spec;
    spec.family = Family::gaussian_diag;
    spec.n_components = k;
    spec.data_dim = d;
    return spec;
}

inline ModelSpec poisson_spec(int k) {
    ModelSpec spec;
    spec.family = Family::poisson;
    spec.n_components = k;
    spec.data_dim = 1;
    return spec;
}

// 1D two-component model with only the means free.
inline ModelSpec means_only_spec() {
    ModelSpec spec = gaussian_spec(2, 1);
    spec.estimate_weights = false;
    spec.estimate_variances = false;
    return spec;
}

inline MixtureParams gaussian_params(std::vector<double> w, std::vector<double> means,
                                     std::vector<double> variances) {
    MixtureParams theta;
    const auto k = static_cast<Eigen::Index>(w.size());
    theta.weights = Eigen::Map<Eigen::VectorXd>(w.data(), k);
    theta.means.resize(k, 1);
    theta.log_variances.resize(k, 1);
    for (Eigen::Index j = 0; j < k; ++j) {
        theta.means(j, 0) = means[static_cast<std::size_t>(j)];
        theta.log_variances(j, 0) = std::log(variances[static_cast<std::size_t>(j)]);
    }
    return theta;
}

inline Dataset dataset_1d(std::vector<double> y) {
    Dataset data;
    data.y = Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
    return data;
}

inline MixtureParams random_params(const ModelSpec& spec, Rng& rng) {
    const Eigen::Index k = spec.n_components;
    const Eigen::Index d = spec.data_dim;
    MixtureParams theta;
    theta.weights.resize(k);
    for (Eigen::Index j = 0; j < k; ++j) theta.weights[j] = 0.2 + rng.uniform();
    theta.weights /= theta.weights.sum();
    if (spec.family == Family::gaussian_diag) {
        theta.means.resize(k, d);
        theta.log_variances.resize(k, d);
        for (Eigen::Index j = 0; j < k; ++j) {
            for (Eigen::Index l = 0; l < d; ++l) {
                theta.means(j, l) = 4.0 * rng.uniform() - 2.0;
                theta.log_variances(j, l) = 2.0 * rng.uniform() - 1.0;
            }
        }
    } else {
        theta.rates.resize(k);
        for (Eigen::Index j = 0; j < k; ++j) theta.rates[j] = 0.5 + 6.0 * rng.uniform();
    }
    return theta;
}

// Two well separated clusters per dimension (gaussian) or two rate levels
// (poisson).
inline Dataset random_dataset(const ModelSpec& spec, int n, std::uint64_t seed) {
    MixtureParams truth;
    const Eigen::Index k = spec.n_components;
    const Eigen::Index d = spec.data_dim;
    truth.weights = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
    if (spec.family == Family::gaussian_diag) {
        truth.means.resize(k, d);
        truth.log_variances = Eigen::MatrixXd::Zero(k, d);
        for (Eigen::Index j = 0; j < k; ++j) {
            for (Eigen::Index l = 0; l < d; ++l) truth.means(j, l) = 4.0 * static_cast<double>(j) - 2.0;
        }
    } else {
        truth.rates.resize(k);
        for (Eigen::Index j = 0; j < k; ++j) truth.rates[j] = 2.0 + 8.0 * static_cast<double>(j);
    }
    return synthesize(spec, truth, n, seed);
}

// Component density written out directly.
inline double density_oracle(const ModelSpec& spec, const MixtureParams& theta, Eigen::Index j,
                             const Eigen::RowVectorXd& y) {
    if (spec.family == Family::gaussian_diag) {
        double p = 1.0;
        for (Eigen::Index l = 0; l < y.size(); ++l) {
            const double var = std::exp(theta.log_variances(j, l));
            const double z = y[l] - theta.means(j, l);
            p *= std::exp(-0.5 * z * z / var) / std::sqrt(2.0 * std::numbers::pi * var);
        }
        return p;
    }
    const double lambda = theta.rates[j];
    return std::pow(lambda, y[0]) * std::exp(-lambda) / std::tgamma(y[0] + 1.0);
}

inline Eigen::MatrixXd responsibilities_oracle(const ModelSpec& spec, const MixtureParams& theta,
                                               const Dataset& data) {
    const Eigen::Index n = data.size();
    const Eigen::Index k = spec.n_components;
    Eigen::MatrixXd r(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        double total = 0.0;
        for (Eigen::Index j = 0; j < k; ++j) {
            r(i, j) = theta.weights[j] * density_oracle(spec, theta, j, data.y.row(i));
            total += r(i, j);
        }
        r.row(i) /= total;
    }
    return r;
}

inline double loglik_oracle(const ModelSpec& spec, const MixtureParams& theta, const Dataset& data) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        double p = 0.0;
        for (Eigen::Index j = 0; j < spec.n_components; ++j) {
            p += theta.weights[j] * density_oracle(spec, theta, j, data.y.row(i));
        }
        total += std::log(p);
    }
    return total;
}

// Q(theta, theta_prime) by direct summation.
inline double q_oracle(const ModelSpec& spec, const MixtureParams& theta,
                       const MixtureParams& theta_prime, const Dataset& data) {
    const Eigen::MatrixXd r = responsibilities_oracle(spec, theta_prime, data);
    double total = 0.0;
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        for (Eigen::Index j = 0; j < spec.n_components; ++j) {
            total += r(i, j) * std::log(theta.weights[j] * density_oracle(spec, theta, j, data.y.row(i)));
        }
    }
    return total;
}

inline double kl_oracle(const Eigen::MatrixXd& from, const Eigen::MatrixXd& to) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < from.rows(); ++i) {
        for (Eigen::Index j = 0; j < from.cols(); ++j) {
            if (from(i, j) > 0.0) total += from(i, j) * std::log(from(i, j) / to(i, j));
        }
    }
    return total;
}

inline double entropy_oracle(const Eigen::MatrixXd& r) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
        for (Eigen::Index j = 0; j < r.cols(); ++j) {
            if (r(i, j) > 0.0) total -= r(i, j) * std::log(r(i, j));
        }
    }
    return total;
}

// Brute-force argmax of f over a square grid [lo, hi]^2 with spacing step,
// restricted to points accepted by `keep`.
template <typename F, typename Keep>
Eigen::Vector2d grid_argmax_2d(F f, double lo0, double hi0, double lo1, double hi1, double step,
                               Keep keep) {
    Eigen::Vector2d best(lo0, lo1);
    double best_value = -INFINITY;
    const int n0 = static_cast<int>(std::lround((hi0 - lo0) / step));
    const int n1 = static_cast<int>(std::lround((hi1 - lo1) / step));
    for (int a = 0; a <= n0; ++a) {
        for (int b = 0; b <= n1; ++b) {
            const Eigen::Vector2d x(lo0 + a * step, lo1 + b * step);
            if (!keep(x)) continue;
            const double v = f(x);
            if (v > best_value) {
                best_value = v;
                best = x;
            }
        }
    }
    return best;
}

}  // namespace testing
