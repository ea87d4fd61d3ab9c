#pragma once

// Finite mixture models: parameter points, likelihood, exact posterior over
// component assignments, and the expected complete-data log-likelihood (the
// Q-function) together with the pieces of its KL/entropy decomposition.

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace emdyn {

enum class Family { gaussian_diag, poisson };

std::string_view to_string(Family family);
Family family_from_string(std::string_view name);

// Smallest admissible Poisson rate. Keeps log p(y) finite for y > 0 when a
// component has only zero-valued observations attached to it.
inline constexpr double kRateFloor = 1e-10;

struct ModelSpec {
    Family family = Family::gaussian_diag;
    int n_components = 1;
    int data_dim = 1;
    double variance_floor = 1e-8;
    double weight_floor = 1e-6;
    // Frozen blocks are carried through the M-step unchanged.
    bool estimate_weights = true;
    bool estimate_variances = true;

    void validate() const;

    // Length of the flattened parameter vector.
    std::size_t flat_size() const;
    // Offsets of the blocks inside the flattened vector.
    std::size_t weights_offset() const { return 0; }
    std::size_t means_offset() const { return static_cast<std::size_t>(n_components); }
    std::size_t log_variances_offset() const;
    std::size_t rates_offset() const { return static_cast<std::size_t>(n_components); }
};

// A point of the parameter space. For gaussian_diag: weights, means (K x d)
// and log-variances (K x d). For poisson: weights and rates (K).
struct MixtureParams {
    Eigen::VectorXd weights;
    Eigen::MatrixXd means;
    Eigen::MatrixXd log_variances;
    Eigen::VectorXd rates;

    bool operator==(const MixtureParams& other) const;
};

// Observations, one per row.
struct Dataset {
    Eigen::MatrixXd y;

    Eigen::Index size() const { return y.rows(); }
    Eigen::Index dim() const { return y.cols(); }
};

// Posterior component probabilities, one row per observation. log_prob is
// always finite; prob may underflow to 0 for extremely separated components.
struct Responsibilities {
    Eigen::MatrixXd prob;
    Eigen::MatrixXd log_prob;
};

// Throws InputError when the point violates the parameter invariants.
void validate_params(const ModelSpec& spec, const MixtureParams& theta);
bool is_valid(const ModelSpec& spec, const MixtureParams& theta);
void validate_dataset(const ModelSpec& spec, const Dataset& data);

// True when any estimated block sits on its floor.
bool floors_active(const ModelSpec& spec, const MixtureParams& theta,
                   double relative_margin = 1e-9);

// Flattening: [weights | means row-major | log_variances row-major] or
// [weights | rates]. unflatten renormalizes the weights only when their sum
// is off by more than 1e-14, so unflatten(flatten(theta)) == theta exactly.
Eigen::VectorXd flatten(const ModelSpec& spec, const MixtureParams& theta);
MixtureParams unflatten(const ModelSpec& spec, const Eigen::VectorXd& flat);

// Orthonormal basis (flat_size x m) of the directions the model can move
// in: the weight block restricted to sum-zero perturbations, minus frozen
// blocks. Used as the chart for derivatives and ball sampling.
Eigen::MatrixXd free_tangent_basis(const ModelSpec& spec);

// Projects a flattened direction onto the span of free_tangent_basis.
Eigen::VectorXd project_to_tangent(const ModelSpec& spec, const Eigen::VectorXd& direction);

// Builds the point where every component equals the single-component MLE
// with uniform weights. It is a fixed point of the EM map.
MixtureParams collapsed_point(const ModelSpec& spec, const Dataset& data);

// Sorts components by first mean coordinate (rate for poisson), ties broken
// lexicographically over the remaining component parameters.
MixtureParams canonicalize_labels(const ModelSpec& spec, const MixtureParams& theta);

// n x K matrix of log w_j + log p_j(y_i).
Eigen::MatrixXd weighted_log_densities(const ModelSpec& spec, const MixtureParams& theta,
                                       const Dataset& data);

double log_likelihood(const ModelSpec& spec, const MixtureParams& theta, const Dataset& data);

Responsibilities responsibilities(const ModelSpec& spec, const MixtureParams& theta,
                                  const Dataset& data);

// Q(theta, theta_prime) = sum_ij r'_ij [log w_j + log p_j(y_i; theta)].
double q_function(const ModelSpec& spec, const MixtureParams& theta,
                  const MixtureParams& theta_prime, const Dataset& data);
double q_function(const ModelSpec& spec, const MixtureParams& theta,
                  const Responsibilities& resp_prime, const Dataset& data);

// Gradient of Q(., theta_prime) at theta in flattened coordinates (no
// projection applied).
Eigen::VectorXd q_gradient(const ModelSpec& spec, const MixtureParams& theta,
                           const Responsibilities& resp_prime, const Dataset& data);

// D_KL(theta_prime || theta) = sum_ij r'_ij log(r'_ij / r_ij).
double posterior_kl(const ModelSpec& spec, const MixtureParams& theta_prime,
                    const MixtureParams& theta, const Dataset& data);
double posterior_kl(const Responsibilities& from, const Responsibilities& to);

// H(theta_prime) = -sum_ij r'_ij log r'_ij.
double posterior_entropy(const ModelSpec& spec, const MixtureParams& theta_prime,
                         const Dataset& data);
double posterior_entropy(const Responsibilities& resp);

struct MStepResult {
    MixtureParams params;
    // Some component received less than 1e-10 * n posterior mass.
    bool degenerate = false;
    bool floors_active = false;
};

// Closed-form maximizer of Q(., theta_prime) over the floored parameter set.
MStepResult m_step(const ModelSpec& spec, const MixtureParams& theta_prime,
                   const Dataset& data);
MStepResult m_step(const ModelSpec& spec, const MixtureParams& theta_prime,
                   const Responsibilities& resp_prime, const Dataset& data);

// Starting point for a fit: uniform weights, means at distinct seeded
// observations, log-variances at the pooled sample variance.
MixtureParams random_init(const ModelSpec& spec, const Dataset& data, std::uint64_t seed);

}  // namespace emdyn
