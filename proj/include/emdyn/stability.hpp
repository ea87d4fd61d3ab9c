#pragma once

// Equilibrium classification, empirical convergence rates and the
// exponential-stability constants (a, b, d, gamma, c = d/a).
//
// Derivatives and ball sampling work in the tangent chart
// theta = theta* + U z, where U = free_tangent_basis(spec). The chart keeps
// the weights on the simplex slice, so ||z|| equals the flattened-vector
// distance ||theta - theta*||.

#include "emdyn/em_core.hpp"
#include "emdyn/lyapunov.hpp"
#include "emdyn/models.hpp"
#include "emdyn/numdiff.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace emdyn {

// log L as a function of chart coordinates around `origin`.
ScalarField chart_log_likelihood(const ModelSpec& spec, const MixtureParams& origin,
                                 const Dataset& data);

// Gradient of log L in chart coordinates at theta.
Eigen::VectorXd log_likelihood_gradient(const ModelSpec& spec, const MixtureParams& theta,
                                        const Dataset& data, double h = 1e-5);

enum class EquilibriumClass {
    mle_candidate,
    local_max,
    saddle,
    local_min,
    degenerate,
    non_stationary,
    boundary,
};

std::string_view to_string(EquilibriumClass c);

struct ClassifyOptions {
    double grad_tol = 1e-5;
    double fixed_point_tol = 1e-8;
    double eig_margin = 1e-10;
    double gradient_step = 1e-5;
    double hessian_step = 1e-4;
    StepMap step = StepMap::em();
    // When set, a local max whose log-likelihood reaches this value (within
    // 1e-9 relative) is labelled mle_candidate.
    std::optional<double> best_known_loglik;
};

struct ShellDiagnostic {
    double radius = 0.0;
    int samples = 0;
    double max_ratio = 0.0;
    double running_max = 0.0;
};

struct ExponentialConstants {
    LyapunovUnits units = LyapunovUnits::likelihood;
    // Likelihood-unit constants are relative to L(theta*) = exp(log_scale).
    double log_scale = 0.0;
    double a = 0.0;
    // -1/2 lambda_min of the Hessian at the center alone.
    double a_center = 0.0;
    // max V / ||theta - theta*||^2 over all samples; a must dominate it.
    double a_quadratic = 0.0;
    double b = 0.0;
    double d = 0.0;
    std::optional<double> gamma;
    std::optional<double> c;
    std::string gamma_reason;
    // True when the innermost shell still raised the running max of V/||.||.
    bool d_inner_increasing = false;
    std::vector<ShellDiagnostic> shells;
    double radius = 0.0;
    int n_samples = 0;
    int rejected_samples = 0;
    std::uint64_t seed = 0;
};

// gamma = log a - log(a - b), defined when a > b > 0.
std::optional<double> exponential_gamma(double a, double b);

struct ExponentialOptions {
    double radius = 1e-2;
    int n_samples = 1000;
    std::uint64_t seed = 0;
    LyapunovUnits units = LyapunovUnits::likelihood;
    int n_shells = 8;
    double shell_span = 256.0;
    // Points per shell; 0 means max(1, n_samples / n_shells).
    int shell_samples = 0;
    double gradient_step = 1e-5;
    double hessian_step = 1e-4;
    unsigned threads = 0;

    void validate() const;
};

// An objective expressed in chart coordinates with z = 0 the reference point.
// Lets the constants machinery run on arbitrary smooth functions.
struct ChartProblem {
    Eigen::Index dim = 0;
    // log L(z).
    std::function<double(const Eigen::VectorXd&)> log_objective;
    // log L(F(z)); needed for b in likelihood units.
    std::function<double(const Eigen::VectorXd&)> log_objective_after_step;
    // D_KL(theta || F(theta)); needed for b in log units.
    std::function<double(const Eigen::VectorXd&)> divergence;
    // Points outside the parameter set are resampled; empty = all valid.
    std::function<bool(const Eigen::VectorXd&)> is_valid;
};

ExponentialConstants exponential_constants(const ChartProblem& problem,
                                           const ExponentialOptions& options);

// The ChartProblem for a mixture around theta_star, using `step` for F.
ChartProblem mixture_chart_problem(const ModelSpec& spec, const MixtureParams& theta_star,
                                   const Dataset& data, const StepMap& step = StepMap::em());

ExponentialConstants exponential_constants(const ModelSpec& spec, const MixtureParams& theta_star,
                                           const Dataset& data, const ExponentialOptions& options,
                                           const StepMap& step = StepMap::em());

struct RateEstimate {
    double mu = 0.0;
    int valid_ratios = 0;
    // Ratios in the window increase monotonically toward 1.
    bool sublinear = false;
    std::vector<double> window;
};

// Median of the last `window` ratios ||x_{k+1} - x*|| / ||x_k - x*||,
// skipping ratios whose denominator is below min_denominator. Throws
// InsufficientData with fewer than 3 valid ratios.
RateEstimate estimate_rate(const std::vector<Eigen::VectorXd>& states,
                           const Eigen::VectorXd& theta_star, int window = 10,
                           double min_denominator = 1e-13);
RateEstimate estimate_rate(const Trajectory& trajectory, const Eigen::VectorXd& theta_star);

struct TraceReport {
    bool holds = true;
    std::optional<int> first_violation;
    // max_k ||x_k - x*|| / (c e^{-gamma k} ||x_0 - x*||)
    double worst_ratio = 0.0;
};

// Checks ||x_k - x*|| <= c e^{-gamma k} ||x_0 - x*|| for every k (relative
// slack 1e-12 for rounding in the envelope).
TraceReport verify_exponential_trace(const std::vector<Eigen::VectorXd>& states,
                                     const Eigen::VectorXd& theta_star, double c, double gamma);

struct StabilityCertificate {
    Eigen::VectorXd theta_star;
    double loglik = 0.0;
    bool is_fixed_point = false;
    double fixed_point_residual = 0.0;
    double grad_norm = 0.0;
    double hessian_max_eigenvalue = 0.0;
    double hessian_min_eigenvalue = 0.0;
    EquilibriumClass classification = EquilibriumClass::non_stationary;

    std::optional<ExponentialConstants> constants;
    // Filled when constants were certified (a > b > 0).
    std::optional<double> empirical_rate;
    std::optional<bool> bound_satisfied;
    std::optional<TraceReport> trace;
    std::string note;
};

// Components are canonicalized first, so label-permuted inputs produce the
// same certificate.
StabilityCertificate classify_equilibrium(const ModelSpec& spec, const MixtureParams& theta_star,
                                          const Dataset& data,
                                          const ClassifyOptions& options = {});

struct CertifyOptions {
    ClassifyOptions classify;
    ExponentialOptions exponential;
    // EM run used for the empirical rate starts on the sphere of this
    // fraction of the radius, in a seeded direction.
    double start_fraction = 0.5;
    SolverConfig solver;
};

// classify_equilibrium, then (for local maxima) exponential_constants, an EM
// run started inside the ball, its empirical rate, the mu <= d/a check and
// the exponential envelope check.
StabilityCertificate certify_stability(const ModelSpec& spec, const MixtureParams& theta_star,
                                       const Dataset& data, const CertifyOptions& options);

}  // namespace emdyn
