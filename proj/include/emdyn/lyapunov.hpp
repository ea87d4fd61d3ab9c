#pragma once

// Lyapunov candidate V(theta) = L(theta*) - L(theta) and its decrement along
// the EM / delta-EM maps.
//
// In likelihood units the raw likelihoods underflow for all but tiny
// datasets, so values are carried as (scaled, log_scale) with
// value = scaled * exp(log_scale). log_scale is log L(theta*), i.e. scaled
// values are relative to the likelihood of the reference point. In log units
// V = log L(theta*) - log L(theta) and log_scale is 0.

#include "emdyn/em_core.hpp"
#include "emdyn/models.hpp"

#include <string_view>
#include <vector>

namespace emdyn {

enum class LyapunovUnits { likelihood, log_likelihood };

std::string_view to_string(LyapunovUnits units);
LyapunovUnits units_from_string(std::string_view name);

struct ScaledValue {
    double scaled = 0.0;
    double log_scale = 0.0;

    // May underflow to 0 or overflow; prefer `scaled` for comparisons.
    double value() const;
};

// V from two log-likelihoods.
ScaledValue lyapunov_from_logliks(double loglik, double loglik_star, LyapunovUnits units);

ScaledValue lyapunov_value(const ModelSpec& spec, const MixtureParams& theta,
                           const MixtureParams& theta_star, const Dataset& data,
                           LyapunovUnits units = LyapunovUnits::likelihood);

// Delta V(theta) = V(F(theta)) - V(theta) = L(theta) - L(F(theta)).
ScaledValue lyapunov_decrement(const ModelSpec& spec, const MixtureParams& theta,
                               const MixtureParams& theta_star, const Dataset& data,
                               const StepMap& step,
                               LyapunovUnits units = LyapunovUnits::likelihood);

// The four independently computed terms of Q(theta, theta') =
// log L(theta) - D_KL(theta' || theta) - H(theta').
struct QDecomposition {
    double q = 0.0;
    double loglik = 0.0;
    double kl = 0.0;
    double entropy = 0.0;

    double residual() const { return q - loglik + kl + entropy; }
};

QDecomposition q_decomposition(const ModelSpec& spec, const MixtureParams& theta,
                               const MixtureParams& theta_prime, const Dataset& data);

double q_decomposition_residual(const ModelSpec& spec, const MixtureParams& theta,
                                const MixtureParams& theta_prime, const Dataset& data);

// lhs = log L(F(theta)) - D_KL(theta || F(theta)), rhs = log L(theta).
struct AscentCertificate {
    double lhs = 0.0;
    double rhs = 0.0;
    double slack = 0.0;
};

AscentCertificate ascent_certificate(const ModelSpec& spec, const MixtureParams& theta,
                                     const Dataset& data, const StepMap& step);

struct LyapunovTrace {
    Eigen::VectorXd theta_star;
    double loglik_star = 0.0;
    LyapunovUnits units = LyapunovUnits::likelihood;
    // Per trajectory row. dV is 0 on the last row.
    std::vector<double> v;
    std::vector<double> dv;
    std::vector<double> kl;
    std::vector<double> slack;
};

// Reference point defaults to the highest-likelihood row of the trajectory.
LyapunovTrace lyapunov_trace(const ModelSpec& spec, const Trajectory& trajectory,
                             const Dataset& data,
                             LyapunovUnits units = LyapunovUnits::likelihood);
LyapunovTrace lyapunov_trace(const ModelSpec& spec, const Trajectory& trajectory,
                             const MixtureParams& theta_star, const Dataset& data,
                             LyapunovUnits units = LyapunovUnits::likelihood);

}  // namespace emdyn
