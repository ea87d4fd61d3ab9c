#include "emdyn/lyapunov.hpp"

#include "emdyn/errors.hpp"

#include <cmath>

namespace emdyn {

std::string_view to_string(LyapunovUnits units) {
    return units == LyapunovUnits::likelihood ? "likelihood" : "log-likelihood";
}

LyapunovUnits units_from_string(std::string_view name) {
    if (name == "likelihood") return LyapunovUnits::likelihood;
    if (name == "log-likelihood" || name == "log") return LyapunovUnits::log_likelihood;
    throw InputError("unknown Lyapunov units '" + std::string(name) + "'");
}

double ScaledValue::value() const { return scaled * std::exp(log_scale); }

ScaledValue lyapunov_from_logliks(double loglik, double loglik_star, LyapunovUnits units) {
    if (units == LyapunovUnits::log_likelihood) return {loglik_star - loglik, 0.0};
    // L* - L = L* (1 - exp(l - l*))
    return {-std::expm1(loglik - loglik_star), loglik_star};
}

ScaledValue lyapunov_value(const ModelSpec& spec, const MixtureParams& theta,
                           const MixtureParams& theta_star, const Dataset& data,
                           LyapunovUnits units) {
    if (theta == theta_star) {
        const double l = log_likelihood(spec, theta_star, data);
        return {0.0, units == LyapunovUnits::likelihood ? l : 0.0};
    }
    return lyapunov_from_logliks(log_likelihood(spec, theta, data),
                                 log_likelihood(spec, theta_star, data), units);
}

ScaledValue lyapunov_decrement(const ModelSpec& spec, const MixtureParams& theta,
                               const MixtureParams& theta_star, const Dataset& data,
                               const StepMap& step, LyapunovUnits units) {
    const StepResult next = apply_step(spec, theta, data, step);
    const double l = log_likelihood(spec, theta, data);
    const double l_next = next.params == theta ? l : log_likelihood(spec, next.params, data);
    if (units == LyapunovUnits::log_likelihood) return {l - l_next, 0.0};
    const double l_star = log_likelihood(spec, theta_star, data);
    // (L - L(F)) / L* = exp(l - l*) - exp(l_next - l*)
    return {std::exp(l - l_star) - std::exp(l_next - l_star), l_star};
}

QDecomposition q_decomposition(const ModelSpec& spec, const MixtureParams& theta,
                               const MixtureParams& theta_prime, const Dataset& data) {
    const Responsibilities resp = responsibilities(spec, theta, data);
    const Responsibilities resp_prime = responsibilities(spec, theta_prime, data);
    QDecomposition out;
    out.q = q_function(spec, theta, resp_prime, data);
    out.loglik = log_likelihood(spec, theta, data);
    out.kl = posterior_kl(resp_prime, resp);
    out.entropy = posterior_entropy(resp_prime);
    return out;
}

double q_decomposition_residual(const ModelSpec& spec, const MixtureParams& theta,
                                const MixtureParams& theta_prime, const Dataset& data) {
    return q_decomposition(spec, theta, theta_prime, data).residual();
}

AscentCertificate ascent_certificate(const ModelSpec& spec, const MixtureParams& theta,
                                     const Dataset& data, const StepMap& step) {
    const StepResult next = apply_step(spec, theta, data, step);
    AscentCertificate out;
    out.rhs = log_likelihood(spec, theta, data);
    if (next.params == theta) {
        out.lhs = out.rhs;
        out.slack = 0.0;
        return out;
    }
    out.lhs = log_likelihood(spec, next.params, data) - posterior_kl(spec, theta, next.params, data);
    out.slack = out.lhs - out.rhs;
    return out;
}

LyapunovTrace lyapunov_trace(const ModelSpec& spec, const Trajectory& trajectory,
                             const MixtureParams& theta_star, const Dataset& data,
                             LyapunovUnits units) {
    LyapunovTrace trace;
    trace.theta_star = flatten(spec, theta_star);
    trace.loglik_star = log_likelihood(spec, theta_star, data);
    trace.units = units;
    const std::size_t n = trajectory.rows.size();
    trace.v.resize(n);
    trace.dv.assign(n, 0.0);
    trace.kl.resize(n);
    trace.slack.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto& row = trajectory.rows[k];
        trace.v[k] = lyapunov_from_logliks(row.loglik, trace.loglik_star, units).scaled;
        trace.kl[k] = row.kl_to_next;
        trace.slack[k] = row.ascent_slack;
    }
    for (std::size_t k = 0; k + 1 < n; ++k) trace.dv[k] = trace.v[k + 1] - trace.v[k];
    return trace;
}

LyapunovTrace lyapunov_trace(const ModelSpec& spec, const Trajectory& trajectory,
                             const Dataset& data, LyapunovUnits units) {
    if (trajectory.rows.empty()) throw InputError("empty trajectory");
    std::size_t best = 0;
    for (std::size_t k = 1; k < trajectory.rows.size(); ++k) {
        if (trajectory.rows[k].loglik > trajectory.rows[best].loglik) best = k;
    }
    return lyapunov_trace(spec, trajectory, unflatten(spec, trajectory.rows[best].theta), data,
                          units);
}

}  // namespace emdyn
