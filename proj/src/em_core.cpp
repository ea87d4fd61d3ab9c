#include "emdyn/em_core.hpp"

#include "emdyn/errors.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace emdyn {

void InnerAscentConfig::validate() const {
    if (max_steps < 0) throw InputError("inner_ascent.max_steps must be >= 0");
    if (init_step && !(*init_step > 0.0)) throw InputError("inner_ascent.init_step must be > 0");
    if (!(shrink > 0.0 && shrink < 1.0)) throw InputError("inner_ascent.shrink must be in (0,1)");
    if (!(grad_tol >= 0.0)) throw InputError("inner_ascent.grad_tol must be >= 0");
}

void SolverConfig::validate() const {
    if (max_iters < 1) throw InputError("max_iters must be >= 1");
    if (!(step_tol > 0.0)) throw InputError("step_tol must be > 0");
    if (delta && !(*delta > 0.0)) throw InputError("delta must be > 0");
    inner.validate();
}

std::string_view to_string(RunStatus status) {
    switch (status) {
        case RunStatus::converged: return "converged";
        case RunStatus::max_iters: return "max_iters";
        case RunStatus::degenerate: return "degenerate";
    }
    return "unknown";
}

std::vector<Eigen::VectorXd> Trajectory::states() const {
    std::vector<Eigen::VectorXd> out;
    out.reserve(rows.size());
    for (const auto& row : rows) out.push_back(row.theta);
    return out;
}

StepResult em_step(const ModelSpec& spec, const MixtureParams& theta, const Dataset& data) {
    MStepResult m = m_step(spec, theta, data);
    return {std::move(m.params), m.degenerate, m.floors_active, false};
}

namespace {

// Radial projection onto the closed ball. The radius is shaved by a few ulps
// so the rounded result never lands outside.
Eigen::VectorXd project_to_ball(const Eigen::VectorXd& center, const Eigen::VectorXd& x,
                                double radius) {
    const Eigen::VectorXd offset = x - center;
    const double norm = offset.norm();
    if (norm <= radius) return x;
    const double shaved = radius * (1.0 - 8.0 * std::numeric_limits<double>::epsilon());
    return center + offset * (shaved / norm);
}

}  // namespace

StepResult constrained_q_maximize(const ModelSpec& spec, const MixtureParams& theta,
                                  const Dataset& data, double delta,
                                  const InnerAscentConfig& inner) {
    if (!(delta > 0.0)) throw InputError("delta must be > 0");
    inner.validate();

    const Responsibilities resp = responsibilities(spec, theta, data);
    MStepResult unconstrained = m_step(spec, theta, resp, data);

    const Eigen::VectorXd center = flatten(spec, theta);
    const Eigen::VectorXd target = flatten(spec, unconstrained.params);
    if ((target - center).norm() <= delta) {
        return {std::move(unconstrained.params), unconstrained.degenerate,
                unconstrained.floors_active, false};
    }

    // Q(., theta) on flattened points; invalid points score -inf.
    auto objective = [&](const Eigen::VectorXd& flat) {
        const MixtureParams candidate = unflatten(spec, flat);
        if (!is_valid(spec, candidate)) return -std::numeric_limits<double>::infinity();
        return q_function(spec, candidate, resp, data);
    };

    const double q_start = q_function(spec, theta, resp, data);
    Eigen::VectorXd x = center;
    double q_x = q_start;
    {
        const Eigen::VectorXd radial = project_to_ball(center, target, delta);
        const double q_radial = objective(radial);
        if (q_radial > q_x) {
            x = radial;
            q_x = q_radial;
        }
    }

    const double init_step = inner.init_step.value_or(delta / 4.0);
    double scale = -1.0;  // multiplier on the gradient; fixed on first use
    for (int step = 0; step < inner.max_steps; ++step) {
        const MixtureParams current = unflatten(spec, x);
        const Eigen::VectorXd grad =
            project_to_tangent(spec, q_gradient(spec, current, resp, data));
        const double grad_norm = grad.norm();
        if (!(grad_norm > inner.grad_tol)) break;
        if (scale < 0.0) scale = init_step / grad_norm;

        bool improved = false;
        Eigen::VectorXd y;
        double q_y = 0.0;
        for (int tries = 0; tries < 60; ++tries) {
            y = project_to_ball(center, x + scale * grad, delta);
            q_y = objective(y);
            if (q_y > q_x) {
                improved = true;
                break;
            }
            scale *= inner.shrink;
        }
        if (!improved) break;

        // Gradient-mapping norm: how far the projected step actually moved.
        const double mapping = (y - x).norm() / scale;
        x = y;
        q_x = q_y;
        scale *= 2.0;
        if (mapping <= inner.grad_tol) break;
    }

    if (!(q_x > q_start)) {
        StepResult stalled{theta, false, false, true};
        return stalled;
    }
    MixtureParams out = unflatten(spec, x);
    const bool floors = floors_active(spec, out);
    return {std::move(out), unconstrained.degenerate, floors, false};
}

StepResult delta_em_step(const ModelSpec& spec, const MixtureParams& theta, const Dataset& data,
                         double delta, const InnerAscentConfig& inner) {
    return constrained_q_maximize(spec, theta, data, delta, inner);
}

StepResult apply_step(const ModelSpec& spec, const MixtureParams& theta, const Dataset& data,
                      const StepMap& map) {
    if (map.delta) return delta_em_step(spec, theta, data, *map.delta, map.inner);
    return em_step(spec, theta, data);
}

namespace {

[[noreturn]] void abort_non_finite(int k, const Eigen::VectorXd& theta, const std::string& why) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "non-finite log-likelihood at iterate " << k << " (" << why << "); theta = [";
    for (Eigen::Index i = 0; i < theta.size(); ++i) msg << (i ? ", " : "") << theta[i];
    msg << "]";
    throw NumericalError(msg.str());
}

double checked_loglik(const ModelSpec& spec, const MixtureParams& theta, const Dataset& data,
                      int k) {
    try {
        const double value = log_likelihood(spec, theta, data);
        if (!std::isfinite(value)) abort_non_finite(k, flatten(spec, theta), "overflow");
        return value;
    } catch (const DomainError& e) {
        abort_non_finite(k, flatten(spec, theta), e.what());
    }
}

}  // namespace

Trajectory run(const ModelSpec& spec, const MixtureParams& theta0, const Dataset& data,
               const SolverConfig& config) {
    spec.validate();
    config.validate();
    validate_dataset(spec, data);
    validate_params(spec, theta0);

    const StepMap map = StepMap::from(config);
    Trajectory traj;
    MixtureParams theta = theta0;
    const double loglik0 = checked_loglik(spec, theta, data, 0);
    Responsibilities resp = responsibilities(spec, theta, data);
    traj.rows.push_back({0, flatten(spec, theta), loglik0, 0.0, 0.0, 0.0});

    for (int k = 0; k < config.max_iters; ++k) {
        StepResult next;
        try {
            next = apply_step(spec, theta, data, map);
        } catch (const DomainError& e) {
            abort_non_finite(k, flatten(spec, theta), e.what());
        }
        traj.stalled = traj.stalled || next.stalled;

        const double loglik = checked_loglik(spec, next.params, data, k + 1);
        Responsibilities next_resp = responsibilities(spec, next.params, data);
        const double kl = posterior_kl(resp, next_resp);
        TrajectoryRow& row = traj.rows.back();
        row.kl_to_next = kl;
        row.ascent_slack = loglik - row.loglik - kl;

        Eigen::VectorXd flat = flatten(spec, next.params);
        const double step_norm = (flat - row.theta).norm();
        traj.rows.push_back({k + 1, std::move(flat), loglik, step_norm, 0.0, 0.0});

        if (next.degenerate) {
            traj.status = RunStatus::degenerate;
            return traj;
        }
        if (step_norm < config.step_tol) {
            traj.status = RunStatus::converged;
            return traj;
        }
        theta = std::move(next.params);
        resp = std::move(next_resp);
    }
    traj.status = RunStatus::max_iters;
    return traj;
}

}  // namespace emdyn
