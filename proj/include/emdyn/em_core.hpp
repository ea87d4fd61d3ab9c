#pragma once

// The EM and delta-EM iteration maps and the solver loop that iterates them.

#include "emdyn/models.hpp"

#include <Eigen/Core>

#include <optional>
#include <string_view>
#include <vector>

namespace emdyn {

// Projected gradient ascent used when the unconstrained M-step leaves the
// delta-ball. init_step defaults to delta / 4.
struct InnerAscentConfig {
    int max_steps = 200;
    std::optional<double> init_step;
    double shrink = 0.5;
    double grad_tol = 1e-10;

    void validate() const;
};

struct SolverConfig {
    int max_iters = 1000;
    double step_tol = 1e-10;
    // Present: delta-EM with this ball radius. Absent: plain EM.
    std::optional<double> delta;
    InnerAscentConfig inner;

    void validate() const;
};

struct StepResult {
    MixtureParams params;
    bool degenerate = false;
    bool floors_active = false;
    // delta-EM found no point improving Q; params equals the input.
    bool stalled = false;
};

// A step map selector: EM when delta is empty, delta-EM otherwise.
struct StepMap {
    std::optional<double> delta;
    InnerAscentConfig inner;

    static StepMap em() { return {}; }
    static StepMap delta_em(double radius, InnerAscentConfig inner = {}) {
        return {radius, inner};
    }
    static StepMap from(const SolverConfig& config) { return {config.delta, config.inner}; }
};

StepResult em_step(const ModelSpec& spec, const MixtureParams& theta, const Dataset& data);

StepResult delta_em_step(const ModelSpec& spec, const MixtureParams& theta, const Dataset& data,
                         double delta, const InnerAscentConfig& inner = {});

// Maximizes Q(., theta) over the closed delta-ball around theta (flattened
// Euclidean norm) intersected with the parameter set. Accepts the closed-form
// M-step when it lies in the ball; otherwise runs projected gradient ascent
// from the better of the radial projection of that maximizer and theta
// itself. The returned point never has lower Q than theta.
StepResult constrained_q_maximize(const ModelSpec& spec, const MixtureParams& theta,
                                  const Dataset& data, double delta,
                                  const InnerAscentConfig& inner);

StepResult apply_step(const ModelSpec& spec, const MixtureParams& theta, const Dataset& data,
                      const StepMap& map);

enum class RunStatus { converged, max_iters, degenerate };

std::string_view to_string(RunStatus status);

// Row k describes theta_k. step_norm is ||theta_k - theta_{k-1}|| (0 for
// k = 0). ascent_slack and kl_to_next describe the transition to
// theta_{k+1} and are 0 on the final row, where no transition was taken.
struct TrajectoryRow {
    int k = 0;
    Eigen::VectorXd theta;
    double loglik = 0.0;
    double step_norm = 0.0;
    double ascent_slack = 0.0;
    double kl_to_next = 0.0;
};

struct Trajectory {
    std::vector<TrajectoryRow> rows;
    RunStatus status = RunStatus::max_iters;
    // True when any delta-EM step stalled.
    bool stalled = false;

    std::vector<Eigen::VectorXd> states() const;
    const TrajectoryRow& last() const { return rows.back(); }
};

Trajectory run(const ModelSpec& spec, const MixtureParams& theta0, const Dataset& data,
               const SolverConfig& config);

}  // namespace emdyn
