#pragma once

// Generic runner for discrete-time systems x[k+1] = F(x[k]), with limit-point
// deduplication and basin-of-attraction sampling.

#include "emdyn/em_core.hpp"
#include "emdyn/models.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace emdyn {

using StateMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct MapSystem {
    Eigen::Index dimension = 0;
    StateMap step;
    std::string label;
    // Empty: every finite state is valid.
    std::function<bool(const Eigen::VectorXd&)> is_valid;
    // Maps a state to a representative of its symmetry class before merging.
    StateMap canonicalize;
    // Columns span the directions used when sampling balls; empty = identity.
    Eigen::MatrixXd sampling_basis;
    // Optional diagnostic reported per initialization.
    std::function<double(const Eigen::VectorXd&)> gradient_norm;
};

// The EM (or delta-EM) map on flattened mixture parameters.
MapSystem mixture_map_system(const ModelSpec& spec, const Dataset& data,
                             const StepMap& step = StepMap::em());

// States x_0, x_1, ... up to n steps, stopping after the first step shorter
// than stop_tol. Throws NumericalError naming the index of an invalid state.
std::vector<Eigen::VectorXd> iterate_map(const MapSystem& system, const Eigen::VectorXd& x0,
                                         int n, double stop_tol);

enum class Outcome { converged, max_iters, diverged };

std::string_view to_string(Outcome outcome);

struct BasinOptions {
    int max_iters = 1000;
    double stop_tol = 1e-10;
    double merge_radius = 1e-5;
    bool canonicalize_labels = true;
    double divergence_norm = 1e6;
    unsigned threads = 0;
};

struct LimitPoint {
    Eigen::VectorXd state;
    int members = 0;
    double fixed_point_residual = 0.0;
    bool is_fixed_point = false;
};

struct InitAssignment {
    int init = 0;
    Outcome outcome = Outcome::max_iters;
    // Index into BasinReport::limit_points; -1 unless converged.
    int limit_point = -1;
    int iterations = 0;
    std::optional<double> final_grad_norm;
    Eigen::VectorXd initial_state;
    Eigen::VectorXd final_state;
};

struct BasinReport {
    std::vector<LimitPoint> limit_points;
    std::vector<InitAssignment> assignments;
    double merge_radius = 0.0;
    // basin_sample only.
    std::optional<Eigen::VectorXd> center;
    std::optional<double> radius;
    std::optional<std::uint64_t> seed;
    std::optional<double> return_fraction;
    int rejected_samples = 0;
};

BasinReport find_limit_points(const MapSystem& system,
                              const std::vector<Eigen::VectorXd>& initializations,
                              const BasinOptions& options = {});

// Samples n_samples initial states uniformly in the ball of `radius` around
// center (in the span of sampling_basis), iterates each and reports the
// fraction that returns to within merge_radius of the center.
BasinReport basin_sample(const MapSystem& system, const Eigen::VectorXd& center, double radius,
                         int n_samples, std::uint64_t seed, const BasinOptions& options = {});

}  // namespace emdyn
