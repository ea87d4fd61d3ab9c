#include "emdyn/harness.hpp"

#include "emdyn/errors.hpp"
#include "emdyn/parallel.hpp"
#include "emdyn/rng.hpp"
#include "emdyn/stability.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

namespace emdyn {

namespace {

constexpr std::uint64_t kBasinSalt = 0xBA5E;

bool state_ok(const MapSystem& system, const Eigen::VectorXd& x) {
    if (x.size() != system.dimension || !x.allFinite()) return false;
    return !system.is_valid || system.is_valid(x);
}

[[noreturn]] void invalid_state(const MapSystem& system, int index) {
    std::ostringstream msg;
    msg << "map '" << system.label << "' produced an invalid state at index " << index;
    throw NumericalError(msg.str());
}

}  // namespace

MapSystem mixture_map_system(const ModelSpec& spec, const Dataset& data, const StepMap& step) {
    spec.validate();
    validate_dataset(spec, data);
    auto shared = std::make_shared<const Dataset>(data);

    MapSystem system;
    system.dimension = static_cast<Eigen::Index>(spec.flat_size());
    system.label = step.delta ? "delta-em" : "em";
    system.step = [spec, shared, step](const Eigen::VectorXd& x) {
        return flatten(spec, apply_step(spec, unflatten(spec, x), *shared, step).params);
    };
    system.is_valid = [spec](const Eigen::VectorXd& x) {
        return is_valid(spec, unflatten(spec, x));
    };
    system.canonicalize = [spec](const Eigen::VectorXd& x) {
        return flatten(spec, canonicalize_labels(spec, unflatten(spec, x)));
    };
    system.sampling_basis = free_tangent_basis(spec);
    system.gradient_norm = [spec, shared](const Eigen::VectorXd& x) {
        return log_likelihood_gradient(spec, unflatten(spec, x), *shared).norm();
    };
    return system;
}

std::vector<Eigen::VectorXd> iterate_map(const MapSystem& system, const Eigen::VectorXd& x0,
                                         int n, double stop_tol) {
    if (!system.step) throw InputError("map system has no step function");
    if (!state_ok(system, x0)) invalid_state(system, 0);
    std::vector<Eigen::VectorXd> states{x0};
    for (int k = 0; k < n; ++k) {
        Eigen::VectorXd next = system.step(states.back());
        if (!state_ok(system, next)) invalid_state(system, k + 1);
        const double step = (next - states.back()).norm();
        states.push_back(std::move(next));
        if (step < stop_tol) break;
    }
    return states;
}

std::string_view to_string(Outcome outcome) {
    switch (outcome) {
        case Outcome::converged: return "converged";
        case Outcome::max_iters: return "max-iters";
        case Outcome::diverged: return "diverged";
    }
    return "unknown";
}

namespace {

// Runs one trajectory; divergence is declared on invalid states or
// ||x|| > divergence_norm.
InitAssignment trace_one(const MapSystem& system, int index, const Eigen::VectorXd& x0,
                         const BasinOptions& options) {
    InitAssignment out;
    out.init = index;
    out.initial_state = x0;
    Eigen::VectorXd x = x0;
    if (!state_ok(system, x)) {
        out.outcome = Outcome::diverged;
        out.final_state = x;
        return out;
    }
    out.outcome = Outcome::max_iters;
    for (int k = 0; k < options.max_iters; ++k) {
        Eigen::VectorXd next;
        try {
            next = system.step(x);
        } catch (const std::exception&) {
            out.outcome = Outcome::diverged;
            break;
        }
        out.iterations = k + 1;
        if (!state_ok(system, next) || next.norm() > options.divergence_norm) {
            x = std::move(next);
            out.outcome = Outcome::diverged;
            break;
        }
        const double step = (next - x).norm();
        x = std::move(next);
        if (step < options.stop_tol) {
            out.outcome = Outcome::converged;
            break;
        }
    }
    out.final_state = x;
    if (out.outcome == Outcome::converged && system.gradient_norm) {
        try {
            out.final_grad_norm = system.gradient_norm(x);
        } catch (const std::exception&) {
        }
    }
    return out;
}

BasinReport merge(const MapSystem& system, std::vector<InitAssignment> assignments,
                  const BasinOptions& options) {
    BasinReport report;
    report.merge_radius = options.merge_radius;
    for (auto& a : assignments) {
        if (a.outcome != Outcome::converged) continue;
        const Eigen::VectorXd key = options.canonicalize_labels && system.canonicalize
                                        ? system.canonicalize(a.final_state)
                                        : a.final_state;
        int found = -1;
        for (std::size_t p = 0; p < report.limit_points.size(); ++p) {
            if ((report.limit_points[p].state - key).norm() <= options.merge_radius) {
                found = static_cast<int>(p);
                break;
            }
        }
        if (found < 0) {
            LimitPoint lp;
            lp.state = key;
            report.limit_points.push_back(std::move(lp));
            found = static_cast<int>(report.limit_points.size()) - 1;
        }
        a.limit_point = found;
        ++report.limit_points[static_cast<std::size_t>(found)].members;
    }
    // Every limit point of a continuous map is a fixed point of it.
    for (auto& lp : report.limit_points) {
        try {
            lp.fixed_point_residual = (system.step(lp.state) - lp.state).norm();
        } catch (const std::exception&) {
            lp.fixed_point_residual = std::numeric_limits<double>::infinity();
        }
        lp.is_fixed_point = lp.fixed_point_residual <= 10.0 * options.stop_tol;
    }
    report.assignments = std::move(assignments);
    return report;
}

}  // namespace

BasinReport find_limit_points(const MapSystem& system,
                              const std::vector<Eigen::VectorXd>& initializations,
                              const BasinOptions& options) {
    if (!system.step) throw InputError("map system has no step function");
    std::vector<InitAssignment> assignments(initializations.size());
    parallel_for(initializations.size(), options.threads, [&](std::size_t i) {
        assignments[i] = trace_one(system, static_cast<int>(i), initializations[i], options);
    });
    return merge(system, std::move(assignments), options);
}

BasinReport basin_sample(const MapSystem& system, const Eigen::VectorXd& center, double radius,
                         int n_samples, std::uint64_t seed, const BasinOptions& options) {
    if (!(radius > 0.0)) throw InputError("basin radius must be > 0");
    if (n_samples < 0) throw InputError("n_samples must be >= 0");
    if (!state_ok(system, center)) throw InputError("basin center is not a valid state");

    const Eigen::MatrixXd basis = system.sampling_basis.size() > 0
                                      ? system.sampling_basis
                                      : Eigen::MatrixXd::Identity(system.dimension, system.dimension);
    const Eigen::Index m = basis.cols();

    const auto count = static_cast<std::size_t>(n_samples);
    std::vector<Eigen::VectorXd> inits(count);
    std::vector<char> drawn(count, 0);
    parallel_for(count, options.threads, [&](std::size_t i) {
        Rng rng(seed, i, kBasinSalt);
        for (int attempt = 0; attempt < 100; ++attempt) {
            Eigen::VectorXd dir(m);
            for (Eigen::Index c = 0; c < m; ++c) dir[c] = rng.normal();
            const double norm = dir.norm();
            if (!(norm > 0.0)) continue;
            const double rho = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(m));
            Eigen::VectorXd x = center + basis * (dir * (rho / norm));
            if (state_ok(system, x)) {
                inits[i] = std::move(x);
                drawn[i] = 1;
                return;
            }
        }
    });

    std::vector<Eigen::VectorXd> accepted;
    int rejected = 0;
    for (std::size_t i = 0; i < count; ++i) {
        if (drawn[i]) {
            accepted.push_back(inits[i]);
        } else {
            ++rejected;
        }
    }

    BasinReport report = find_limit_points(system, accepted, options);
    report.center = center;
    report.radius = radius;
    report.seed = seed;
    report.rejected_samples = rejected;
    if (!accepted.empty()) {
        const Eigen::VectorXd key = options.canonicalize_labels && system.canonicalize
                                        ? system.canonicalize(center)
                                        : center;
        int returned = 0;
        for (const auto& a : report.assignments) {
            if (a.outcome != Outcome::converged) continue;
            const Eigen::VectorXd end = options.canonicalize_labels && system.canonicalize
                                            ? system.canonicalize(a.final_state)
                                            : a.final_state;
            if ((end - key).norm() <= options.merge_radius) ++returned;
        }
        report.return_fraction = static_cast<double>(returned) / static_cast<double>(accepted.size());
    }
    return report;
}

}  // namespace emdyn
