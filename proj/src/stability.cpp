#include "emdyn/stability.hpp"

#include "emdyn/errors.hpp"
#include "emdyn/parallel.hpp"
#include "emdyn/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

namespace emdyn {

namespace {

constexpr std::uint64_t kBallSalt = 0xBA11;
constexpr std::uint64_t kShellSalt = 0x5E11;
constexpr std::uint64_t kStartSalt = 0x57A7;
constexpr int kMaxRejections = 100;

Eigen::VectorXd random_direction(Rng& rng, Eigen::Index dim) {
    Eigen::VectorXd v(dim);
    double norm = 0.0;
    do {
        for (Eigen::Index i = 0; i < dim; ++i) v[i] = rng.normal();
        norm = v.norm();
    } while (!(norm > 0.0));
    return v / norm;
}

// Uniform in the open ball of the given radius.
Eigen::VectorXd random_in_ball(Rng& rng, Eigen::Index dim, double radius) {
    const Eigen::VectorXd dir = random_direction(rng, dim);
    const double u = rng.uniform();
    return dir * (radius * std::pow(u, 1.0 / static_cast<double>(dim)));
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
    if (m.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

}  // namespace

ScalarField chart_log_likelihood(const ModelSpec& spec, const MixtureParams& origin,
                                 const Dataset& data) {
    auto shared = std::make_shared<const Dataset>(data);
    Eigen::VectorXd center = flatten(spec, origin);
    Eigen::MatrixXd basis = free_tangent_basis(spec);
    return [spec, shared, center = std::move(center), basis = std::move(basis)](
               const Eigen::VectorXd& z) {
        return log_likelihood(spec, unflatten(spec, center + basis * z), *shared);
    };
}

Eigen::VectorXd log_likelihood_gradient(const ModelSpec& spec, const MixtureParams& theta,
                                        const Dataset& data, double h) {
    const Eigen::MatrixXd basis = free_tangent_basis(spec);
    return numeric_gradient(chart_log_likelihood(spec, theta, data),
                            Eigen::VectorXd::Zero(basis.cols()), h);
}

std::string_view to_string(EquilibriumClass c) {
    switch (c) {
        case EquilibriumClass::mle_candidate: return "MLE-candidate";
        case EquilibriumClass::local_max: return "local-max";
        case EquilibriumClass::saddle: return "saddle";
        case EquilibriumClass::local_min: return "local-min";
        case EquilibriumClass::degenerate: return "degenerate";
        case EquilibriumClass::non_stationary: return "non-stationary";
        case EquilibriumClass::boundary: return "boundary";
    }
    return "unknown";
}

StabilityCertificate classify_equilibrium(const ModelSpec& spec, const MixtureParams& theta_star,
                                          const Dataset& data, const ClassifyOptions& options) {
    validate_params(spec, theta_star);
    validate_dataset(spec, data);
    const MixtureParams canon = canonicalize_labels(spec, theta_star);

    StabilityCertificate cert;
    cert.theta_star = flatten(spec, canon);
    cert.loglik = log_likelihood(spec, canon, data);

    const StepResult next = apply_step(spec, canon, data, options.step);
    cert.fixed_point_residual = (flatten(spec, next.params) - cert.theta_star).norm();
    cert.is_fixed_point = cert.fixed_point_residual <= options.fixed_point_tol;

    // Difference probes would leave the parameter set at a floored point.
    if (floors_active(spec, canon)) {
        cert.classification = EquilibriumClass::boundary;
        cert.grad_norm = std::numeric_limits<double>::quiet_NaN();
        cert.hessian_max_eigenvalue = std::numeric_limits<double>::quiet_NaN();
        cert.hessian_min_eigenvalue = std::numeric_limits<double>::quiet_NaN();
        cert.note = "parameter floors active; no curvature claims";
        return cert;
    }

    const ScalarField f = chart_log_likelihood(spec, canon, data);
    const Eigen::VectorXd origin = Eigen::VectorXd::Zero(free_tangent_basis(spec).cols());
    cert.grad_norm = numeric_gradient(f, origin, options.gradient_step).norm();
    const Eigen::MatrixXd hess = numeric_hessian(f, origin, options.hessian_step);
    if (hess.size() > 0) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(hess, Eigen::EigenvaluesOnly);
        cert.hessian_max_eigenvalue = solver.eigenvalues().maxCoeff();
        cert.hessian_min_eigenvalue = solver.eigenvalues().minCoeff();
    }

    const double margin = options.eig_margin;
    if (cert.grad_norm > options.grad_tol) {
        cert.classification = EquilibriumClass::non_stationary;
    } else if (cert.hessian_max_eigenvalue < -margin) {
        cert.classification = EquilibriumClass::local_max;
        if (options.best_known_loglik &&
            cert.loglik >= *options.best_known_loglik -
                               1e-9 * (1.0 + std::abs(*options.best_known_loglik))) {
            cert.classification = EquilibriumClass::mle_candidate;
        }
    } else if (cert.hessian_max_eigenvalue > margin && cert.hessian_min_eigenvalue < -margin) {
        cert.classification = EquilibriumClass::saddle;
    } else if (cert.hessian_min_eigenvalue > margin) {
        cert.classification = EquilibriumClass::local_min;
    } else {
        cert.classification = EquilibriumClass::degenerate;
    }
    return cert;
}

std::optional<double> exponential_gamma(double a, double b) {
    if (a > b && b > 0.0) return std::log(a) - std::log(a - b);
    return std::nullopt;
}

void ExponentialOptions::validate() const {
    if (!(radius > 0.0)) throw InputError("radius must be > 0");
    if (n_samples < 0) throw InputError("n_samples must be >= 0");
    if (n_shells < 1) throw InputError("n_shells must be >= 1");
    if (!(shell_span >= 1.0)) throw InputError("shell_span must be >= 1");
    if (shell_samples < 0) throw InputError("shell_samples must be >= 0");
    if (!(gradient_step > 0.0) || !(hessian_step > 0.0)) {
        throw InputError("finite-difference steps must be > 0");
    }
}

namespace {

struct BallProbe {
    bool ok = false;
    double rho = 0.0;
    double loglik = 0.0;
    double lambda_min = 0.0;
    double descent = 0.0;  // numerator of b
};

struct ShellProbe {
    bool ok = false;
    double loglik = 0.0;
};

double lyapunov_scaled(double loglik, double loglik_star, LyapunovUnits units) {
    return lyapunov_from_logliks(loglik, loglik_star, units).scaled;
}

// Curvature of the Lyapunov candidate's negation at z, in the chosen units:
// Hessian of exp(l - l*) (via L (H + g g^T)) or of l itself.
double curvature_min(const ChartProblem& problem, const Eigen::VectorXd& z, double loglik,
                     double loglik_star, const ExponentialOptions& options) {
    const ScalarField f = problem.log_objective;
    const Eigen::MatrixXd hess = numeric_hessian(f, z, options.hessian_step);
    if (options.units == LyapunovUnits::log_likelihood) return min_eigenvalue(hess);
    const Eigen::VectorXd grad = numeric_gradient(f, z, options.gradient_step);
    const Eigen::MatrixXd scaled =
        std::exp(loglik - loglik_star) * (hess + grad * grad.transpose());
    return min_eigenvalue(scaled);
}

bool accept(const ChartProblem& problem, const Eigen::VectorXd& z) {
    return !problem.is_valid || problem.is_valid(z);
}

[[noreturn]] void not_local_max(const char* where, std::size_t index, double loglik,
                                double loglik_star) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "not-local-max-in-ball: " << where << " sample " << index << " has log-likelihood "
        << loglik << " > " << loglik_star << " at the center (radius too large)";
    throw NotLocalMaxInBall(msg.str());
}

}  // namespace

ExponentialConstants exponential_constants(const ChartProblem& problem,
                                           const ExponentialOptions& options) {
    options.validate();
    if (!problem.log_objective) throw InputError("chart problem needs a log objective");
    const bool log_units = options.units == LyapunovUnits::log_likelihood;
    if (log_units && !problem.divergence) {
        throw InputError("log-unit constants need the divergence D_KL(theta || F(theta))");
    }
    if (!log_units && !problem.log_objective_after_step) {
        throw InputError("likelihood-unit constants need log L(F(theta))");
    }

    const Eigen::Index m = problem.dim;
    const Eigen::VectorXd origin = Eigen::VectorXd::Zero(m);
    const double l_star = problem.log_objective(origin);
    const double tolerance = 1e-12 * (1.0 + std::abs(l_star));

    ExponentialConstants out;
    out.units = options.units;
    out.log_scale = log_units ? 0.0 : l_star;
    out.radius = options.radius;
    out.seed = options.seed;

    const double center_lambda = curvature_min(problem, origin, l_star, l_star, options);
    out.a_center = -0.5 * center_lambda;

    // Uniform samples in the ball: a (curvature), b (one-step descent).
    const auto n_ball = static_cast<std::size_t>(options.n_samples);
    std::vector<BallProbe> ball(n_ball);
    parallel_for(n_ball, options.threads, [&](std::size_t i) {
        Rng rng(options.seed, i, kBallSalt);
        BallProbe& probe = ball[i];
        Eigen::VectorXd z;
        for (int attempt = 0; attempt < kMaxRejections && !probe.ok; ++attempt) {
            z = random_in_ball(rng, m, options.radius);
            probe.ok = z.norm() > 0.0 && accept(problem, z);
        }
        if (!probe.ok) return;
        probe.rho = z.norm();
        probe.loglik = problem.log_objective(z);
        if (probe.loglik > l_star + tolerance) return;  // reported in order below
        probe.lambda_min = curvature_min(problem, z, probe.loglik, l_star, options);
        if (log_units) {
            probe.descent = problem.divergence(z);
        } else {
            const double l_next = problem.log_objective_after_step(z);
            probe.descent = std::exp(l_next - l_star) - std::exp(probe.loglik - l_star);
        }
    });

    double min_lambda = center_lambda;
    double b = std::numeric_limits<double>::infinity();
    double a_quadratic = 0.0;
    for (std::size_t i = 0; i < n_ball; ++i) {
        const BallProbe& probe = ball[i];
        if (!probe.ok) {
            ++out.rejected_samples;
            continue;
        }
        if (probe.loglik > l_star + tolerance) not_local_max("ball", i, probe.loglik, l_star);
        ++out.n_samples;
        min_lambda = std::min(min_lambda, probe.lambda_min);
        b = std::min(b, probe.descent / (probe.rho * probe.rho));
        a_quadratic = std::max(a_quadratic, lyapunov_scaled(probe.loglik, l_star, options.units) /
                                                (probe.rho * probe.rho));
    }
    out.a = -0.5 * min_lambda;
    out.b = out.n_samples > 0 ? b : 0.0;

    // Geometric shells from r down to r / shell_span: the limit defining d.
    const int n_shells = options.n_shells;
    const int per_shell =
        options.shell_samples > 0 ? options.shell_samples : std::max(1, options.n_samples / n_shells);
    const auto total_shell = static_cast<std::size_t>(n_shells) * static_cast<std::size_t>(per_shell);
    std::vector<double> radii(static_cast<std::size_t>(n_shells));
    for (int s = 0; s < n_shells; ++s) {
        const double t = n_shells == 1 ? 0.0 : static_cast<double>(s) / (n_shells - 1);
        radii[static_cast<std::size_t>(s)] = options.radius * std::pow(options.shell_span, -t);
    }
    std::vector<ShellProbe> shell(total_shell);
    parallel_for(total_shell, options.threads, [&](std::size_t idx) {
        const std::size_t s = idx / static_cast<std::size_t>(per_shell);
        Rng rng(options.seed, idx, kShellSalt);
        ShellProbe& probe = shell[idx];
        Eigen::VectorXd z;
        for (int attempt = 0; attempt < kMaxRejections && !probe.ok; ++attempt) {
            z = random_direction(rng, m) * radii[s];
            probe.ok = accept(problem, z);
        }
        if (probe.ok) probe.loglik = problem.log_objective(z);
    });

    double running = 0.0;
    for (int s = 0; s < n_shells; ++s) {
        ShellDiagnostic diag;
        diag.radius = radii[static_cast<std::size_t>(s)];
        for (int j = 0; j < per_shell; ++j) {
            const std::size_t idx = static_cast<std::size_t>(s) * static_cast<std::size_t>(per_shell) +
                                    static_cast<std::size_t>(j);
            const ShellProbe& probe = shell[idx];
            if (!probe.ok) {
                ++out.rejected_samples;
                continue;
            }
            if (probe.loglik > l_star + tolerance) not_local_max("shell", idx, probe.loglik, l_star);
            ++diag.samples;
            const double v = lyapunov_scaled(probe.loglik, l_star, options.units);
            diag.max_ratio = std::max(diag.max_ratio, v / diag.radius);
            a_quadratic = std::max(a_quadratic, v / (diag.radius * diag.radius));
        }
        const double previous = running;
        running = std::max(running, diag.max_ratio);
        diag.running_max = running;
        if (s == n_shells - 1 && s > 0) out.d_inner_increasing = diag.max_ratio > previous;
        out.shells.push_back(diag);
    }
    out.d = running;
    out.a_quadratic = a_quadratic;

    if (!(out.a > 0.0)) {
        out.gamma_reason = "a <= 0: Hessian not negative definite on the sampled ball";
    } else {
        out.c = out.d / out.a;
        out.gamma = exponential_gamma(out.a, out.b);
        if (!out.gamma) {
            out.gamma_reason = out.b > 0.0 ? "a <= b" : "b <= 0";
        }
    }
    return out;
}

ChartProblem mixture_chart_problem(const ModelSpec& spec, const MixtureParams& theta_star,
                                   const Dataset& data, const StepMap& step) {
    auto shared = std::make_shared<const Dataset>(data);
    const Eigen::VectorXd center = flatten(spec, theta_star);
    const Eigen::MatrixXd basis = free_tangent_basis(spec);
    auto point = [spec, center, basis](const Eigen::VectorXd& z) {
        return unflatten(spec, center + basis * z);
    };

    ChartProblem problem;
    problem.dim = basis.cols();
    problem.log_objective = [spec, shared, point](const Eigen::VectorXd& z) {
        return log_likelihood(spec, point(z), *shared);
    };
    problem.log_objective_after_step = [spec, shared, point, step](const Eigen::VectorXd& z) {
        return log_likelihood(spec, apply_step(spec, point(z), *shared, step).params, *shared);
    };
    problem.divergence = [spec, shared, point, step](const Eigen::VectorXd& z) {
        const MixtureParams theta = point(z);
        const MixtureParams next = apply_step(spec, theta, *shared, step).params;
        return posterior_kl(spec, theta, next, *shared);
    };
    problem.is_valid = [spec, point](const Eigen::VectorXd& z) { return is_valid(spec, point(z)); };
    return problem;
}

ExponentialConstants exponential_constants(const ModelSpec& spec, const MixtureParams& theta_star,
                                           const Dataset& data, const ExponentialOptions& options,
                                           const StepMap& step) {
    validate_params(spec, theta_star);
    validate_dataset(spec, data);
    if (floors_active(spec, theta_star)) {
        throw InputError("exponential constants need an interior point (floors active)");
    }
    return exponential_constants(mixture_chart_problem(spec, theta_star, data, step), options);
}

RateEstimate estimate_rate(const std::vector<Eigen::VectorXd>& states,
                           const Eigen::VectorXd& theta_star, int window, double min_denominator) {
    std::vector<double> ratios;
    for (std::size_t k = 0; k + 1 < states.size(); ++k) {
        const double denom = (states[k] - theta_star).norm();
        if (denom < min_denominator) continue;
        ratios.push_back((states[k + 1] - theta_star).norm() / denom);
    }
    if (ratios.size() < 3) {
        throw InsufficientData("rate estimate needs at least 3 valid ratios, got " +
                               std::to_string(ratios.size()));
    }
    RateEstimate out;
    out.valid_ratios = static_cast<int>(ratios.size());
    const std::size_t take = std::min(ratios.size(), static_cast<std::size_t>(std::max(window, 1)));
    out.window.assign(ratios.end() - static_cast<std::ptrdiff_t>(take), ratios.end());

    std::vector<double> sorted = out.window;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = sorted.size() / 2;
    out.mu = sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);

    bool increasing = out.window.size() >= 3;
    for (std::size_t i = 1; i < out.window.size() && increasing; ++i) {
        increasing = out.window[i] > out.window[i - 1];
    }
    out.sublinear = increasing && out.mu > 0.9;
    return out;
}

RateEstimate estimate_rate(const Trajectory& trajectory, const Eigen::VectorXd& theta_star) {
    return estimate_rate(trajectory.states(), theta_star);
}

TraceReport verify_exponential_trace(const std::vector<Eigen::VectorXd>& states,
                                     const Eigen::VectorXd& theta_star, double c, double gamma) {
    TraceReport report;
    if (states.empty()) return report;
    const double initial = (states.front() - theta_star).norm();
    for (std::size_t k = 0; k < states.size(); ++k) {
        const double dist = (states[k] - theta_star).norm();
        const double envelope = c * std::exp(-gamma * static_cast<double>(k)) * initial;
        const double ratio = envelope > 0.0 ? dist / envelope
                                            : (dist > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
        report.worst_ratio = std::max(report.worst_ratio, ratio);
        if (dist > envelope * (1.0 + 1e-12) && !report.first_violation) {
            report.holds = false;
            report.first_violation = static_cast<int>(k);
        }
    }
    return report;
}

StabilityCertificate certify_stability(const ModelSpec& spec, const MixtureParams& theta_star,
                                       const Dataset& data, const CertifyOptions& options) {
    StabilityCertificate cert = classify_equilibrium(spec, theta_star, data, options.classify);
    if (cert.classification != EquilibriumClass::local_max &&
        cert.classification != EquilibriumClass::mle_candidate) {
        cert.note = "not a local maximum; exponential constants skipped";
        return cert;
    }

    const MixtureParams center = unflatten(spec, cert.theta_star);
    const StepMap step = StepMap::from(options.solver);
    cert.constants = exponential_constants(spec, center, data, options.exponential, step);
    const ExponentialConstants& k = *cert.constants;
    if (!k.gamma || !k.c) {
        cert.note = "exponential stability not certified: " + k.gamma_reason;
        return cert;
    }

    // Seeded start on the sphere of radius start_fraction * r.
    const Eigen::MatrixXd basis = free_tangent_basis(spec);
    Rng rng(options.exponential.seed, 0, kStartSalt);
    MixtureParams start;
    bool found = false;
    for (int attempt = 0; attempt < kMaxRejections && !found; ++attempt) {
        const Eigen::VectorXd z =
            random_direction(rng, basis.cols()) * (options.start_fraction * options.exponential.radius);
        start = unflatten(spec, cert.theta_star + basis * z);
        found = is_valid(spec, start);
    }
    if (!found) {
        cert.note = "no valid start point inside the ball";
        return cert;
    }

    const Trajectory traj = run(spec, start, data, options.solver);
    const std::vector<Eigen::VectorXd> states = traj.states();
    cert.trace = verify_exponential_trace(states, cert.theta_star, *k.c, *k.gamma);
    try {
        const RateEstimate rate = estimate_rate(states, cert.theta_star);
        cert.empirical_rate = rate.mu;
        cert.bound_satisfied = rate.mu <= k.d / k.a;
    } catch (const InsufficientData& e) {
        cert.note = std::string("empirical rate unavailable: ") + e.what();
    }
    return cert;
}

}  // namespace emdyn
