#include "emdyn/commands.hpp"

#include "emdyn/em_core.hpp"
#include "emdyn/errors.hpp"
#include "emdyn/harness.hpp"
#include "emdyn/lyapunov.hpp"
#include "emdyn/reports.hpp"
#include "emdyn/rng.hpp"
#include "emdyn/stability.hpp"

#include <chrono>
#include <cmath>

namespace emdyn {

namespace {

constexpr std::uint64_t kSynthSalt = 0x5EED;

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

RunConfig load_config(const GlobalOptions& global) {
    RunConfig config = global.config ? read_run_config(*global.config) : RunConfig{};
    if (global.delta) {
        config.solver.delta = *global.delta;
        config.solver.validate();
    }
    return config;
}

// Checks that the config's model block (if any) agrees with the shape read
// from a parameter file and merges its remaining settings.
ModelSpec merge_spec(const RunConfig& config, const ModelSpec& from_params) {
    if (!config.has_model) return from_params;
    const ModelSpec& m = config.model;
    if (m.family != from_params.family || m.n_components != from_params.n_components ||
        m.data_dim != from_params.data_dim) {
        throw InputError("config model (family, K, d) does not match the parameter file");
    }
    return m;
}

ModelSpec spec_from_flags(const RunConfig& config, const ModelFlags& flags, const Dataset& data) {
    if (config.has_model) return config.model;
    ModelSpec spec;
    spec.family = flags.family ? family_from_string(*flags.family) : Family::gaussian_diag;
    spec.n_components = flags.components.value_or(2);
    spec.data_dim = static_cast<int>(data.dim());
    spec.validate();
    return spec;
}

RunManifest manifest(const std::string& command, json config, const std::string& data_bytes,
                     const GlobalOptions& global) {
    RunManifest m;
    m.command = command;
    m.config = std::move(config);
    m.dataset_hash = data_bytes.empty() ? std::string() : fnv1a_hex(data_bytes);
    m.seed = global.seed;
    return m;
}

json finish(RunManifest m, const Stopwatch& clock, json body) {
    m.wall_clock_seconds = clock.seconds();
    body["manifest"] = to_json(m);
    return body;
}

}  // namespace

Dataset synthesize(const ModelSpec& spec, const MixtureParams& theta, int n, std::uint64_t seed) {
    if (n < 0) throw InputError("n must be >= 0");
    validate_params(spec, theta);
    const Eigen::Index d = spec.data_dim;
    Dataset data;
    data.y.resize(n, d);
    std::vector<double> weights(theta.weights.data(), theta.weights.data() + theta.weights.size());
    for (int i = 0; i < n; ++i) {
        Rng rng(seed, static_cast<std::uint64_t>(i), kSynthSalt);
        const auto k = static_cast<Eigen::Index>(rng.categorical(weights));
        for (Eigen::Index l = 0; l < d; ++l) {
            if (spec.family == Family::gaussian_diag) {
                const double sd = std::exp(0.5 * theta.log_variances(k, l));
                data.y(i, l) = theta.means(k, l) + sd * rng.normal();
            } else {
                data.y(i, l) = static_cast<double>(rng.poisson(theta.rates[k]));
            }
        }
    }
    return data;
}

json cmd_synth(const GlobalOptions& global, const SynthOptions& options) {
    Stopwatch clock;
    ModelSpec spec;
    MixtureParams theta;
    if (options.params) {
        theta = read_params_json(*options.params, spec);
    } else {
        spec.family = family_from_string(options.family);
        spec.n_components = static_cast<int>(options.weights.size());
        spec.data_dim = 1;
        spec.validate();
        const auto k = static_cast<Eigen::Index>(spec.n_components);
        theta.weights = Eigen::Map<const Eigen::VectorXd>(options.weights.data(), k);
        if (spec.family == Family::gaussian_diag) {
            if (options.means.size() != options.weights.size() ||
                options.variances.size() != options.weights.size()) {
                throw InputError("--means and --variances need one value per weight");
            }
            theta.means.resize(k, 1);
            theta.log_variances.resize(k, 1);
            for (Eigen::Index c = 0; c < k; ++c) {
                const double var = options.variances[static_cast<std::size_t>(c)];
                if (!(var > 0.0)) throw InputError("variances must be > 0");
                theta.means(c, 0) = options.means[static_cast<std::size_t>(c)];
                theta.log_variances(c, 0) = std::log(var);
            }
        } else {
            if (options.rates.size() != options.weights.size()) {
                throw InputError("--rates needs one value per weight");
            }
            theta.rates = Eigen::Map<const Eigen::VectorXd>(options.rates.data(), k);
        }
    }

    const Dataset data = synthesize(spec, theta, options.n, global.seed);
    const std::string csv = dataset_to_csv(data);
    write_text(global.out / "data.csv", csv);

    json config;
    config["params"] = params_to_json(spec, theta);
    config["n"] = options.n;
    json body;
    body["rows"] = options.n;
    body["data_file"] = "data.csv";
    json report = finish(manifest("synth", config, csv, global), clock, body);
    write_json(global.out / "synth.json", report);
    return report;
}

json cmd_fit(const GlobalOptions& global, const FitOptions& options) {
    Stopwatch clock;
    const RunConfig config = load_config(global);
    const std::string bytes = read_text(options.data);
    const Dataset data = parse_dataset_csv(bytes);
    const LyapunovUnits units = units_from_string(options.units);

    ModelSpec spec;
    MixtureParams theta0;
    json echo;
    if (options.init) {
        ModelSpec from_file;
        theta0 = read_params_json(*options.init, from_file);
        spec = merge_spec(config, from_file);
        echo["init"] = params_to_json(spec, theta0);
    } else {
        spec = spec_from_flags(config, options.model, data);
        validate_dataset(spec, data);
        const std::uint64_t init_seed = options.init_seed.value_or(global.seed);
        theta0 = random_init(spec, data, init_seed);
        echo["init_seed"] = init_seed;
    }
    validate_dataset(spec, data);
    echo["model"] = to_json(spec);
    echo["solver"] = to_json(config.solver);
    echo["units"] = std::string(to_string(units));

    const Trajectory traj = run(spec, theta0, data, config.solver);
    const LyapunovTrace trace = lyapunov_trace(spec, traj, data, units);
    write_text(global.out / "trajectory.csv", trajectory_to_csv(traj, &trace));

    const MixtureParams final_params = unflatten(spec, traj.last().theta);
    write_json(global.out / "final_params.json", params_to_json(spec, final_params));

    bool monotone = true;
    double max_step = 0.0;
    for (std::size_t r = 1; r < traj.rows.size(); ++r) {
        if (traj.rows[r].loglik < traj.rows[r - 1].loglik) monotone = false;
        max_step = std::max(max_step, traj.rows[r].step_norm);
    }
    json body;
    body["status"] = std::string(to_string(traj.status));
    body["stalled"] = traj.stalled;
    body["iterations"] = static_cast<int>(traj.rows.size()) - 1;
    body["final_loglik"] = traj.last().loglik;
    body["loglik_monotone"] = monotone;
    body["max_step_norm"] = max_step;
    body["floors_active"] = floors_active(spec, final_params);
    body["final_params"] = params_to_json(spec, final_params);
    body["lyapunov"] = {{"units", std::string(to_string(units))},
                        {"loglik_star", trace.loglik_star},
                        {"theta_star", params_to_json(spec, unflatten(spec, trace.theta_star))}};
    body["trajectory_file"] = "trajectory.csv";
    json report = finish(manifest("fit", echo, bytes, global), clock, body);
    write_json(global.out / "fit.json", report);
    return report;
}

json cmd_diagnose(const GlobalOptions& global, const DiagnoseOptions& options) {
    Stopwatch clock;
    const RunConfig config = load_config(global);
    const std::string bytes = read_text(options.data);
    const Dataset data = parse_dataset_csv(bytes);
    Trajectory traj = parse_trajectory_csv(read_text(options.trajectory));
    const LyapunovUnits units = units_from_string(options.units);

    ModelSpec spec;
    std::optional<MixtureParams> theta_star;
    if (options.theta_star) {
        ModelSpec from_file;
        theta_star = read_params_json(*options.theta_star, from_file);
        spec = merge_spec(config, from_file);
    } else {
        spec = spec_from_flags(config, options.model, data);
    }
    validate_dataset(spec, data);
    if (static_cast<std::size_t>(traj.rows.front().theta.size()) != spec.flat_size()) {
        throw InputError("trajectory theta columns do not match the model size");
    }
    for (const auto& row : traj.rows) validate_params(spec, unflatten(spec, row.theta));

    // Recompute the transition columns from the stored states.
    const StepMap step = StepMap::from(config.solver);
    for (std::size_t r = 0; r < traj.rows.size(); ++r) {
        const MixtureParams theta = unflatten(spec, traj.rows[r].theta);
        traj.rows[r].loglik = log_likelihood(spec, theta, data);
        if (r + 1 < traj.rows.size()) {
            const MixtureParams next = unflatten(spec, traj.rows[r + 1].theta);
            traj.rows[r].kl_to_next = posterior_kl(spec, theta, next, data);
        }
    }
    for (std::size_t r = 0; r + 1 < traj.rows.size(); ++r) {
        traj.rows[r].ascent_slack =
            traj.rows[r + 1].loglik - traj.rows[r].kl_to_next - traj.rows[r].loglik;
    }
    if (!traj.rows.empty()) {
        traj.rows.back().ascent_slack = 0.0;
        traj.rows.back().kl_to_next = 0.0;
    }
    const LyapunovTrace trace = theta_star ? lyapunov_trace(spec, traj, *theta_star, data, units)
                                           : lyapunov_trace(spec, traj, data, units);
    write_text(global.out / "diagnose.csv", trajectory_to_csv(traj, &trace));

    double min_slack = 0.0;
    bool v_nonincreasing = true;
    for (std::size_t r = 0; r + 1 < traj.rows.size(); ++r) {
        min_slack = std::min(min_slack, traj.rows[r].ascent_slack);
        if (trace.dv[r] > 0.0) v_nonincreasing = false;
    }
    json echo;
    echo["model"] = to_json(spec);
    echo["solver"] = to_json(config.solver);
    echo["units"] = std::string(to_string(units));
    echo["step"] = step.delta ? "delta-em" : "em";
    json body;
    body["rows"] = traj.rows.size();
    body["loglik_star"] = trace.loglik_star;
    body["theta_star"] = params_to_json(spec, unflatten(spec, trace.theta_star));
    body["min_ascent_slack"] = min_slack;
    body["v_nonincreasing"] = v_nonincreasing;
    body["diagnose_file"] = "diagnose.csv";
    json report = finish(manifest("diagnose", echo, bytes, global), clock, body);
    write_json(global.out / "diagnose.json", report);
    return report;
}

json cmd_stability(const GlobalOptions& global, const StabilityOptions& options) {
    Stopwatch clock;
    const RunConfig config = load_config(global);
    const std::string bytes = read_text(options.data);
    const Dataset data = parse_dataset_csv(bytes);
    ModelSpec from_file;
    const MixtureParams theta_star = read_params_json(options.theta_star, from_file);
    const ModelSpec spec = merge_spec(config, from_file);
    validate_dataset(spec, data);
    validate_params(spec, theta_star);

    CertifyOptions certify;
    certify.solver = config.solver;
    certify.classify.step = StepMap::from(config.solver);
    certify.classify.best_known_loglik = options.best_known_loglik;
    certify.exponential.radius = options.radius;
    certify.exponential.n_samples = options.samples;
    certify.exponential.seed = global.seed;
    certify.exponential.units = units_from_string(options.units);
    certify.exponential.threads = global.threads;
    certify.start_fraction = options.start_fraction;
    const StabilityCertificate cert = certify_stability(spec, theta_star, data, certify);

    json echo;
    echo["model"] = to_json(spec);
    echo["solver"] = to_json(config.solver);
    echo["theta_star"] = params_to_json(spec, theta_star);
    echo["radius"] = options.radius;
    echo["samples"] = options.samples;
    echo["units"] = options.units;
    echo["start_fraction"] = options.start_fraction;
    echo["best_known_loglik"] = options.best_known_loglik ? json(*options.best_known_loglik) : json(nullptr);
    json body;
    body["certificate"] = to_json(spec, cert);
    json report = finish(manifest("stability", echo, bytes, global), clock, body);
    write_json(global.out / "stability.json", report);
    return report;
}

json cmd_basin(const GlobalOptions& global, const BasinCommandOptions& options) {
    Stopwatch clock;
    const RunConfig config = load_config(global);
    const std::string bytes = read_text(options.data);
    const Dataset data = parse_dataset_csv(bytes);
    ModelSpec from_file;
    const MixtureParams center = read_params_json(options.center, from_file);
    const ModelSpec spec = merge_spec(config, from_file);
    validate_dataset(spec, data);
    validate_params(spec, center);

    const MapSystem system = mixture_map_system(spec, data, StepMap::from(config.solver));
    BasinOptions basin;
    basin.max_iters = options.max_iters;
    basin.stop_tol = options.stop_tol;
    basin.merge_radius = options.merge_radius;
    basin.canonicalize_labels = options.canonicalize_labels;
    basin.threads = global.threads;
    const BasinReport report =
        basin_sample(system, flatten(spec, center), options.radius, options.samples, global.seed, basin);
    write_text(global.out / "basin.csv", basin_to_csv(report));

    json echo;
    echo["model"] = to_json(spec);
    echo["solver"] = to_json(config.solver);
    echo["radius"] = options.radius;
    echo["samples"] = options.samples;
    echo["merge_radius"] = options.merge_radius;
    echo["max_iters"] = options.max_iters;
    echo["stop_tol"] = options.stop_tol;
    echo["canonicalize_labels"] = options.canonicalize_labels;
    json body;
    body["basin"] = to_json(spec, report);
    body["basin_file"] = "basin.csv";
    json out = finish(manifest("basin", echo, bytes, global), clock, body);
    write_json(global.out / "basin.json", out);
    return out;
}

}  // namespace emdyn
