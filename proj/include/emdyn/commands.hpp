#pragma once

// The subcommands behind the `emdyn` executable. Each writes its files under
// GlobalOptions::out and returns the JSON report it wrote.

#include "emdyn/io.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace emdyn {

struct GlobalOptions {
    std::uint64_t seed = 0;
    std::optional<std::filesystem::path> config;
    std::filesystem::path out = ".";
    // Selects delta-EM; overrides solver.delta from the config.
    std::optional<double> delta;
    // 0 = hardware concurrency. Results do not depend on it.
    unsigned threads = 0;
};

// Generative parameters come from a parameter JSON file or, for d = 1, from
// the flag vectors (variances, not log-variances).
struct SynthOptions {
    std::optional<std::filesystem::path> params;
    std::string family = "gaussian-diag";
    std::vector<double> weights;
    std::vector<double> means;
    std::vector<double> variances;
    std::vector<double> rates;
    int n = 100;
};

// Model selection shared by the commands that read a dataset: the config's
// "model" block wins, then a parameter file, then these flags.
struct ModelFlags {
    std::optional<int> components;
    std::optional<std::string> family;
};

struct FitOptions {
    std::filesystem::path data;
    std::optional<std::filesystem::path> init;
    // Seed for random_init; defaults to the global seed.
    std::optional<std::uint64_t> init_seed;
    ModelFlags model;
    std::string units = "likelihood";
};

struct DiagnoseOptions {
    std::filesystem::path data;
    std::filesystem::path trajectory;
    std::optional<std::filesystem::path> theta_star;
    ModelFlags model;
    std::string units = "likelihood";
};

struct StabilityOptions {
    std::filesystem::path data;
    std::filesystem::path theta_star;
    double radius = 1e-2;
    int samples = 1000;
    std::string units = "likelihood";
    double start_fraction = 0.5;
    std::optional<double> best_known_loglik;
};

struct BasinCommandOptions {
    std::filesystem::path data;
    std::filesystem::path center;
    double radius = 1e-3;
    int samples = 200;
    double merge_radius = 1e-5;
    int max_iters = 1000;
    double stop_tol = 1e-10;
    bool canonicalize_labels = true;
};

Dataset synthesize(const ModelSpec& spec, const MixtureParams& theta, int n, std::uint64_t seed);

json cmd_synth(const GlobalOptions& global, const SynthOptions& options);
json cmd_fit(const GlobalOptions& global, const FitOptions& options);
json cmd_diagnose(const GlobalOptions& global, const DiagnoseOptions& options);
json cmd_stability(const GlobalOptions& global, const StabilityOptions& options);
json cmd_basin(const GlobalOptions& global, const BasinCommandOptions& options);

}  // namespace emdyn
