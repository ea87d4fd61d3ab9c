#pragma once

// File formats: dataset CSV, parameter JSON, run configuration JSON.

#include "emdyn/em_core.hpp"
#include "emdyn/models.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace emdyn {

using json = nlohmann::json;

// 17 significant digits, enough to round-trip any double.
std::string format_double(double value);

// Header `x1,...,xd`, one observation per row. A header-only file yields an
// empty dataset.
Dataset read_dataset_csv(const std::filesystem::path& path);
Dataset parse_dataset_csv(const std::string& text);
std::string dataset_to_csv(const Dataset& data);
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);

// {family, K, d, weights[], means[][], log_variances[][] | rates[]}
json params_to_json(const ModelSpec& spec, const MixtureParams& theta);
// Reads the point and fills family / n_components / data_dim of `spec`.
MixtureParams params_from_json(const json& j, ModelSpec& spec);
MixtureParams read_params_json(const std::filesystem::path& path, ModelSpec& spec);

json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const json& j, ModelSpec base = {});

json to_json(const SolverConfig& config);
SolverConfig solver_config_from_json(const json& j, SolverConfig base = {});

struct RunConfig {
    bool has_model = false;
    ModelSpec model;
    SolverConfig solver;
};

// {"model": {...}, "solver": {...}}; both blocks optional.
RunConfig read_run_config(const std::filesystem::path& path);

json read_json(const std::filesystem::path& path);
// Pretty-printed with a trailing newline.
void write_json(const std::filesystem::path& path, const json& j);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace emdyn
