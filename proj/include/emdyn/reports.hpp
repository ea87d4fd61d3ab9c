#pragma once

// Report serialization: run manifests, trajectory tables, certificates and
// basin reports. Floats in CSV use 17 significant digits; JSON uses the
// shortest representation that round-trips.

#include "emdyn/em_core.hpp"
#include "emdyn/harness.hpp"
#include "emdyn/io.hpp"
#include "emdyn/lyapunov.hpp"
#include "emdyn/stability.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace emdyn {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunManifest {
    std::string command;
    json config;
    // FNV-1a 64 of the dataset file bytes, hex.
    std::string dataset_hash;
    std::uint64_t seed = 0;
    std::string tool_version = kToolVersion;
    double wall_clock_seconds = 0.0;
};

std::string fnv1a_hex(const std::string& bytes);

json to_json(const RunManifest& manifest);

// Columns: k, loglik, step_norm, ascent_slack, kl_to_next, theta_0..theta_{p-1},
// then V, dV, slack when a Lyapunov trace is given.
std::string trajectory_to_csv(const Trajectory& trajectory, const LyapunovTrace* trace = nullptr);

// Reads the leading columns and theta_* back. Lyapunov columns are ignored.
Trajectory parse_trajectory_csv(const std::string& text);

json to_json(const ExponentialConstants& constants);
json to_json(const TraceReport& trace);
json to_json(const RateEstimate& rate);
json to_json(const ModelSpec& spec, const StabilityCertificate& certificate);

json to_json(const ModelSpec& spec, const BasinReport& report);
// Columns: init, outcome, limit_point, iterations, final_grad_norm.
std::string basin_to_csv(const BasinReport& report);

json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const json& j);

}  // namespace emdyn
