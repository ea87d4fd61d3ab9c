#include "emdyn/reports.hpp"

#include "emdyn/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace emdyn {

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

json to_json(const RunManifest& manifest) {
    json j;
    j["command"] = manifest.command;
    j["config"] = manifest.config;
    j["dataset_hash"] = manifest.dataset_hash;
    j["seed"] = manifest.seed;
    j["tool_version"] = manifest.tool_version;
    j["wall_clock_seconds"] = manifest.wall_clock_seconds;
    return j;
}

json vector_to_json(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vector_from_json(const json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

std::string trajectory_to_csv(const Trajectory& trajectory, const LyapunovTrace* trace) {
    const Eigen::Index p = trajectory.rows.empty() ? 0 : trajectory.rows.front().theta.size();
    if (trace && trace->v.size() != trajectory.rows.size()) {
        throw InputError("Lyapunov trace length does not match the trajectory");
    }
    std::string out = "k,loglik,step_norm,ascent_slack,kl_to_next";
    for (Eigen::Index j = 0; j < p; ++j) out += ",theta_" + std::to_string(j);
    if (trace) out += ",V,dV,slack";
    out += '\n';
    for (std::size_t r = 0; r < trajectory.rows.size(); ++r) {
        const auto& row = trajectory.rows[r];
        out += std::to_string(row.k);
        for (double v : {row.loglik, row.step_norm, row.ascent_slack, row.kl_to_next}) {
            out += ',' + format_double(v);
        }
        for (Eigen::Index j = 0; j < p; ++j) out += ',' + format_double(row.theta[j]);
        if (trace) {
            out += ',' + format_double(trace->v[r]);
            out += ',' + format_double(trace->dv[r]);
            out += ',' + format_double(trace->slack[r]);
        }
        out += '\n';
    }
    return out;
}

Trajectory parse_trajectory_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw InputError("trajectory CSV is empty");
    std::vector<std::string> header;
    {
        std::istringstream h(line);
        std::string field;
        while (std::getline(h, field, ',')) {
            while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
            header.push_back(field);
        }
    }
    const std::vector<std::string> lead = {"k", "loglik", "step_norm", "ascent_slack", "kl_to_next"};
    if (header.size() < lead.size() ||
        !std::equal(lead.begin(), lead.end(), header.begin())) {
        throw InputError("trajectory CSV header must start with k,loglik,step_norm,ascent_slack,kl_to_next");
    }
    std::size_t p = 0;
    while (lead.size() + p < header.size() && header[lead.size() + p] == "theta_" + std::to_string(p)) ++p;
    if (p == 0) throw InputError("trajectory CSV has no theta_ columns");

    Trajectory trajectory;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<double> fields;
        std::istringstream row_in(line);
        std::string field;
        while (std::getline(row_in, field, ',')) {
            char* end = nullptr;
            const double v = std::strtod(field.c_str(), &end);
            while (end && (*end == '\r' || *end == ' ')) ++end;
            if (field.empty() || *end != '\0') {
                throw InputError("trajectory line " + std::to_string(line_no) + ": bad number '" + field + "'");
            }
            fields.push_back(v);
        }
        if (fields.size() != header.size()) {
            throw InputError("trajectory line " + std::to_string(line_no) + ": wrong field count");
        }
        TrajectoryRow row;
        row.k = static_cast<int>(fields[0]);
        row.loglik = fields[1];
        row.step_norm = fields[2];
        row.ascent_slack = fields[3];
        row.kl_to_next = fields[4];
        row.theta = Eigen::Map<const Eigen::VectorXd>(fields.data() + lead.size(), static_cast<Eigen::Index>(p));
        trajectory.rows.push_back(std::move(row));
    }
    if (trajectory.rows.empty()) throw InputError("trajectory CSV has no rows");
    return trajectory;
}

json to_json(const ExponentialConstants& k) {
    json j;
    j["units"] = std::string(to_string(k.units));
    j["log_scale"] = k.log_scale;
    j["a"] = k.a;
    j["a_center"] = k.a_center;
    j["a_quadratic"] = k.a_quadratic;
    j["b"] = k.b;
    j["d"] = k.d;
    j["gamma"] = k.gamma ? json(*k.gamma) : json(nullptr);
    j["c"] = k.c ? json(*k.c) : json(nullptr);
    j["gamma_reason"] = k.gamma_reason;
    j["d_inner_increasing"] = k.d_inner_increasing;
    json shells = json::array();
    for (const auto& s : k.shells) {
        shells.push_back({{"radius", s.radius},
                          {"samples", s.samples},
                          {"max_ratio", s.max_ratio},
                          {"running_max", s.running_max}});
    }
    j["shells"] = shells;
    j["radius"] = k.radius;
    j["n_samples"] = k.n_samples;
    j["rejected_samples"] = k.rejected_samples;
    j["seed"] = k.seed;
    return j;
}

json to_json(const TraceReport& trace) {
    json j;
    j["holds"] = trace.holds;
    j["first_violation"] = trace.first_violation ? json(*trace.first_violation) : json(nullptr);
    j["worst_ratio"] = trace.worst_ratio;
    return j;
}

json to_json(const RateEstimate& rate) {
    json j;
    j["mu"] = rate.mu;
    j["valid_ratios"] = rate.valid_ratios;
    j["sublinear"] = rate.sublinear;
    j["window"] = rate.window;
    return j;
}

json to_json(const ModelSpec& spec, const StabilityCertificate& c) {
    json j;
    j["theta_star"] = params_to_json(spec, unflatten(spec, c.theta_star));
    j["loglik"] = c.loglik;
    j["is_fixed_point"] = c.is_fixed_point;
    j["fixed_point_residual"] = c.fixed_point_residual;
    j["grad_norm"] = c.grad_norm;
    j["hessian_max_eigenvalue"] = c.hessian_max_eigenvalue;
    j["hessian_min_eigenvalue"] = c.hessian_min_eigenvalue;
    j["classification"] = std::string(to_string(c.classification));
    j["constants"] = c.constants ? to_json(*c.constants) : json(nullptr);
    j["empirical_rate"] = c.empirical_rate ? json(*c.empirical_rate) : json(nullptr);
    j["bound_satisfied"] = c.bound_satisfied ? json(*c.bound_satisfied) : json(nullptr);
    j["trace"] = c.trace ? to_json(*c.trace) : json(nullptr);
    j["note"] = c.note;
    return j;
}

json to_json(const ModelSpec& spec, const BasinReport& report) {
    json j;
    json points = json::array();
    for (const auto& lp : report.limit_points) {
        points.push_back({{"params", params_to_json(spec, unflatten(spec, lp.state))},
                          {"members", lp.members},
                          {"fixed_point_residual", lp.fixed_point_residual},
                          {"is_fixed_point", lp.is_fixed_point}});
    }
    j["limit_points"] = points;
    int converged = 0, max_iters = 0, diverged = 0;
    for (const auto& a : report.assignments) {
        switch (a.outcome) {
            case Outcome::converged: ++converged; break;
            case Outcome::max_iters: ++max_iters; break;
            case Outcome::diverged: ++diverged; break;
        }
    }
    j["outcomes"] = {{"converged", converged}, {"max_iters", max_iters}, {"diverged", diverged}};
    j["merge_radius"] = report.merge_radius;
    j["center"] = report.center ? params_to_json(spec, unflatten(spec, *report.center)) : json(nullptr);
    j["radius"] = report.radius ? json(*report.radius) : json(nullptr);
    j["seed"] = report.seed ? json(*report.seed) : json(nullptr);
    j["return_fraction"] = report.return_fraction ? json(*report.return_fraction) : json(nullptr);
    j["rejected_samples"] = report.rejected_samples;
    return j;
}

std::string basin_to_csv(const BasinReport& report) {
    std::string out = "init,outcome,limit_point,iterations,final_grad_norm\n";
    for (const auto& a : report.assignments) {
        out += std::to_string(a.init) + ',' + std::string(to_string(a.outcome)) + ',' +
               std::to_string(a.limit_point) + ',' + std::to_string(a.iterations) + ',';
        if (a.final_grad_norm) out += format_double(*a.final_grad_norm);
        out += '\n';
    }
    return out;
}

}  // namespace emdyn
