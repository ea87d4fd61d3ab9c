#include "emdyn/io.hpp"

#include "emdyn/errors.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

namespace emdyn {

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return {};
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, sep)) out.push_back(trim(field));
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double parse_number(const std::string& field, std::size_t line_no) {
    errno = 0;
    char* end = nullptr;
    const double value = std::strtod(field.c_str(), &end);
    if (field.empty() || end != field.c_str() + field.size() || errno == ERANGE) {
        throw InputError("line " + std::to_string(line_no) + ": cannot parse number '" + field + "'");
    }
    if (!std::isfinite(value)) {
        throw InputError("line " + std::to_string(line_no) + ": non-finite value '" + field + "'");
    }
    return value;
}

}  // namespace

Dataset parse_dataset_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    std::size_t dim = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) break;
    }
    if (trim(line).empty()) throw InputError("dataset CSV has no header");
    const auto header = split(trim(line), ',');
    dim = header.size();
    for (std::size_t l = 0; l < dim; ++l) {
        if (header[l] != "x" + std::to_string(l + 1)) {
            throw InputError("dataset header must be x1,...,xd; got '" + header[l] + "'");
        }
    }

    std::vector<double> values;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto fields = split(t, ',');
        if (fields.size() != dim) {
            throw InputError("line " + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                             " fields, got " + std::to_string(fields.size()));
        }
        for (const auto& f : fields) values.push_back(parse_number(f, line_no));
        ++rows;
    }

    Dataset data;
    data.y.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t l = 0; l < dim; ++l) {
            data.y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) = values[i * dim + l];
        }
    }
    return data;
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
    return parse_dataset_csv(read_text(path));
}

std::string dataset_to_csv(const Dataset& data) {
    std::string out;
    for (Eigen::Index l = 0; l < data.dim(); ++l) {
        out += (l ? ",x" : "x") + std::to_string(l + 1);
    }
    out += '\n';
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        for (Eigen::Index l = 0; l < data.dim(); ++l) {
            if (l) out += ',';
            out += format_double(data.y(i, l));
        }
        out += '\n';
    }
    return out;
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
    write_text(path, dataset_to_csv(data));
}

json params_to_json(const ModelSpec& spec, const MixtureParams& theta) {
    json j;
    j["family"] = std::string(to_string(spec.family));
    j["K"] = spec.n_components;
    j["d"] = spec.data_dim;
    j["weights"] = std::vector<double>(theta.weights.data(), theta.weights.data() + theta.weights.size());
    if (spec.family == Family::gaussian_diag) {
        json means = json::array();
        json logvars = json::array();
        for (Eigen::Index k = 0; k < theta.means.rows(); ++k) {
            json m = json::array();
            json s = json::array();
            for (Eigen::Index l = 0; l < theta.means.cols(); ++l) {
                m.push_back(theta.means(k, l));
                s.push_back(theta.log_variances(k, l));
            }
            means.push_back(m);
            logvars.push_back(s);
        }
        j["means"] = means;
        j["log_variances"] = logvars;
    } else {
        j["rates"] = std::vector<double>(theta.rates.data(), theta.rates.data() + theta.rates.size());
    }
    return j;
}

MixtureParams params_from_json(const json& j, ModelSpec& spec) {
    try {
        spec.family = family_from_string(j.at("family").get<std::string>());
        spec.n_components = j.at("K").get<int>();
        spec.data_dim = j.at("d").get<int>();
        spec.validate();
        const auto k = static_cast<Eigen::Index>(spec.n_components);
        const auto d = static_cast<Eigen::Index>(spec.data_dim);

        MixtureParams theta;
        const auto w = j.at("weights").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(w.size()) != k) throw InputError("weights must have K entries");
        theta.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), k);
        if (spec.family == Family::gaussian_diag) {
            const auto means = j.at("means").get<std::vector<std::vector<double>>>();
            const auto logvars = j.at("log_variances").get<std::vector<std::vector<double>>>();
            if (static_cast<Eigen::Index>(means.size()) != k ||
                static_cast<Eigen::Index>(logvars.size()) != k) {
                throw InputError("means/log_variances must have K rows");
            }
            theta.means.resize(k, d);
            theta.log_variances.resize(k, d);
            for (Eigen::Index r = 0; r < k; ++r) {
                const auto& m = means[static_cast<std::size_t>(r)];
                const auto& s = logvars[static_cast<std::size_t>(r)];
                if (static_cast<Eigen::Index>(m.size()) != d || static_cast<Eigen::Index>(s.size()) != d) {
                    throw InputError("means/log_variances rows must have d entries");
                }
                for (Eigen::Index l = 0; l < d; ++l) {
                    theta.means(r, l) = m[static_cast<std::size_t>(l)];
                    theta.log_variances(r, l) = s[static_cast<std::size_t>(l)];
                }
            }
        } else {
            const auto rates = j.at("rates").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(rates.size()) != k) throw InputError("rates must have K entries");
            theta.rates = Eigen::Map<const Eigen::VectorXd>(rates.data(), k);
        }
        validate_params(spec, theta);
        return theta;
    } catch (const json::exception& e) {
        throw InputError(std::string("bad parameter JSON: ") + e.what());
    }
}

MixtureParams read_params_json(const std::filesystem::path& path, ModelSpec& spec) {
    return params_from_json(read_json(path), spec);
}

json to_json(const ModelSpec& spec) {
    json j;
    j["family"] = std::string(to_string(spec.family));
    j["K"] = spec.n_components;
    j["d"] = spec.data_dim;
    j["variance_floor"] = spec.variance_floor;
    j["weight_floor"] = spec.weight_floor;
    j["estimate_weights"] = spec.estimate_weights;
    j["estimate_variances"] = spec.estimate_variances;
    return j;
}

ModelSpec model_spec_from_json(const json& j, ModelSpec base) {
    try {
        if (j.contains("family")) base.family = family_from_string(j.at("family").get<std::string>());
        if (j.contains("K")) base.n_components = j.at("K").get<int>();
        if (j.contains("d")) base.data_dim = j.at("d").get<int>();
        if (j.contains("variance_floor")) base.variance_floor = j.at("variance_floor").get<double>();
        if (j.contains("weight_floor")) base.weight_floor = j.at("weight_floor").get<double>();
        if (j.contains("estimate_weights")) base.estimate_weights = j.at("estimate_weights").get<bool>();
        if (j.contains("estimate_variances")) {
            base.estimate_variances = j.at("estimate_variances").get<bool>();
        }
    } catch (const json::exception& e) {
        throw InputError(std::string("bad model JSON: ") + e.what());
    }
    base.validate();
    return base;
}

json to_json(const SolverConfig& config) {
    json j;
    j["max_iters"] = config.max_iters;
    j["step_tol"] = config.step_tol;
    j["delta"] = config.delta ? json(*config.delta) : json(nullptr);
    json inner;
    inner["max_steps"] = config.inner.max_steps;
    inner["init_step"] = config.inner.init_step ? json(*config.inner.init_step) : json(nullptr);
    inner["shrink"] = config.inner.shrink;
    inner["grad_tol"] = config.inner.grad_tol;
    j["inner_ascent"] = inner;
    return j;
}

SolverConfig solver_config_from_json(const json& j, SolverConfig base) {
    try {
        if (j.contains("max_iters")) base.max_iters = j.at("max_iters").get<int>();
        if (j.contains("step_tol")) base.step_tol = j.at("step_tol").get<double>();
        if (j.contains("delta")) {
            if (j.at("delta").is_null()) {
                base.delta.reset();
            } else {
                base.delta = j.at("delta").get<double>();
            }
        }
        if (j.contains("inner_ascent")) {
            const json& inner = j.at("inner_ascent");
            if (inner.contains("max_steps")) base.inner.max_steps = inner.at("max_steps").get<int>();
            if (inner.contains("init_step")) {
                if (inner.at("init_step").is_null()) {
                    base.inner.init_step.reset();
                } else {
                    base.inner.init_step = inner.at("init_step").get<double>();
                }
            }
            if (inner.contains("shrink")) base.inner.shrink = inner.at("shrink").get<double>();
            if (inner.contains("grad_tol")) base.inner.grad_tol = inner.at("grad_tol").get<double>();
        }
    } catch (const json::exception& e) {
        throw InputError(std::string("bad solver JSON: ") + e.what());
    }
    base.validate();
    return base;
}

RunConfig read_run_config(const std::filesystem::path& path) {
    const json j = read_json(path);
    RunConfig config;
    if (!j.is_object()) throw InputError("config must be a JSON object");
    if (j.contains("model")) {
        config.model = model_spec_from_json(j.at("model"));
        config.has_model = true;
    }
    if (j.contains("solver")) config.solver = solver_config_from_json(j.at("solver"));
    return config;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + path.string());
    out << text;
    if (!out) throw InputError("failed writing " + path.string());
}

json read_json(const std::filesystem::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw InputError("invalid JSON in " + path.string() + ": " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const json& j) {
    write_text(path, j.dump(2) + "\n");
}

}  // namespace emdyn
