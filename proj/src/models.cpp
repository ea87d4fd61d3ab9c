#include "emdyn/models.hpp"

#include "emdyn/detail/compensated_sum.hpp"
#include "emdyn/errors.hpp"
#include "emdyn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <vector>

namespace emdyn {

using detail::CompensatedSum;

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

bool is_gaussian(const ModelSpec& spec) { return spec.family == Family::gaussian_diag; }

Eigen::Index K(const ModelSpec& spec) { return spec.n_components; }
Eigen::Index D(const ModelSpec& spec) { return spec.data_dim; }

}  // namespace

std::string_view to_string(Family family) {
    switch (family) {
        case Family::gaussian_diag: return "gaussian-diag";
        case Family::poisson: return "poisson";
    }
    return "unknown";
}

Family family_from_string(std::string_view name) {
    if (name == "gaussian-diag" || name == "gaussian") return Family::gaussian_diag;
    if (name == "poisson") return Family::poisson;
    throw InputError("unknown model family '" + std::string(name) + "'");
}

void ModelSpec::validate() const {
    if (n_components < 1) throw InputError("n_components must be >= 1");
    if (data_dim < 1) throw InputError("data_dim must be >= 1");
    if (family == Family::poisson && data_dim != 1) {
        throw InputError("poisson mixtures require data_dim = 1");
    }
    if (!(weight_floor > 0.0)) throw InputError("weight_floor must be > 0");
    if (!(weight_floor * n_components < 1.0)) {
        throw InputError("weight_floor * n_components must be < 1");
    }
    if (family == Family::gaussian_diag && !(variance_floor > 0.0)) {
        throw InputError("variance_floor must be > 0");
    }
}

std::size_t ModelSpec::flat_size() const {
    const auto k = static_cast<std::size_t>(n_components);
    const auto d = static_cast<std::size_t>(data_dim);
    return family == Family::gaussian_diag ? k + 2 * k * d : 2 * k;
}

std::size_t ModelSpec::log_variances_offset() const {
    const auto k = static_cast<std::size_t>(n_components);
    return k + k * static_cast<std::size_t>(data_dim);
}

bool MixtureParams::operator==(const MixtureParams& other) const {
    auto same = [](const auto& a, const auto& b) {
        return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
    };
    return same(weights, other.weights) && same(means, other.means) &&
           same(log_variances, other.log_variances) && same(rates, other.rates);
}

void validate_params(const ModelSpec& spec, const MixtureParams& theta) {
    spec.validate();
    if (theta.weights.size() != K(spec)) throw InputError("weights has wrong length");
    CompensatedSum total;
    for (Eigen::Index j = 0; j < K(spec); ++j) {
        const double w = theta.weights[j];
        if (!std::isfinite(w)) throw InputError("non-finite weight");
        if (w < spec.weight_floor * (1.0 - 1e-12)) {
            std::ostringstream msg;
            msg << "weight " << j << " = " << w << " below floor " << spec.weight_floor;
            throw InputError(msg.str());
        }
        total.add(w);
    }
    if (std::abs(total.value() - 1.0) > 1e-12) throw InputError("weights do not sum to 1");

    if (is_gaussian(spec)) {
        if (theta.means.rows() != K(spec) || theta.means.cols() != D(spec) ||
            theta.log_variances.rows() != K(spec) || theta.log_variances.cols() != D(spec)) {
            throw InputError("means/log_variances must be K x d");
        }
        if (!theta.means.allFinite() || !theta.log_variances.allFinite()) {
            throw InputError("non-finite gaussian parameter");
        }
        const double min_log_var = std::log(spec.variance_floor) - 1e-12;
        if ((theta.log_variances.array() < min_log_var).any()) {
            throw InputError("variance below floor");
        }
    } else {
        if (theta.rates.size() != K(spec)) throw InputError("rates has wrong length");
        if (!theta.rates.allFinite() || (theta.rates.array() <= 0.0).any()) {
            throw InputError("rates must be finite and > 0");
        }
    }
}

bool is_valid(const ModelSpec& spec, const MixtureParams& theta) {
    try {
        validate_params(spec, theta);
        return true;
    } catch (const InputError&) {
        return false;
    }
}

void validate_dataset(const ModelSpec& spec, const Dataset& data) {
    if (data.size() < 1) throw InputError("dataset is empty");
    if (data.dim() != D(spec)) {
        std::ostringstream msg;
        msg << "dataset has " << data.dim() << " columns, model expects " << spec.data_dim;
        throw InputError(msg.str());
    }
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        for (Eigen::Index l = 0; l < data.dim(); ++l) {
            const double v = data.y(i, l);
            if (!std::isfinite(v)) {
                throw InputError("non-finite value at observation " + std::to_string(i));
            }
            if (spec.family == Family::poisson && (v < 0.0 || v != std::floor(v))) {
                throw InputError("poisson data must be non-negative integers (observation " +
                                 std::to_string(i) + ")");
            }
        }
    }
}

bool floors_active(const ModelSpec& spec, const MixtureParams& theta, double relative_margin) {
    if (spec.estimate_weights && spec.n_components > 1) {
        if ((theta.weights.array() <= spec.weight_floor * (1.0 + relative_margin)).any()) {
            return true;
        }
    }
    if (is_gaussian(spec) && spec.estimate_variances) {
        const double limit = std::log(spec.variance_floor) + relative_margin;
        if ((theta.log_variances.array() <= limit).any()) return true;
    }
    if (!is_gaussian(spec)) {
        if ((theta.rates.array() <= kRateFloor * (1.0 + relative_margin)).any()) return true;
    }
    return false;
}

Eigen::VectorXd flatten(const ModelSpec& spec, const MixtureParams& theta) {
    Eigen::VectorXd flat(static_cast<Eigen::Index>(spec.flat_size()));
    const Eigen::Index k = K(spec);
    flat.head(k) = theta.weights;
    if (is_gaussian(spec)) {
        const Eigen::Index d = D(spec);
        for (Eigen::Index j = 0; j < k; ++j) {
            for (Eigen::Index l = 0; l < d; ++l) {
                flat[k + j * d + l] = theta.means(j, l);
                flat[k + k * d + j * d + l] = theta.log_variances(j, l);
            }
        }
    } else {
        flat.segment(k, k) = theta.rates;
    }
    return flat;
}

MixtureParams unflatten(const ModelSpec& spec, const Eigen::VectorXd& flat) {
    if (flat.size() != static_cast<Eigen::Index>(spec.flat_size())) {
        throw InputError("flattened vector has wrong length");
    }
    const Eigen::Index k = K(spec);
    MixtureParams theta;
    theta.weights = flat.head(k);
    CompensatedSum total;
    for (Eigen::Index j = 0; j < k; ++j) total.add(theta.weights[j]);
    if (std::abs(total.value() - 1.0) > 1e-14 && total.value() > 0.0) {
        theta.weights /= total.value();
    }
    if (is_gaussian(spec)) {
        const Eigen::Index d = D(spec);
        theta.means.resize(k, d);
        theta.log_variances.resize(k, d);
        for (Eigen::Index j = 0; j < k; ++j) {
            for (Eigen::Index l = 0; l < d; ++l) {
                theta.means(j, l) = flat[k + j * d + l];
                theta.log_variances(j, l) = flat[k + k * d + j * d + l];
            }
        }
    } else {
        theta.rates = flat.segment(k, k);
    }
    return theta;
}

Eigen::MatrixXd free_tangent_basis(const ModelSpec& spec) {
    const Eigen::Index p = static_cast<Eigen::Index>(spec.flat_size());
    const Eigen::Index k = K(spec);
    std::vector<Eigen::VectorXd> columns;

    // Helmert contrasts span the sum-zero subspace of the weight block.
    if (spec.estimate_weights) {
        for (Eigen::Index m = 1; m < k; ++m) {
            Eigen::VectorXd v = Eigen::VectorXd::Zero(p);
            const double scale = 1.0 / std::sqrt(static_cast<double>(m * (m + 1)));
            for (Eigen::Index j = 0; j < m; ++j) v[j] = scale;
            v[m] = -static_cast<double>(m) * scale;
            columns.push_back(std::move(v));
        }
    }
    auto add_unit_block = [&](std::size_t offset, Eigen::Index count) {
        for (Eigen::Index i = 0; i < count; ++i) {
            Eigen::VectorXd v = Eigen::VectorXd::Zero(p);
            v[static_cast<Eigen::Index>(offset) + i] = 1.0;
            columns.push_back(std::move(v));
        }
    };
    if (is_gaussian(spec)) {
        add_unit_block(spec.means_offset(), k * D(spec));
        if (spec.estimate_variances) add_unit_block(spec.log_variances_offset(), k * D(spec));
    } else {
        add_unit_block(spec.rates_offset(), k);
    }

    Eigen::MatrixXd basis(p, static_cast<Eigen::Index>(columns.size()));
    for (std::size_t c = 0; c < columns.size(); ++c) {
        basis.col(static_cast<Eigen::Index>(c)) = columns[c];
    }
    return basis;
}

Eigen::VectorXd project_to_tangent(const ModelSpec& spec, const Eigen::VectorXd& direction) {
    Eigen::VectorXd out = direction;
    const Eigen::Index k = K(spec);
    if (spec.estimate_weights) {
        out.head(k).array() -= out.head(k).mean();
    } else {
        out.head(k).setZero();
    }
    if (is_gaussian(spec) && !spec.estimate_variances) {
        out.segment(static_cast<Eigen::Index>(spec.log_variances_offset()), k * D(spec)).setZero();
    }
    return out;
}

MixtureParams collapsed_point(const ModelSpec& spec, const Dataset& data) {
    spec.validate();
    validate_dataset(spec, data);
    const Eigen::Index k = K(spec);
    const double n = static_cast<double>(data.size());
    MixtureParams theta;
    theta.weights = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
    if (is_gaussian(spec)) {
        const Eigen::RowVectorXd mean = data.y.colwise().sum() / n;
        Eigen::RowVectorXd var =
            ((data.y.rowwise() - mean).array().square().colwise().sum() / n).matrix();
        theta.means = mean.replicate(k, 1);
        theta.log_variances.resize(k, D(spec));
        for (Eigen::Index l = 0; l < D(spec); ++l) {
            const double v = std::log(std::max(var[l], spec.variance_floor));
            theta.log_variances.col(l).setConstant(v);
        }
    } else {
        theta.rates = Eigen::VectorXd::Constant(k, std::max(data.y.mean(), kRateFloor));
    }
    // Responsibilities at any point with identical components are bitwise
    // uniform, so one M-step lands on an exact fixed point.
    return m_step(spec, theta, data).params;
}

MixtureParams canonicalize_labels(const ModelSpec& spec, const MixtureParams& theta) {
    const Eigen::Index k = K(spec);
    std::vector<std::vector<double>> keys(static_cast<std::size_t>(k));
    for (Eigen::Index j = 0; j < k; ++j) {
        auto& key = keys[static_cast<std::size_t>(j)];
        if (is_gaussian(spec)) {
            for (Eigen::Index l = 0; l < D(spec); ++l) key.push_back(theta.means(j, l));
            for (Eigen::Index l = 0; l < D(spec); ++l) key.push_back(theta.log_variances(j, l));
        } else {
            key.push_back(theta.rates[j]);
        }
        key.push_back(theta.weights[j]);
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return keys[static_cast<std::size_t>(a)] < keys[static_cast<std::size_t>(b)];
    });

    MixtureParams out = theta;
    for (Eigen::Index j = 0; j < k; ++j) {
        const Eigen::Index src = order[static_cast<std::size_t>(j)];
        out.weights[j] = theta.weights[src];
        if (is_gaussian(spec)) {
            out.means.row(j) = theta.means.row(src);
            out.log_variances.row(j) = theta.log_variances.row(src);
        } else {
            out.rates[j] = theta.rates[src];
        }
    }
    return out;
}

Eigen::MatrixXd weighted_log_densities(const ModelSpec& spec, const MixtureParams& theta,
                                       const Dataset& data) {
    const Eigen::Index n = data.size();
    const Eigen::Index k = K(spec);
    Eigen::MatrixXd out(n, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        const double log_w = std::log(theta.weights[j]);
        if (is_gaussian(spec)) {
            const Eigen::Index d = D(spec);
            double constant = 0.0;
            for (Eigen::Index l = 0; l < d; ++l) constant += kLog2Pi + theta.log_variances(j, l);
            for (Eigen::Index i = 0; i < n; ++i) {
                double quad = 0.0;
                for (Eigen::Index l = 0; l < d; ++l) {
                    const double diff = data.y(i, l) - theta.means(j, l);
                    quad += diff * diff * std::exp(-theta.log_variances(j, l));
                }
                out(i, j) = log_w - 0.5 * (constant + quad);
            }
        } else {
            const double rate = theta.rates[j];
            const double log_rate = std::log(rate);
            for (Eigen::Index i = 0; i < n; ++i) {
                const double y = data.y(i, 0);
                const double term = y > 0.0 ? y * log_rate : 0.0;
                out(i, j) = log_w + term - rate - std::lgamma(y + 1.0);
            }
        }
    }
    return out;
}

namespace {

struct EStep {
    Responsibilities resp;
    Eigen::VectorXd row_loglik;
};

EStep e_step(const ModelSpec& spec, const MixtureParams& theta, const Dataset& data) {
    const Eigen::MatrixXd joint = weighted_log_densities(spec, theta, data);
    const Eigen::Index n = joint.rows();
    const Eigen::Index k = joint.cols();
    EStep out;
    out.resp.prob.resize(n, k);
    out.resp.log_prob.resize(n, k);
    out.row_loglik.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double m = joint.row(i).maxCoeff();
        if (!std::isfinite(m)) {
            std::ostringstream msg;
            msg << "non-finite component log-density at observation " << i;
            throw DomainError(msg.str(), static_cast<long>(i));
        }
        double s = 0.0;
        for (Eigen::Index j = 0; j < k; ++j) {
            const double e = std::exp(joint(i, j) - m);
            out.resp.prob(i, j) = e;
            s += e;
        }
        const double log_s = std::log(s);
        for (Eigen::Index j = 0; j < k; ++j) {
            out.resp.prob(i, j) /= s;
            out.resp.log_prob(i, j) = (joint(i, j) - m) - log_s;
        }
        out.row_loglik[i] = m + log_s;
        if (!std::isfinite(out.row_loglik[i])) {
            std::ostringstream msg;
            msg << "non-finite log-likelihood at observation " << i;
            throw DomainError(msg.str(), static_cast<long>(i));
        }
    }
    return out;
}

}  // namespace

double log_likelihood(const ModelSpec& spec, const MixtureParams& theta, const Dataset& data) {
    const EStep e = e_step(spec, theta, data);
    CompensatedSum total;
    for (Eigen::Index i = 0; i < e.row_loglik.size(); ++i) total.add(e.row_loglik[i]);
    const double value = total.value();
    if (!std::isfinite(value)) throw DomainError("log-likelihood overflowed", -1);
    return value;
}

Responsibilities responsibilities(const ModelSpec& spec, const MixtureParams& theta,
                                  const Dataset& data) {
    return e_step(spec, theta, data).resp;
}

double q_function(const ModelSpec& spec, const MixtureParams& theta,
                  const Responsibilities& resp_prime, const Dataset& data) {
    const Eigen::MatrixXd joint = weighted_log_densities(spec, theta, data);
    CompensatedSum total;
    for (Eigen::Index i = 0; i < joint.rows(); ++i) {
        for (Eigen::Index j = 0; j < joint.cols(); ++j) {
            const double r = resp_prime.prob(i, j);
            if (r == 0.0) continue;
            const double term = r * joint(i, j);
            if (!std::isfinite(term)) {
                std::ostringstream msg;
                msg << "non-finite Q term at observation " << i;
                throw DomainError(msg.str(), static_cast<long>(i));
            }
            total.add(term);
        }
    }
    return total.value();
}

double q_function(const ModelSpec& spec, const MixtureParams& theta,
                  const MixtureParams& theta_prime, const Dataset& data) {
    return q_function(spec, theta, responsibilities(spec, theta_prime, data), data);
}

Eigen::VectorXd q_gradient(const ModelSpec& spec, const MixtureParams& theta,
                           const Responsibilities& resp_prime, const Dataset& data) {
    const Eigen::Index k = K(spec);
    const Eigen::Index n = data.size();
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.flat_size()));
    for (Eigen::Index j = 0; j < k; ++j) {
        double mass = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) mass += resp_prime.prob(i, j);
        grad[j] = mass / theta.weights[j];
    }
    if (is_gaussian(spec)) {
        const Eigen::Index d = D(spec);
        const auto mu_off = static_cast<Eigen::Index>(spec.means_offset());
        const auto s_off = static_cast<Eigen::Index>(spec.log_variances_offset());
        for (Eigen::Index j = 0; j < k; ++j) {
            for (Eigen::Index l = 0; l < d; ++l) {
                const double inv_var = std::exp(-theta.log_variances(j, l));
                double g_mu = 0.0;
                double g_s = 0.0;
                for (Eigen::Index i = 0; i < n; ++i) {
                    const double r = resp_prime.prob(i, j);
                    const double diff = data.y(i, l) - theta.means(j, l);
                    g_mu += r * diff * inv_var;
                    g_s += r * 0.5 * (diff * diff * inv_var - 1.0);
                }
                grad[mu_off + j * d + l] = g_mu;
                grad[s_off + j * d + l] = g_s;
            }
        }
    } else {
        const auto off = static_cast<Eigen::Index>(spec.rates_offset());
        for (Eigen::Index j = 0; j < k; ++j) {
            double g = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                g += resp_prime.prob(i, j) * (data.y(i, 0) / theta.rates[j] - 1.0);
            }
            grad[off + j] = g;
        }
    }
    return grad;
}

double posterior_kl(const Responsibilities& from, const Responsibilities& to) {
    CompensatedSum total;
    for (Eigen::Index i = 0; i < from.prob.rows(); ++i) {
        for (Eigen::Index j = 0; j < from.prob.cols(); ++j) {
            const double r = from.prob(i, j);
            if (r == 0.0) continue;
            total.add(r * (from.log_prob(i, j) - to.log_prob(i, j)));
        }
    }
    return total.value();
}

double posterior_kl(const ModelSpec& spec, const MixtureParams& theta_prime,
                    const MixtureParams& theta, const Dataset& data) {
    return posterior_kl(responsibilities(spec, theta_prime, data),
                        responsibilities(spec, theta, data));
}

double posterior_entropy(const Responsibilities& resp) {
    CompensatedSum total;
    for (Eigen::Index i = 0; i < resp.prob.rows(); ++i) {
        for (Eigen::Index j = 0; j < resp.prob.cols(); ++j) {
            const double r = resp.prob(i, j);
            if (r == 0.0) continue;
            total.add(-r * resp.log_prob(i, j));
        }
    }
    return total.value();
}

double posterior_entropy(const ModelSpec& spec, const MixtureParams& theta_prime,
                         const Dataset& data) {
    return posterior_entropy(responsibilities(spec, theta_prime, data));
}

namespace {

// Maximizer of sum_j mass_j log w_j over {w : w_j >= floor, sum w = 1}.
// KKT gives w_j = max(floor, mass_j / nu); solved by clipping and rescaling.
Eigen::VectorXd floored_weights(const Eigen::VectorXd& mass, double floor, bool& clipped) {
    const Eigen::Index k = mass.size();
    std::vector<bool> fixed(static_cast<std::size_t>(k), false);
    Eigen::VectorXd w(k);
    clipped = false;
    for (;;) {
        CompensatedSum free_mass;
        Eigen::Index n_fixed = 0;
        for (Eigen::Index j = 0; j < k; ++j) {
            if (fixed[static_cast<std::size_t>(j)]) {
                ++n_fixed;
            } else {
                free_mass.add(mass[j]);
            }
        }
        const double budget = 1.0 - static_cast<double>(n_fixed) * floor;
        bool changed = false;
        for (Eigen::Index j = 0; j < k; ++j) {
            if (fixed[static_cast<std::size_t>(j)]) {
                w[j] = floor;
                continue;
            }
            w[j] = free_mass.value() > 0.0 ? budget * mass[j] / free_mass.value()
                                            : budget / static_cast<double>(k - n_fixed);
            if (w[j] < floor) {
                fixed[static_cast<std::size_t>(j)] = true;
                changed = true;
                clipped = true;
            }
        }
        if (!changed) return w;
    }
}

}  // namespace

MStepResult m_step(const ModelSpec& spec, const MixtureParams& theta_prime,
                   const Responsibilities& resp_prime, const Dataset& data) {
    const Eigen::Index k = K(spec);
    const Eigen::Index n = data.size();
    const double degenerate_mass = 1e-10 * static_cast<double>(n);

    MStepResult out;
    out.params = theta_prime;

    Eigen::VectorXd mass(k);
    std::vector<bool> empty(static_cast<std::size_t>(k), false);
    for (Eigen::Index j = 0; j < k; ++j) {
        CompensatedSum m;
        for (Eigen::Index i = 0; i < n; ++i) m.add(resp_prime.prob(i, j));
        mass[j] = m.value();
        if (mass[j] < degenerate_mass) {
            empty[static_cast<std::size_t>(j)] = true;
            out.degenerate = true;
        }
    }

    if (spec.estimate_weights) {
        bool clipped = false;
        out.params.weights = floored_weights(mass, spec.weight_floor, clipped);
        out.floors_active = out.floors_active || clipped;
    }

    if (is_gaussian(spec)) {
        const Eigen::Index d = D(spec);
        const double min_log_var = std::log(spec.variance_floor);
        for (Eigen::Index j = 0; j < k; ++j) {
            if (empty[static_cast<std::size_t>(j)]) continue;
            for (Eigen::Index l = 0; l < d; ++l) {
                CompensatedSum first;
                for (Eigen::Index i = 0; i < n; ++i) first.add(resp_prime.prob(i, j) * data.y(i, l));
                const double mean = first.value() / mass[j];
                out.params.means(j, l) = mean;
                if (!spec.estimate_variances) continue;
                CompensatedSum second;
                for (Eigen::Index i = 0; i < n; ++i) {
                    const double diff = data.y(i, l) - mean;
                    second.add(resp_prime.prob(i, j) * diff * diff);
                }
                const double var = second.value() / mass[j];
                if (!(var > spec.variance_floor)) {
                    out.params.log_variances(j, l) = min_log_var;
                    out.floors_active = true;
                } else {
                    out.params.log_variances(j, l) = std::log(var);
                }
            }
        }
    } else {
        for (Eigen::Index j = 0; j < k; ++j) {
            if (empty[static_cast<std::size_t>(j)]) continue;
            CompensatedSum first;
            for (Eigen::Index i = 0; i < n; ++i) first.add(resp_prime.prob(i, j) * data.y(i, 0));
            const double rate = first.value() / mass[j];
            if (!(rate > kRateFloor)) {
                out.params.rates[j] = kRateFloor;
                out.floors_active = true;
            } else {
                out.params.rates[j] = rate;
            }
        }
    }
    return out;
}

MStepResult m_step(const ModelSpec& spec, const MixtureParams& theta_prime,
                   const Dataset& data) {
    return m_step(spec, theta_prime, responsibilities(spec, theta_prime, data), data);
}

MixtureParams random_init(const ModelSpec& spec, const Dataset& data, std::uint64_t seed) {
    spec.validate();
    validate_dataset(spec, data);
    const Eigen::Index k = K(spec);
    const Eigen::Index n = data.size();
    Rng rng(seed, 0, 0x1417);

    std::vector<Eigen::Index> picks(static_cast<std::size_t>(n));
    std::iota(picks.begin(), picks.end(), Eigen::Index{0});
    for (Eigen::Index j = 0; j < std::min(k, n); ++j) {
        const auto remaining = static_cast<std::uint64_t>(n - j);
        const auto offset = static_cast<Eigen::Index>(rng.next_u64() % remaining);
        std::swap(picks[static_cast<std::size_t>(j)], picks[static_cast<std::size_t>(j + offset)]);
    }
    auto pick = [&](Eigen::Index j) { return picks[static_cast<std::size_t>(j % n)]; };

    MixtureParams theta;
    theta.weights = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
    if (is_gaussian(spec)) {
        const double nd = static_cast<double>(n);
        const Eigen::RowVectorXd mean = data.y.colwise().sum() / nd;
        const Eigen::RowVectorXd var =
            ((data.y.rowwise() - mean).array().square().colwise().sum() / nd).matrix();
        theta.means.resize(k, D(spec));
        theta.log_variances.resize(k, D(spec));
        for (Eigen::Index j = 0; j < k; ++j) {
            theta.means.row(j) = data.y.row(pick(j));
            for (Eigen::Index l = 0; l < D(spec); ++l) {
                theta.log_variances(j, l) = std::log(std::max(var[l], spec.variance_floor));
            }
        }
    } else {
        theta.rates.resize(k);
        for (Eigen::Index j = 0; j < k; ++j) theta.rates[j] = data.y(pick(j), 0) + 0.5;
    }
    return theta;
}

}  // namespace emdyn
