#include "emdyn/numdiff.hpp"

#include "emdyn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace emdyn {

namespace {

double probe(const ScalarField& f, const Eigen::VectorXd& x) {
    const double value = f(x);
    if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "non-finite function value at probe point [";
        for (Eigen::Index i = 0; i < x.size(); ++i) msg << (i ? ", " : "") << x[i];
        msg << "]";
        throw NumericalError(msg.str());
    }
    return value;
}

double step_for(double xi, double h) { return h * std::max(1.0, std::abs(xi)); }

}  // namespace

Eigen::VectorXd numeric_gradient(const ScalarField& f, const Eigen::VectorXd& x, double h) {
    if (!(h > 0.0)) throw InputError("finite-difference step must be > 0");
    Eigen::VectorXd grad(x.size());
    Eigen::VectorXd probe_point = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double hi = step_for(x[i], h);
        probe_point[i] = x[i] + hi;
        const double forward = probe(f, probe_point);
        probe_point[i] = x[i] - hi;
        const double backward = probe(f, probe_point);
        probe_point[i] = x[i];
        grad[i] = (forward - backward) / (2.0 * hi);
    }
    return grad;
}

Eigen::MatrixXd numeric_hessian(const ScalarField& f, const Eigen::VectorXd& x, double h) {
    if (!(h > 0.0)) throw InputError("finite-difference step must be > 0");
    const Eigen::Index n = x.size();
    Eigen::MatrixXd hess(n, n);
    Eigen::VectorXd p = x;
    const double center = probe(f, x);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double hi = step_for(x[i], h);
        p[i] = x[i] + hi;
        const double plus = probe(f, p);
        p[i] = x[i] - hi;
        const double minus = probe(f, p);
        p[i] = x[i];
        hess(i, i) = (plus - 2.0 * center + minus) / (hi * hi);

        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double hj = step_for(x[j], h);
            p[i] = x[i] + hi;
            p[j] = x[j] + hj;
            const double pp = probe(f, p);
            p[j] = x[j] - hj;
            const double pm = probe(f, p);
            p[i] = x[i] - hi;
            const double mm = probe(f, p);
            p[j] = x[j] + hj;
            const double mp = probe(f, p);
            p[i] = x[i];
            p[j] = x[j];
            hess(i, j) = (pp - pm - mp + mm) / (4.0 * hi * hj);
            hess(j, i) = hess(i, j);
        }
    }
    return 0.5 * (hess + hess.transpose());
}

}  // namespace emdyn
