#pragma once

// Central finite differences. Step sizes are relative: h_i = h * max(1, |x_i|).

#include <Eigen/Core>

#include <functional>

namespace emdyn {

using ScalarField = std::function<double(const Eigen::VectorXd&)>;

// O(h^2) accurate on smooth f. Throws NumericalError naming the probe point
// when f returns a non-finite value.
Eigen::VectorXd numeric_gradient(const ScalarField& f, const Eigen::VectorXd& x, double h = 1e-5);

// Symmetrized, (H + H^T) / 2. The default step is larger than the gradient
// step because the second difference loses accuracy as eps / h^2.
Eigen::MatrixXd numeric_hessian(const ScalarField& f, const Eigen::VectorXd& x, double h = 1e-4);

}  // namespace emdyn
