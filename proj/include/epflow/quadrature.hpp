#pragma once

#include <Eigen/Dense>

#include <vector>

namespace epflow {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// n-point Gauss-Legendre rule on [-1, 1], nodes ascending.
QuadratureRule gauss_legendre(int n);

// Gauss-Legendre rule mapped to [a, b].
QuadratureRule gauss_legendre(int n, double a, double b);

// Fejer's first rule on [-1, 1] in the variable x = cos(theta) with theta_k = (k + 1/2) pi / n.
// Nodes are returned in theta order (x descending).
QuadratureRule fejer_first(int n);

// Barycentric weights for interpolation through arbitrary distinct nodes.
std::vector<double> barycentric_weights(const std::vector<double>& nodes);

// Polynomial collocation derivative matrix through arbitrary distinct nodes.
Eigen::MatrixXd differentiation_matrix(const std::vector<double>& nodes);

// Value at x of the polynomial interpolating (nodes, values).
double barycentric_interpolate(const std::vector<double>& nodes, const std::vector<double>& bary,
                               const std::vector<double>& values, double x);

// Least-squares slope and intercept of y against x, with the standard error of the slope
// and the coefficient of determination.
struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
    double r_squared = 0.0;
};
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace epflow
