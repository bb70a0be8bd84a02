#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rgta/problems.hpp"

namespace rgta::testing {

// LIBSVM text shaped like a9a: binary features in 1..d, about `active`
// nonzeros per row, labels drawn from a planted logistic model.
std::string synthetic_libsvm(std::size_t rows, int d, int active, std::uint64_t seed);

// Quadratic with the given per-node diagonal Hessians and linear terms.
QuadraticProblem diagonal_quadratic(const std::vector<std::vector<double>>& q,
                                    const std::vector<std::vector<double>>& v);

// Central finite-difference gradient of local_value.
Eigen::VectorXd fd_gradient(const GradientOracle& oracle, int node, const Eigen::VectorXd& x, double h);

// Largest eigenvalue modulus from Eigen's general dense eigensolver.
double dense_spectral_radius(const Eigen::MatrixXd& a);

// Explicit matrix power by repeated multiplication.
Eigen::MatrixXd matrix_power(const Eigen::MatrixXd& w, int k);

// Relative difference |a - b| / max(|a|, |b|, floor).
double rel_diff(double a, double b, double floor = 1e-300);

}  // namespace rgta::testing
