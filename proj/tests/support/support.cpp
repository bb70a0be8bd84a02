#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

namespace rgta::testing {

std::string synthetic_libsvm(std::size_t rows, int d, int active, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  // uneven feature popularity, like one-hot encoded census columns
  std::vector<double> weight(static_cast<std::size_t>(d));
  for (double& w : weight) w = std::exp(1.5 * normal(rng));
  std::discrete_distribution<int> feature(weight.begin(), weight.end());
  std::vector<double> planted(static_cast<std::size_t>(d));
  for (double& w : planted) w = 0.5 * normal(rng);

  std::string out;
  out.reserve(rows * static_cast<std::size_t>(active) * 6);
  std::vector<int> idx;
  for (std::size_t r = 0; r < rows; ++r) {
    idx.clear();
    while (static_cast<int>(idx.size()) < active) {
      const int f = feature(rng);
      if (std::find(idx.begin(), idx.end(), f) == idx.end()) idx.push_back(f);
    }
    std::sort(idx.begin(), idx.end());
    double margin = -0.5;
    for (int f : idx) margin += planted[static_cast<std::size_t>(f)];
    const bool positive = unif(rng) < 1.0 / (1.0 + std::exp(-margin));
    out += positive ? "+1" : "-1";
    for (int f : idx) out += fmt::format(" {}:1", f + 1);
    out += '\n';
  }
  return out;
}

QuadraticProblem diagonal_quadratic(const std::vector<std::vector<double>>& q,
                                    const std::vector<std::vector<double>>& v) {
  QuadraticProblem p;
  p.n = static_cast<int>(q.size());
  p.d = static_cast<int>(q.front().size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(p.d);
  for (std::size_t i = 0; i < q.size(); ++i) {
    const Eigen::VectorXd diag = Eigen::Map<const Eigen::VectorXd>(q[i].data(), p.d);
    p.Q.push_back(diag.asDiagonal());
    p.v.push_back(Eigen::Map<const Eigen::VectorXd>(v[i].data(), p.d));
    mean += diag / p.n;
  }
  p.kappa_target = mean.maxCoeff() / mean.minCoeff();
  p.kappa_achieved = p.kappa_target;
  return p;
}

Eigen::VectorXd fd_gradient(const GradientOracle& oracle, int node, const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x, xm = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    xp(j) = x(j) + h;
    xm(j) = x(j) - h;
    g(j) = (oracle.local_value(node, xp) - oracle.local_value(node, xm)) / (2.0 * h);
    xp(j) = x(j);
    xm(j) = x(j);
  }
  return g;
}

double dense_spectral_radius(const Eigen::MatrixXd& a) {
  Eigen::EigenSolver<Eigen::MatrixXd> solver(a, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

Eigen::MatrixXd matrix_power(const Eigen::MatrixXd& w, int k) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Identity(w.rows(), w.cols());
  for (int i = 0; i < k; ++i) out = out * w;
  return out;
}

double rel_diff(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace rgta::testing
