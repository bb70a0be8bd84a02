#include "rgta/problems.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>
#include <fmt/os.h>

#include "rgta/errors.hpp"

namespace rgta {

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

Eigen::VectorXd GradientOracle::local_gradient(int node, const Eigen::VectorXd& x) const {
  Eigen::VectorXd g(dim());
  local_gradient(node, x, g);
  return g;
}

Eigen::VectorXd GradientOracle::global_gradient(const Eigen::VectorXd& x) const {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim());
  Eigen::VectorXd g(dim());
  for (int i = 0; i < nodes(); ++i) {
    local_gradient(i, x, g);
    sum += g;
  }
  return sum / nodes();
}

double GradientOracle::global_value(const Eigen::VectorXd& x) const {
  double sum = 0.0;
  for (int i = 0; i < nodes(); ++i) sum += local_value(i, x);
  return sum / nodes();
}

void GradientOracle::stacked_gradient(const Eigen::MatrixXd& x, Eigen::MatrixXd& out) const {
  out.resize(nodes(), dim());
  Eigen::VectorXd row(dim());
  Eigen::VectorXd g(dim());
  for (int i = 0; i < nodes(); ++i) {
    row = x.row(i).transpose();
    local_gradient(i, row, g);
    out.row(i) = g.transpose();
  }
}

// ---------------------------------------------------------------------------

QuadraticProblem generate_quadratic(int n, int d, double kappa_target, std::uint64_t seed) {
  if (n < 1 || d < 1) throw std::invalid_argument("generate_quadratic needs n, d >= 1");
  if (!(kappa_target >= 1.0)) throw std::invalid_argument("kappa_target must be >= 1");
  if (d == 1 && kappa_target != 1.0) {
    throw std::invalid_argument("a one-dimensional quadratic can only have kappa = 1");
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> log_spectrum(0.0, std::log10(kappa_target));
  std::normal_distribution<double> gaussian(0.0, 1.0);

  QuadraticProblem problem;
  problem.n = n;
  problem.d = d;
  problem.kappa_target = kappa_target;
  problem.Q.reserve(n);
  problem.v.reserve(n);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd q(d);
    for (int j = 0; j < d; ++j) q(j) = std::pow(10.0, log_spectrum(rng));
    q(0) = 1.0;
    q(d - 1) = kappa_target;
    Eigen::VectorXd v(d);
    for (int j = 0; j < d; ++j) v(j) = gaussian(rng);
    problem.Q.push_back(q.asDiagonal().toDenseMatrix());
    problem.v.push_back(std::move(v));
  }
  problem.kappa_achieved = global_condition_number(problem);
  return problem;
}

namespace {

Eigen::MatrixXd mean_hessian(const QuadraticProblem& problem) {
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(problem.d, problem.d);
  for (const auto& q : problem.Q) mean += q;
  return mean / problem.n;
}

void validate(const QuadraticProblem& problem) {
  if (problem.n < 1 || problem.d < 1 || static_cast<int>(problem.Q.size()) != problem.n ||
      static_cast<int>(problem.v.size()) != problem.n) {
    throw std::invalid_argument("inconsistent quadratic problem");
  }
  for (int i = 0; i < problem.n; ++i) {
    if (problem.Q[i].rows() != problem.d || problem.Q[i].cols() != problem.d ||
        problem.v[i].size() != problem.d) {
      throw std::invalid_argument("quadratic problem block has wrong shape");
    }
  }
}

}  // namespace

double global_condition_number(const QuadraticProblem& problem) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(mean_hessian(problem), Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  return ev(ev.size() - 1) / ev(0);
}

Eigen::VectorXd quadratic_optimum(const QuadraticProblem& problem) {
  validate(problem);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(problem.d);
  for (const auto& v : problem.v) rhs -= v;
  rhs /= problem.n;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(mean_hessian(problem));
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw std::runtime_error("quadratic_optimum: averaged Hessian is not positive definite");
  }
  Eigen::VectorXd x = ldlt.solve(rhs);
  if (!x.allFinite()) throw std::runtime_error("quadratic_optimum: singular system");
  return x;
}

QuadraticOracle::QuadraticOracle(QuadraticProblem problem) : problem_(std::move(problem)) {
  validate(problem_);
  lipschitz_ = 0.0;
  std::uint64_t h = fnv1a("quadratic", 9);
  for (int i = 0; i < problem_.n; ++i) {
    const Eigen::MatrixXd& q = problem_.Q[i];
    if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, q.cwiseAbs().maxCoeff())) {
      throw std::invalid_argument("Q_i must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q, Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues()(0) > 0.0)) throw std::invalid_argument("Q_i must be positive definite");
    lipschitz_ = std::max(lipschitz_, eig.eigenvalues()(problem_.d - 1));
    h = fnv1a(q.data(), sizeof(double) * q.size(), h);
    h = fnv1a(problem_.v[i].data(), sizeof(double) * problem_.d, h);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(mean_hessian(problem_), Eigen::EigenvaluesOnly);
  mu_ = eig.eigenvalues()(0);
  fingerprint_ = h;
  diagonal_ = std::all_of(problem_.Q.begin(), problem_.Q.end(), [](const Eigen::MatrixXd& q) {
    return q.isDiagonal(0.0);
  });
  if (diagonal_) {
    diag_.resize(problem_.d, problem_.n);
    for (int i = 0; i < problem_.n; ++i) diag_.col(i) = problem_.Q[i].diagonal();
  }
}

void QuadraticOracle::local_gradient(int node, const Eigen::Ref<const Eigen::VectorXd>& x,
                                     Eigen::Ref<Eigen::VectorXd> out) const {
  if (diagonal_) {
    out = diag_.col(node).cwiseProduct(x) + problem_.v[node];
    return;
  }
  out.noalias() = problem_.Q[node] * x;
  out += problem_.v[node];
}

double QuadraticOracle::local_value(int node, const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return 0.5 * x.dot(problem_.Q[node] * x) + problem_.v[node].dot(x);
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> DatasetPartition::sizes() const {
  std::vector<std::size_t> out;
  out.reserve(ranges.size());
  for (const auto& [begin, end] : ranges) out.push_back(end - begin);
  return out;
}

DatasetPartition partition(std::size_t rows, int n) {
  if (n < 1) throw std::invalid_argument("partition needs at least one node");
  if (static_cast<std::size_t>(n) > rows) {
    throw std::invalid_argument("cannot split " + std::to_string(rows) + " rows over " +
                                std::to_string(n) + " nodes");
  }
  const std::size_t base = rows / n;
  const std::size_t extra = rows % n;
  DatasetPartition out;
  std::size_t begin = 0;
  for (int i = 0; i < n; ++i) {
    const std::size_t size = base + (static_cast<std::size_t>(i) < extra ? 1 : 0);
    out.ranges.emplace_back(begin, begin + size);
    begin += size;
  }
  return out;
}

LogisticProblem make_logistic_problem(const Dataset& dataset, const DatasetPartition& parts) {
  if (parts.ranges.empty() || parts.ranges.back().second != dataset.rows()) {
    throw std::invalid_argument("partition does not cover the dataset");
  }
  LogisticProblem problem;
  problem.n = static_cast<int>(parts.ranges.size());
  problem.d = dataset.dim();
  std::uint64_t h = fnv1a("logistic", 8, dataset.content_hash);
  for (const auto& [begin, end] : parts.ranges) {
    const auto count = static_cast<Eigen::Index>(end - begin);
    problem.A.emplace_back(dataset.features.middleRows(static_cast<Eigen::Index>(begin), count));
    problem.b.emplace_back(Eigen::Map<const Eigen::VectorXd>(dataset.labels.data() + begin, count));
    const std::size_t range[2] = {begin, end};
    h = fnv1a(range, sizeof(range), h);
  }
  problem.data_hash = h;
  return problem;
}

double log1p_exp(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

LogisticOracle::LogisticOracle(LogisticProblem problem) : problem_(std::move(problem)) {
  if (problem_.n < 1 || static_cast<int>(problem_.A.size()) != problem_.n ||
      static_cast<int>(problem_.b.size()) != problem_.n) {
    throw std::invalid_argument("inconsistent logistic problem");
  }
  lipschitz_ = 0.0;
  double mu_sum = 0.0;
  for (int i = 0; i < problem_.n; ++i) {
    const SparseRows& a = problem_.A[i];
    const auto ni = static_cast<double>(problem_.samples(i));
    if (a.rows() != problem_.b[i].size() || a.cols() != problem_.d || ni == 0) {
      throw std::invalid_argument("logistic block has wrong shape");
    }
    if (((problem_.b[i].array() != 1.0) && (problem_.b[i].array() != -1.0)).any()) {
      throw std::invalid_argument("logistic labels must be -1 or +1");
    }
    const Eigen::MatrixXd gram = Eigen::MatrixXd(a.transpose() * a);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    const double top = problem_.d > 0 ? eig.eigenvalues()(problem_.d - 1) : 0.0;
    lipschitz_ = std::max(lipschitz_, top / (4.0 * ni) + 2.0 / ni);
    mu_sum += 2.0 / ni;
  }
  mu_ = mu_sum / problem_.n;
}

void LogisticOracle::local_gradient(int node, const Eigen::Ref<const Eigen::VectorXd>& x,
                                    Eigen::Ref<Eigen::VectorXd> out) const {
  const SparseRows& a = problem_.A[node];
  const Eigen::VectorXd& b = problem_.b[node];
  const double inv_n = 1.0 / static_cast<double>(b.size());
  Eigen::VectorXd weights = a * x;
  for (Eigen::Index s = 0; s < weights.size(); ++s) {
    const double margin = b(s) * weights(s);
    weights(s) = -b(s) * sigmoid(-margin);
  }
  out.noalias() = a.transpose() * weights;
  out *= inv_n;
  out += (2.0 * inv_n) * x;
}

double LogisticOracle::local_value(int node, const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const SparseRows& a = problem_.A[node];
  const Eigen::VectorXd& b = problem_.b[node];
  const Eigen::VectorXd margins = b.cwiseProduct(a * x);
  double loss = 0.0;
  for (Eigen::Index s = 0; s < margins.size(); ++s) loss += log1p_exp(-margins(s));
  return (loss + x.squaredNorm()) / static_cast<double>(b.size());
}

LogisticOracle logistic_oracle(LogisticProblem problem) { return LogisticOracle(std::move(problem)); }

// ---------------------------------------------------------------------------

Eigen::VectorXd centralized_optimum(const GradientOracle& oracle, const OptimumOptions& options) {
  return centralized_optimum(oracle, Eigen::VectorXd::Zero(oracle.dim()), options);
}

Eigen::VectorXd centralized_optimum(const GradientOracle& oracle, const Eigen::VectorXd& start,
                                    const OptimumOptions& options) {
  if (!(options.tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if (start.size() != oracle.dim()) throw std::invalid_argument("start point has wrong dimension");
  const double step = 1.0 / oracle.lipschitz();
  Eigen::VectorXd x = start;
  Eigen::VectorXd g = oracle.global_gradient(x);
  for (long it = 0; it < options.max_iterations; ++it) {
    if (g.norm() <= options.tolerance) return x;
    x -= step * g;
    g = oracle.global_gradient(x);
    if (!g.allFinite()) throw NonConvergenceError("centralized_optimum: gradient became non-finite");
  }
  if (g.norm() <= options.tolerance) return x;
  throw NonConvergenceError(fmt::format(
      "centralized_optimum: ||grad f|| = {:.3e} > {:.3e} after {} iterations", g.norm(),
      options.tolerance, options.max_iterations));
}

void write_vector(const std::filesystem::path& path, const Eigen::VectorXd& v) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (Eigen::Index i = 0; i < v.size(); ++i) out << fmt::format("{:.17g}\n", v(i));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Eigen::VectorXd read_vector(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<double> values;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::size_t used = 0;
    try {
      values.push_back(std::stod(line, &used));
    } catch (const std::exception&) {
      throw ParseError("not a number: '" + line + "'", lineno);
    }
    if (line.find_first_not_of(" \t\r", used) != std::string::npos) {
      throw ParseError("trailing characters after value", lineno);
    }
  }
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace rgta
