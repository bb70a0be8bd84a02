#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace rgta {

// Per-node first-order oracle for f(x) = (1/n) sum_i f_i(x).
class GradientOracle {
 public:
  virtual ~GradientOracle() = default;

  virtual int nodes() const = 0;
  virtual int dim() const = 0;

  virtual void local_gradient(int node, const Eigen::Ref<const Eigen::VectorXd>& x,
                              Eigen::Ref<Eigen::VectorXd> out) const = 0;
  virtual double local_value(int node, const Eigen::Ref<const Eigen::VectorXd>& x) const = 0;

  // Largest per-node Lipschitz constant of the gradients.
  virtual double lipschitz() const = 0;
  // Strong convexity modulus of the global objective (or a lower bound).
  virtual double strong_convexity() const = 0;

  // Stable identifier of the problem data, used as a cache key.
  virtual std::uint64_t fingerprint() const = 0;

  Eigen::VectorXd local_gradient(int node, const Eigen::VectorXd& x) const;
  Eigen::VectorXd global_gradient(const Eigen::VectorXd& x) const;
  double global_value(const Eigen::VectorXd& x) const;

  // Row i of `out` <- grad f_i(row i of x).
  void stacked_gradient(const Eigen::MatrixXd& x, Eigen::MatrixXd& out) const;
};

// ---------------------------------------------------------------------------
// Quadratics: f_i(x) = 1/2 x^T Q_i x + v_i^T x

struct QuadraticProblem {
  int n = 0;
  int d = 0;
  std::vector<Eigen::MatrixXd> Q;
  std::vector<Eigen::VectorXd> v;
  double kappa_target = 1.0;
  double kappa_achieved = 1.0;
};

// Diagonal Q_i with log-uniform spectra on [1, kappa_target]. Dimension 0 is
// pinned to 1 and dimension d-1 to kappa_target at every node, so the averaged
// Hessian has condition number kappa_target. v_i ~ N(0, I).
QuadraticProblem generate_quadratic(int n, int d, double kappa_target, std::uint64_t seed);

// lambda_max / lambda_min of (1/n) sum_i Q_i.
double global_condition_number(const QuadraticProblem& problem);

// Solves ((1/n) sum Q_i) x = -(1/n) sum v_i.
Eigen::VectorXd quadratic_optimum(const QuadraticProblem& problem);

class QuadraticOracle final : public GradientOracle {
 public:
  explicit QuadraticOracle(QuadraticProblem problem);

  using GradientOracle::local_gradient;

  int nodes() const override { return problem_.n; }
  int dim() const override { return problem_.d; }
  void local_gradient(int node, const Eigen::Ref<const Eigen::VectorXd>& x,
                      Eigen::Ref<Eigen::VectorXd> out) const override;
  double local_value(int node, const Eigen::Ref<const Eigen::VectorXd>& x) const override;
  double lipschitz() const override { return lipschitz_; }
  double strong_convexity() const override { return mu_; }
  std::uint64_t fingerprint() const override { return fingerprint_; }

  const QuadraticProblem& problem() const { return problem_; }

 private:
  QuadraticProblem problem_;
  double lipschitz_;
  double mu_;
  std::uint64_t fingerprint_;
  bool diagonal_ = false;
  Eigen::MatrixXd diag_;  // d x n, column i = diag(Q_i)
};

// ---------------------------------------------------------------------------
// Labelled sparse data and logistic regression

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct Dataset {
  std::vector<double> labels;  // each -1 or +1
  SparseRows features;         // rows x dim
  std::uint64_t content_hash = 0;

  std::size_t rows() const { return labels.size(); }
  int dim() const { return static_cast<int>(features.cols()); }
};

// LIBSVM text: "<label> <idx>:<val> ...", 1-based strictly increasing
// indices. Labels +1/1 -> +1, -1/0 -> -1. Blank lines are skipped. The
// feature dimension is declared_dim when given, else the largest index seen.
Dataset parse_libsvm(std::istream& in, std::optional<int> declared_dim = std::nullopt);
Dataset load_libsvm(const std::filesystem::path& path, std::optional<int> declared_dim = std::nullopt);

// Contiguous per-node row ranges [begin, end).
struct DatasetPartition {
  std::vector<std::pair<std::size_t, std::size_t>> ranges;

  std::vector<std::size_t> sizes() const;
};

// The first (rows mod n) nodes get ceil(rows/n) rows, the rest floor(rows/n).
DatasetPartition partition(std::size_t rows, int n);
inline DatasetPartition partition(const Dataset& dataset, int n) { return partition(dataset.rows(), n); }

struct LogisticProblem {
  int n = 0;
  int d = 0;
  std::vector<SparseRows> A;
  std::vector<Eigen::VectorXd> b;
  std::uint64_t data_hash = 0;

  std::size_t samples(int node) const { return b[node].size(); }
};

LogisticProblem make_logistic_problem(const Dataset& dataset, const DatasetPartition& parts);

// f_i(x) = (1/n_i) sum_s log(1 + exp(-b_s a_s^T x)) + (1/n_i) ||x||^2.
class LogisticOracle final : public GradientOracle {
 public:
  explicit LogisticOracle(LogisticProblem problem);

  using GradientOracle::local_gradient;

  int nodes() const override { return problem_.n; }
  int dim() const override { return problem_.d; }
  void local_gradient(int node, const Eigen::Ref<const Eigen::VectorXd>& x,
                      Eigen::Ref<Eigen::VectorXd> out) const override;
  double local_value(int node, const Eigen::Ref<const Eigen::VectorXd>& x) const override;
  double lipschitz() const override { return lipschitz_; }
  double strong_convexity() const override { return mu_; }
  std::uint64_t fingerprint() const override { return problem_.data_hash; }

  const LogisticProblem& problem() const { return problem_; }

 private:
  LogisticProblem problem_;
  double lipschitz_;
  double mu_;
};

LogisticOracle logistic_oracle(LogisticProblem problem);

// Numerically stable log(1 + exp(z)) and 1 / (1 + exp(-z)).
double log1p_exp(double z);
double sigmoid(double z);

// ---------------------------------------------------------------------------

struct OptimumOptions {
  double tolerance = 1e-12;
  long max_iterations = 100'000'000;
};

// Gradient descent with step 1/L from the origin until ||grad f|| <= tolerance.
// Throws NonConvergenceError when the iteration cap is reached first.
Eigen::VectorXd centralized_optimum(const GradientOracle& oracle, const OptimumOptions& options = {});
Eigen::VectorXd centralized_optimum(const GradientOracle& oracle, const Eigen::VectorXd& start,
                                    const OptimumOptions& options);

// One decimal value per line, 17 significant digits.
void write_vector(const std::filesystem::path& path, const Eigen::VectorXd& v);
Eigen::VectorXd read_vector(const std::filesystem::path& path);

// FNV-1a, used for cache keys and dataset fingerprints.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed = 14695981039346656037ULL);

}  // namespace rgta
