#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "rgta/errors.hpp"
#include "rgta/problems.hpp"
#include "support.hpp"

using namespace rgta;
using rgta::testing::diagonal_quadratic;

namespace {

double mean_hessian_kappa(const QuadraticProblem& p) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(p.d, p.d);
  for (const auto& q : p.Q) h += q / p.n;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  return es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
}

LogisticProblem one_sample(double label, Eigen::VectorXd a) {
  LogisticProblem p;
  p.n = 1;
  p.d = static_cast<int>(a.size());
  SparseRows rows(1, p.d);
  for (int j = 0; j < p.d; ++j)
    if (a(j) != 0.0) rows.insert(0, j) = a(j);
  p.A.push_back(rows);
  p.b.push_back(Eigen::VectorXd::Constant(1, label));
  return p;
}

}  // namespace

TEST(Quadratic, TrivialScalar) {
  const auto p = generate_quadratic(1, 1, 1.0, 7);
  ASSERT_EQ(p.Q.size(), 1u);
  EXPECT_EQ(p.Q[0](0, 0), 1.0);
  const QuadraticOracle o(p);
  EXPECT_EQ(o.lipschitz(), 1.0);
  EXPECT_EQ(o.strong_convexity(), 1.0);
}

TEST(Quadratic, TargetConditionNumberIsMet) {
  for (std::uint64_t seed : {1u, 2u, 3u, 99u}) {
    const auto p = generate_quadratic(16, 10, 1e4, seed);
    const double kappa = mean_hessian_kappa(p);
    EXPECT_GE(kappa, 1e4 * (1 - 1e-12));
    EXPECT_LE(kappa, 1.1e4);
    EXPECT_NEAR(p.kappa_achieved, kappa, 1e-8 * kappa);
    EXPECT_NEAR(global_condition_number(p), kappa, 1e-8 * kappa);
    for (const auto& q : p.Q) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q);
      EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
    }
  }
}

TEST(Quadratic, BitReproducible) {
  const auto a = generate_quadratic(16, 10, 1e4, 5);
  const auto b = generate_quadratic(16, 10, 1e4, 5);
  const auto c = generate_quadratic(16, 10, 1e4, 6);
  for (int i = 0; i < 16; ++i) {
    EXPECT_EQ(a.Q[i], b.Q[i]);
    EXPECT_EQ(a.v[i], b.v[i]);
  }
  EXPECT_NE(a.v[0], c.v[0]);
  EXPECT_EQ(QuadraticOracle(a).fingerprint(), QuadraticOracle(b).fingerprint());
  EXPECT_NE(QuadraticOracle(a).fingerprint(), QuadraticOracle(c).fingerprint());
}

TEST(Quadratic, RejectsBadArguments) {
  EXPECT_THROW(generate_quadratic(4, 3, 0.5, 1), std::invalid_argument);
  EXPECT_THROW(generate_quadratic(0, 3, 10, 1), std::invalid_argument);
  EXPECT_THROW(generate_quadratic(4, 0, 10, 1), std::invalid_argument);
}

TEST(Quadratic, GradientAndOptimumExamples) {
  const QuadraticOracle o(diagonal_quadratic({{2.0}}, {{-4.0}}));
  EXPECT_EQ(o.local_gradient(0, Eigen::VectorXd::Zero(1))(0), -4.0);
  EXPECT_NEAR(quadratic_optimum(o.problem())(0), 2.0, 1e-15);

  const auto two = diagonal_quadratic({{1.0}, {3.0}}, {{1.0}, {-1.0}});
  EXPECT_NEAR(quadratic_optimum(two)(0), 0.0, 1e-15);
}

TEST(Quadratic, OptimumResidualIsTiny) {
  const QuadraticOracle o(generate_quadratic(16, 10, 1e4, 11));
  const Eigen::VectorXd x = quadratic_optimum(o.problem());
  // independent evaluation of the averaged gradient
  Eigen::VectorXd g = Eigen::VectorXd::Zero(10);
  for (int i = 0; i < 16; ++i) g += (o.problem().Q[i] * x + o.problem().v[i]) / 16.0;
  EXPECT_LE(g.norm(), 1e-10);
  EXPECT_LE(o.global_gradient(x).norm(), 1e-10);
}

TEST(Quadratic, ConstantsAndLipschitzProperty) {
  const QuadraticOracle o(generate_quadratic(8, 6, 100.0, 4));
  EXPECT_LE(o.strong_convexity(), o.lipschitz());
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 100; ++t) {
    Eigen::VectorXd x(6), y(6);
    for (int j = 0; j < 6; ++j) {
      x(j) = 10 * nd(rng);
      y(j) = 10 * nd(rng);
    }
    const int node = t % 8;
    EXPECT_LE((o.local_gradient(node, x) - o.local_gradient(node, y)).norm(),
              o.lipschitz() * (x - y).norm() * (1 + 1e-12));
  }
}

TEST(Quadratic, FiniteDifferenceGradient) {
  const QuadraticOracle o(generate_quadratic(16, 10, 1e2, 3));
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 100; ++t) {
    Eigen::VectorXd x(10);
    for (int j = 0; j < 10; ++j) x(j) = nd(rng);
    const int node = t % 16;
    const Eigen::VectorXd g = o.local_gradient(node, x);
    const Eigen::VectorXd fd = rgta::testing::fd_gradient(o, node, x, 1e-6);
    EXPECT_LE((g - fd).norm() / std::max(g.norm(), 1e-12), 1e-5);
  }
}

TEST(Partition, Sizes) {
  EXPECT_EQ(partition(10, 3).sizes(), (std::vector<std::size_t>{4, 3, 3}));
  EXPECT_EQ(partition(4, 4).sizes(), (std::vector<std::size_t>{1, 1, 1, 1}));
  auto big = partition(32561, 16).sizes();
  EXPECT_EQ(big[0], 2036u);
  for (int i = 1; i < 16; ++i) EXPECT_EQ(big[i], 2035u);
  EXPECT_THROW(partition(3, 4), std::invalid_argument);
}

TEST(Partition, RangesAreContiguousAndCover) {
  for (std::size_t rows : {7u, 16u, 100u, 1001u}) {
    for (int n : {1, 2, 5, 7}) {
      const auto part = partition(rows, n);
      std::size_t next = 0, lo = rows, hi = 0;
      for (const auto& [b, e] : part.ranges) {
        EXPECT_EQ(b, next);
        next = e;
        lo = std::min(lo, e - b);
        hi = std::max(hi, e - b);
      }
      EXPECT_EQ(next, rows);
      EXPECT_LE(hi - lo, 1u);
    }
  }
}

TEST(Logistic, SingleSampleExamples) {
  Eigen::VectorXd e1 = Eigen::VectorXd::Zero(3);
  e1(0) = 1.0;
  const LogisticOracle o(one_sample(1.0, e1));
  const Eigen::VectorXd g = o.local_gradient(0, Eigen::VectorXd::Zero(3));
  EXPECT_NEAR(g(0), -0.5, 1e-15);
  EXPECT_EQ(g(1), 0.0);
  EXPECT_NEAR(o.local_value(0, Eigen::VectorXd::Zero(3)), std::log(2.0), 1e-15);
}

TEST(Logistic, StableForHugeMargins) {
  Eigen::VectorXd a = Eigen::VectorXd::Ones(2);
  const LogisticOracle o(one_sample(1.0, a));
  for (double s : {1e4, -1e4, 5e3, -5e3}) {
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(2, s / 2.0);
    EXPECT_TRUE(std::isfinite(o.local_value(0, x)));
    EXPECT_TRUE(o.local_gradient(0, x).allFinite());
  }
  EXPECT_NEAR(log1p_exp(-1e4), 0.0, 1e-300);
  EXPECT_EQ(log1p_exp(1e4), 1e4);
  EXPECT_EQ(sigmoid(-1e4), 0.0);
  EXPECT_EQ(sigmoid(1e4), 1.0);
}

TEST(Logistic, ConstantsOnSyntheticData) {
  std::istringstream in(rgta::testing::synthetic_libsvm(400, 30, 5, 9));
  const Dataset data = parse_libsvm(in, 30);
  const LogisticOracle o(make_logistic_problem(data, partition(data, 4)));
  EXPECT_LE(o.strong_convexity(), o.lipschitz());
  EXPECT_NEAR(o.strong_convexity(), 2.0 / 100.0, 1e-15);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 100; ++t) {
    Eigen::VectorXd x(30), y(30);
    for (int j = 0; j < 30; ++j) {
      x(j) = nd(rng);
      y(j) = nd(rng);
    }
    EXPECT_LE((o.local_gradient(t % 4, x) - o.local_gradient(t % 4, y)).norm(),
              o.lipschitz() * (x - y).norm() * (1 + 1e-12));
    const Eigen::VectorXd g = o.local_gradient(t % 4, x);
    const Eigen::VectorXd fd = rgta::testing::fd_gradient(o, t % 4, x, 1e-6);
    EXPECT_LE((g - fd).norm() / g.norm(), 1e-5);
  }
}

TEST(Logistic, SampleCountsSumToDataset) {
  std::istringstream in(rgta::testing::synthetic_libsvm(103, 12, 3, 1));
  const Dataset data = parse_libsvm(in);
  const auto problem = make_logistic_problem(data, partition(data, 16));
  std::size_t total = 0;
  for (int i = 0; i < 16; ++i) total += problem.samples(i);
  EXPECT_EQ(total, 103u);
}

TEST(Optimum, ScalarQuadratic) {
  const QuadraticOracle o(diagonal_quadratic({{2.0}}, {{-4.0}}));
  const Eigen::VectorXd x = centralized_optimum(o);
  EXPECT_NEAR(x(0), 2.0, 1e-12);
}

TEST(Optimum, ReturnsImmediatelyAtOptimum) {
  const QuadraticOracle o(diagonal_quadratic({{2.0}}, {{-4.0}}));
  const Eigen::VectorXd x = centralized_optimum(o, Eigen::VectorXd::Constant(1, 2.0), {1e-12, 0});
  EXPECT_EQ(x(0), 2.0);
}

TEST(Optimum, ReportsNonConvergence) {
  const QuadraticOracle o(generate_quadratic(4, 5, 1e4, 1));
  EXPECT_THROW(centralized_optimum(o, {1e-12, 10}), NonConvergenceError);
  EXPECT_THROW(centralized_optimum(o, {0.0, 10}), std::invalid_argument);
}

TEST(Optimum, LogisticResidualReevaluated) {
  std::istringstream in(rgta::testing::synthetic_libsvm(500, 20, 4, 2));
  const Dataset data = parse_libsvm(in);
  const LogisticOracle o(make_logistic_problem(data, partition(data, 4)));
  const Eigen::VectorXd x = centralized_optimum(o, {1e-10, 100'000'000});
  Eigen::VectorXd g = Eigen::VectorXd::Zero(o.dim());
  for (int i = 0; i < 4; ++i) g += rgta::testing::fd_gradient(o, i, x, 1e-6) / 4.0;
  EXPECT_LE(o.global_gradient(x).norm(), 1e-10);
  EXPECT_LE(g.norm(), 1e-7);  // finite differences only resolve to ~h^2
}

TEST(VectorFile, RoundTripIsExact) {
  const auto path = std::filesystem::temp_directory_path() / "rgta_vector_roundtrip.txt";
  Eigen::VectorXd v(4);
  v << 0.1, -1.0 / 3.0, 1e-300, 12345.678901234567;
  write_vector(path, v);
  EXPECT_EQ(read_vector(path), v);
  std::filesystem::remove(path);
}
