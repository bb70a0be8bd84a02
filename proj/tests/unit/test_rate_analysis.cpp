#include <cmath>
#include <random>
#include <sstream>

#include <boost/multiprecision/cpp_dec_float.hpp>
#include <gtest/gtest.h>

#include "rgta/rate_analysis.hpp"
#include "support.hpp"

using namespace rgta;
using rgta::testing::dense_spectral_radius;

namespace {

using Big = boost::multiprecision::cpp_dec_float_50;

const Method kMethods[] = {Method::kRgta1, Method::kRgta2, Method::kRgta3};

// Step bound evaluated term by term in 50-digit decimal arithmetic, using the
// plain sqrt(1 + x) - 1 form.
double step_bound_bignum(const RateParams& r) {
  const Big L = r.L, mu = r.mu, p = r.p, kappa = L / mu;
  auto eta = [&](int i) { return p * boost::multiprecision::pow(Big(r.beta[i - 1]), r.n_c) + (1 - p); };
  const Big e1 = eta(1), e2 = eta(2), e3 = eta(3), e4 = eta(4);
  const Big b4 = boost::multiprecision::pow(Big(r.beta[3]), r.n_c);
  const Big N = e4 * (1 - e1) + 2 * e2 * p * b4;
  const Big root = sqrt(1 + 4 * (1 - e1) * (1 - e3) * e2 * e4 * (kappa + 1) / (N * N));
  const Big third = N / (2 * e2 * e4 * kappa * (L + mu)) * (root - 1);
  Big out = 1 / L;
  if ((1 - e3) / (L * e4) < out) out = (1 - e3) / (L * e4);
  if (third < out) out = third;
  return out.convert_to<double>();
}

struct Sampler {
  std::mt19937_64 rng;
  explicit Sampler(std::uint64_t seed) : rng(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

  RateParams params() {
    RateParams r;
    r.mu = log_uniform(1e-2, 10.0);
    r.L = r.mu * log_uniform(1.0, 1e5);
    r.n = integer(1, 64);
    for (double& b : r.beta) b = uniform(0.0, 0.999);
    r.norm_z1_minus_i = uniform(0.0, 2.0);
    r.p = uniform(0.01, 0.99);
    r.n_c = integer(1, 20);
    r.alpha = log_uniform(1e-9, 1.0) / r.L;
    return r;
  }
};

}  // namespace

TEST(BuildA, GeneralExample) {
  RateParams r;
  r.mu = 10;
  r.L = 1e5;
  r.n = 16;
  r.beta = {0.9, 0.9, 0.9, 0.9};
  r.p = 0.5;
  r.n_c = 1;
  r.alpha = 1e-6;
  const Eigen::Matrix3d A = build_A_general(r).A;
  EXPECT_NEAR(r.eta(1), 0.95, 1e-15);
  EXPECT_NEAR(A(0, 0), 0.99999, 1e-15);
  EXPECT_NEAR(A(0, 1), 0.025, 1e-15);
  EXPECT_EQ(A(0, 2), 0.0);
  EXPECT_NEAR(A(1, 1), 0.95, 1e-15);
  EXPECT_NEAR(A(1, 2), 9.5e-7, 1e-20);
  EXPECT_NEAR(A(2, 0), 3.8e4, 1e-9);
  EXPECT_NEAR(A(2, 1), 9.95e4, 1e-9);
  EXPECT_NEAR(A(2, 2), 0.95 + 0.095, 1e-14);
}

TEST(BuildA, ZeroStepLimit) {
  RateParams r;
  r.mu = 1;
  r.L = 4;
  r.n = 9;
  r.beta = {0.5, 0.3, 0.7, 0.4};
  r.p = 0.6;
  r.n_c = 2;
  r.alpha = 0.0;
  const Eigen::Matrix3d A = build_A_general(r).A;
  Eigen::Matrix3d expected = Eigen::Matrix3d::Zero();
  expected(0, 0) = 1.0;
  expected(1, 1) = r.eta(1);
  expected(2, 1) = 0.6 * 0.16 * 4 * 2;
  expected(2, 2) = r.eta(3);
  EXPECT_TRUE(A.isApprox(expected, 1e-14));
}

TEST(BuildA, GeneralReducesToMethodMatrices) {
  Sampler s(3);
  for (int t = 0; t < 200; ++t) {
    const double beta = s.uniform(0, 1), p = s.uniform(0.01, 1.0), L = s.log_uniform(1, 1e5);
    const int n_c = s.integer(1, 10), n = s.integer(1, 30);
    const double alpha = s.uniform(0, 1) / L;
    for (Method m : kMethods) {
      const RateMatrix a = build_A_method(m, 1.0, L, n, beta, p, n_c, alpha);
      RateParams r{1.0, L, n, method_betas(m, beta), 2.0, p, n_c, alpha};
      const Eigen::Matrix3d g = build_A_general(r).A;
      // RGTA-1/2 rows 3 carry p beta_4^{n_c} with beta_4 = 1; the printed method
      // matrices use 2p, identical to the general form.
      EXPECT_LE((a.A - g).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, g.cwiseAbs().maxCoeff()))
          << to_string(m);
      EXPECT_EQ(a.params.beta, method_betas(m, beta));
    }
  }
}

TEST(BuildA, PrintedEntries) {
  const double alpha = 1e-3, L = 10.0, beta = 0.5, p = 1.0;
  const RateMatrix a1 = build_A_method(Method::kRgta1, 1.0, L, 4, beta, p, 1, alpha);
  EXPECT_EQ(a1.A(1, 1), 0.5);
  EXPECT_EQ(a1.A(1, 2), alpha);
  EXPECT_NEAR(a1.A(2, 0), 2 * alpha * L * L, 1e-15);
  EXPECT_NEAR(a1.A(2, 1), L * (2 * p + alpha * L), 1e-13);
  const RateMatrix a3 = build_A_method(Method::kRgta3, 10, 1e5, 16, 0.0, 1.0, 1, 1e-6);
  EXPECT_EQ(a3.A.row(1), Eigen::RowVector3d::Zero());
  EXPECT_EQ(a3.A.row(2), Eigen::RowVector3d::Zero());
  EXPECT_NEAR(spectral_radius(a3.A), 1 - 1e-5, 1e-15);
}

TEST(BuildA, EntrywiseMethodOrdering) {
  Sampler s(4);
  for (int t = 0; t < 10000; ++t) {
    const double beta = s.uniform(0, 1), p = s.uniform(0.001, 1.0), mu = s.log_uniform(1e-2, 10);
    const double L = mu * s.log_uniform(1, 1e5);
    const int n_c = s.integer(1, 50), n = s.integer(1, 64);
    const double alpha = s.uniform(0, 1) / L;
    const auto a1 = build_A_method(Method::kRgta1, mu, L, n, beta, p, n_c, alpha).A;
    const auto a2 = build_A_method(Method::kRgta2, mu, L, n, beta, p, n_c, alpha).A;
    const auto a3 = build_A_method(Method::kRgta3, mu, L, n, beta, p, n_c, alpha).A;
    ASSERT_TRUE((a3.array() <= a2.array()).all());
    ASSERT_TRUE((a2.array() <= a1.array()).all());
    ASSERT_TRUE((a3.array() >= 0.0).all());
  }
}

TEST(BuildA, RejectsBadInput) {
  EXPECT_THROW(build_A_method(Method::kGd, 1, 2, 4, 0.5, 0.5, 1, 0.1), std::invalid_argument);
  EXPECT_THROW(build_A_method(Method::kRgta1, 1, 2, 4, 1.5, 0.5, 1, 0.1), std::invalid_argument);
  EXPECT_THROW(build_A_method(Method::kRgta1, 1, 2, 4, 0.5, 0.0, 1, 0.1), std::invalid_argument);
  EXPECT_THROW(build_A_method(Method::kRgta1, 1, 2, 4, 0.5, 0.5, 0, 0.1), std::invalid_argument);
  EXPECT_THROW(build_A_method(Method::kRgta1, 1, 2, 4, 0.5, 0.5, 1, -0.1), std::invalid_argument);
  EXPECT_THROW(build_A_method(Method::kRgta1, 3, 2, 4, 0.5, 0.5, 1, 0.1), std::invalid_argument);
  RateParams r;
  r.beta[2] = -0.1;
  EXPECT_THROW(build_A_general(r), std::invalid_argument);
}

TEST(SpectralRadius, Examples) {
  EXPECT_NEAR(spectral_radius(Eigen::Matrix3d::Identity()), 1.0, 1e-12);
  EXPECT_NEAR(spectral_radius(Eigen::Vector3d(0.5, 0.25, 0.1).asDiagonal()), 0.5, 1e-12);
  EXPECT_EQ(spectral_radius(Eigen::Matrix3d::Zero()), 0.0);
  const auto a = build_A_method(Method::kRgta3, 10, 1e5, 16, 0.9, 1.0, 1, std::exp2(-20.0)).A;
  EXPECT_NEAR(spectral_radius(a), dense_spectral_radius(a), 1e-10);
  Eigen::Matrix3d bad = Eigen::Matrix3d::Identity();
  bad(0, 1) = -1;
  EXPECT_THROW(spectral_radius(bad), std::invalid_argument);
  bad(0, 1) = std::nan("");
  EXPECT_THROW(spectral_radius(bad), std::invalid_argument);
}

TEST(SpectralRadius, AgreesWithDenseSolverAndPowerIteration) {
  Sampler s(5);
  for (int t = 0; t < 5000; ++t) {
    const Method m = kMethods[t % 3];
    const double beta = s.uniform(0, 1), p = s.uniform(0.01, 1.0), L = 1e5;
    const double alpha = s.log_uniform(1e-9, 1.0) / L;
    const auto a = build_A_method(m, 10.0, L, 16, beta, p, s.integer(1, 50), alpha).A;
    const double rho = spectral_radius(a);
    ASSERT_NEAR(rho, dense_spectral_radius(a), 1e-9 * std::max(1.0, rho));
    if (p < 1.0) {
      ASSERT_NEAR(rho, spectral_radius_power(a), 1e-7 * std::max(1.0, rho));
    }
  }
}

TEST(SpectralRadius, MonotoneInCommunicationSteps) {
  Sampler s(6);
  for (int t = 0; t < 2000; ++t) {
    RateParams r = s.params();
    r.n_c = s.integer(1, 30);
    const double a = spectral_radius(build_A_general(r).A);
    r.n_c += 1;
    const double b = spectral_radius(build_A_general(r).A);
    // norm_z1_minus_i is held fixed, as in the bound-form matrix
    ASSERT_LE(b, a * (1 + 1e-12) + 1e-14);
  }
}

TEST(SpectralRadius, MethodOrderingAtEqualStep) {
  Sampler s(7);
  for (int t = 0; t < 5000; ++t) {
    const double beta = s.uniform(0, 1), p = s.uniform(0.01, 1.0), L = 1e5;
    const int n_c = s.integer(1, 50);
    const double alpha = s.log_uniform(1e-9, 1.0) / L;
    const double r1 = spectral_radius(build_A_method(Method::kRgta1, 10, L, 16, beta, p, n_c, alpha).A);
    const double r2 = spectral_radius(build_A_method(Method::kRgta2, 10, L, 16, beta, p, n_c, alpha).A);
    const double r3 = spectral_radius(build_A_method(Method::kRgta3, 10, L, 16, beta, p, n_c, alpha).A);
    ASSERT_GE(r1, r2 - 1e-12);
    ASSERT_GE(r2, r3 - 1e-12);
  }
}

TEST(StepBound, MatchesBignumEvaluation) {
  Sampler s(8);
  for (int t = 0; t < 2000; ++t) {
    const RateParams r = s.params();
    const double ours = step_bound_general(r);
    const double oracle = step_bound_bignum(r);
    ASSERT_NEAR(ours, oracle, 1e-10 * oracle) << "trial " << t;
    ASSERT_LE(ours, 1.0 / r.L);
  }
}

TEST(StepBound, AllZeroBetasUnitCondition) {
  RateParams r;
  r.mu = r.L = 1.0;
  r.p = 0.5;
  r.beta = {0, 0, 0, 0};
  EXPECT_NEAR(step_bound_general(r), step_bound_bignum(r), 1e-15);
  // eta_i = 1/2, N = 1/4, radicand 1 + 8 = 9, third term = (1/4) / (1/2 * 2) * 2
  EXPECT_NEAR(step_bound_general(r), 0.5, 1e-15);
}

TEST(StepBound, DegenerateCases) {
  RateParams r;
  r.mu = 1;
  r.L = 10;
  r.p = 0.5;
  r.beta = {0.5, 0.5, 1.0, 0.5};
  EXPECT_EQ(step_bound_general(r), 0.0);
  r.beta = {0.5, 0.5, 0.999999, 0.5};
  r.p = 1e-6;
  EXPECT_LT(step_bound_general(r), 1e-10);
  r.p = 1.0;
  EXPECT_THROW(step_bound_general(r), std::invalid_argument);
  EXPECT_THROW(step_bound_method(Method::kRgta1, 1, 10, 0.5, 1.0, 1), std::invalid_argument);
  for (Method m : kMethods) EXPECT_EQ(step_bound_method(m, 1, 10, 1.0, 0.5, 3), 0.0);
}

TEST(StepBound, MethodFormsMatchGeneralSubstitution) {
  Sampler s(9);
  for (int t = 0; t < 3000; ++t) {
    const double beta = s.uniform(0, 0.999), p = s.uniform(0.01, 0.99), mu = s.log_uniform(0.1, 10);
    const double L = mu * s.log_uniform(1, 1e5);
    const int n_c = s.integer(1, 30);
    for (Method m : kMethods) {
      const double method_bound = step_bound_method(m, mu, L, beta, p, n_c);
      const double general = step_bound_general(RateParams{mu, L, 1, method_betas(m, beta), 2.0, p, n_c, 0.0});
      ASSERT_NEAR(method_bound, general, 1e-12 * general + 1e-300) << to_string(m);
    }
  }
}

TEST(StepBound, MethodOrderingAndGrowthInCommunication) {
  const double mu = 10, L = 1e5;
  const double b1 = step_bound_method(Method::kRgta1, mu, L, 0.9, 0.5, 1);
  const double b2 = step_bound_method(Method::kRgta2, mu, L, 0.9, 0.5, 1);
  const double b3 = step_bound_method(Method::kRgta3, mu, L, 0.9, 0.5, 1);
  EXPECT_LE(b1, b2);
  EXPECT_LE(b2, b3);
  for (Method m : kMethods) {
    double previous = 0.0;
    for (int n_c = 1; n_c <= 200; ++n_c) {
      const double b = step_bound_method(m, mu, L, 0.9, 0.5, n_c);
      EXPECT_GE(b, previous * (1 - 1e-12));
      previous = b;
    }
  }
}

TEST(StepBound, SufficiencyOnRandomTuples) {
  Sampler s(10);
  for (int t = 0; t < 10000; ++t) {
    const Method m = kMethods[t % 3];
    const double beta = s.uniform(0, 0.999), p = s.uniform(0.01, 0.99), mu = s.log_uniform(0.1, 10);
    const double L = mu * s.log_uniform(1, 1e5);
    const int n_c = s.integer(1, 30), n = s.integer(1, 64);
    const double bound = step_bound_method(m, mu, L, beta, p, n_c);
    const double alpha = bound * s.uniform(0.0, 1.0);
    if (alpha <= 0.0) continue;
    ASSERT_LT(spectral_radius(build_A_method(m, mu, L, n, beta, p, n_c, alpha).A), 1.0);
  }
}

TEST(RateBound, DominatesSpectralRadius) {
  Sampler s(11);
  for (int t = 0; t < 10000; ++t) {
    const RateParams r = s.params();
    ASSERT_GE(rate_upper_bound(r), spectral_radius(build_A_general(r).A) * (1 - 1e-12)) << "trial " << t;
  }
}

TEST(RateBound, ZeroStepLimitIsAtLeastOne) {
  RateParams r;
  r.mu = 1;
  r.L = 10;
  r.p = 0.3;
  r.beta = {0.2, 0.4, 0.6, 0.8};
  r.alpha = 0.0;
  EXPECT_GE(rate_upper_bound(r), 1.0);
  EXPECT_NEAR(rate_upper_bound(r), std::max({1.0, r.eta(1), r.eta(3)}), 1e-15);
  r.alpha = 1.0;
  EXPECT_THROW(rate_upper_bound(r), std::invalid_argument);
}

TEST(RateBound, MethodFormsDominateExactRadius) {
  Sampler s(12);
  for (int t = 0; t < 10000; ++t) {
    const Method m = kMethods[t % 3];
    const double beta = s.uniform(0, 1), p = s.uniform(0.01, 1.0), mu = s.log_uniform(0.1, 10);
    const double L = mu * s.log_uniform(1, 1e5);
    const int n_c = s.integer(1, 30), n = s.integer(1, 64);
    const double alpha = s.uniform(0, 1) / L;
    const double exact = spectral_radius(build_A_method(m, mu, L, n, beta, p, n_c, alpha).A);
    ASSERT_GE(rate_upper_bound_method(m, mu, L, beta, p, n_c, alpha), exact * (1 - 1e-12));
  }
}

TEST(Complexity, FromRho) {
  const ComplexityPoint c = complexity_from_rho(0.9, 0.5, 4, std::exp(-1.0));
  EXPECT_NEAR(c.comp, 10.0, 1e-12);
  EXPECT_NEAR(c.comm, 20.0, 1e-12);
  EXPECT_TRUE(c.feasible());
  const ComplexityPoint inf = complexity_from_rho(1.0, 0.5, 4, 0.1);
  EXPECT_TRUE(std::isinf(inf.comp));
  EXPECT_TRUE(std::isinf(inf.comm));
  EXPECT_THROW(complexity_from_rho(0.5, 1, 1, 1.0), std::invalid_argument);
  EXPECT_THROW(complexity_from_rho(0.5, 1, 1, 0.0), std::invalid_argument);
}

TEST(Complexity, AlphaGridShape) {
  const auto g = alpha_grid(1e5, 30, 10);
  ASSERT_EQ(g.size(), 301u);
  EXPECT_DOUBLE_EQ(g.back(), 1e-5);
  EXPECT_DOUBLE_EQ(g.front(), std::exp2(-30.0) * 1e-5);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_GT(g[i], g[i - 1]);
  for (double a : g) EXPECT_LE(a, 1e-5);
}

TEST(Complexity, PointIsGridArgmin) {
  const auto grid = alpha_grid(1e5, 20, 4);
  for (Method m : kMethods) {
    const ComplexityPoint c = complexity_point(m, 10, 1e5, 16, 0.8, 0.4, 3, std::exp(-1.0), grid);
    double best = 2.0;
    double best_alpha = 0.0;
    for (double a : grid) {
      const double rho = dense_spectral_radius(build_A_method(m, 10, 1e5, 16, 0.8, 0.4, 3, a).A);
      if (rho < best - 1e-13) {
        best = rho;
        best_alpha = a;
      }
    }
    EXPECT_NEAR(c.rho, best, 1e-10);
    EXPECT_EQ(c.alpha_star, best_alpha);
    EXPECT_NEAR(c.comm, c.p * c.n_c * c.comp, 1e-12 * c.comm);
  }
  EXPECT_THROW(complexity_point(Method::kRgta1, 10, 1e5, 16, 0.8, 0.4, 3, 0.5, {}), std::invalid_argument);
  EXPECT_THROW(complexity_point(Method::kRgta1, 10, 1e5, 16, 0.8, 0.4, 3, 0.5, {1.0}), std::invalid_argument);
}

TEST(Complexity, InfeasibleCellIsMarked) {
  // beta = 1 and p = 1 leave eta = 1, so no step size contracts
  const ComplexityPoint c = complexity_point(Method::kRgta1, 1, 1, 1, 1.0, 1.0, 1, 0.5, {1e-3, 1e-2});
  EXPECT_FALSE(c.feasible());
  EXPECT_TRUE(std::isinf(c.comp));
  EXPECT_TRUE(std::isinf(c.comm));
}

TEST(Sweep, OrderAndSingleCell) {
  SweepSpec spec;
  spec.betas = {0.6, 0.9};
  spec.nc_grid = {1, 2};
  spec.p_grid = {0.5, 1.0};
  spec.grid = alpha_grid(spec.L, 10, 2);
  const auto one = sweep(spec, 1);
  const auto many = sweep(spec, 3);
  ASSERT_EQ(one.size(), 2u * 3u * 2u * 2u);
  std::size_t i = 0;
  for (double beta : spec.betas)
    for (Method m : spec.methods)
      for (int nc : spec.nc_grid)
        for (double p : spec.p_grid) {
          EXPECT_EQ(one[i].method, m);
          EXPECT_EQ(one[i].beta, beta);
          EXPECT_EQ(one[i].n_c, nc);
          EXPECT_EQ(one[i].p, p);
          EXPECT_EQ(one[i].rho, many[i].rho);
          ++i;
        }
  SweepSpec single = spec;
  single.betas = {0.9};
  single.methods = {Method::kRgta2};
  single.nc_grid = {2};
  single.p_grid = {0.5};
  const auto s = sweep(single);
  ASSERT_EQ(s.size(), 1u);
  const auto direct = complexity_point(Method::kRgta2, 10, 1e5, 16, 0.9, 0.5, 2, spec.epsilon, spec.grid);
  EXPECT_EQ(s[0].rho, direct.rho);
  EXPECT_EQ(s[0].alpha_star, direct.alpha_star);
}

TEST(Sweep, TunedComplexityOrderingAndMonotonicity) {
  SweepSpec spec;
  spec.betas = {0.6, 0.8, 0.9};
  spec.nc_grid = {1, 2, 3, 5, 8, 13, 21, 34, 50};
  spec.grid = alpha_grid(spec.L, 30, 4);
  const auto pts = sweep(spec);
  const std::size_t per_method = spec.nc_grid.size();
  for (std::size_t b = 0; b < spec.betas.size(); ++b) {
    for (std::size_t m = 0; m < 3; ++m) {
      for (std::size_t j = 1; j < per_method; ++j) {
        const auto& prev = pts[(b * 3 + m) * per_method + j - 1];
        const auto& cur = pts[(b * 3 + m) * per_method + j];
        EXPECT_LE(cur.comp, prev.comp * (1 + 1e-12));
      }
    }
    for (std::size_t j = 0; j < per_method; ++j) {
      const double c1 = pts[(b * 3 + 0) * per_method + j].comp;
      const double c2 = pts[(b * 3 + 1) * per_method + j].comp;
      const double c3 = pts[(b * 3 + 2) * per_method + j].comp;
      EXPECT_GE(c1, c2 * (1 - 1e-12));
      EXPECT_GE(c2, c3 * (1 - 1e-12));
    }
  }
}

TEST(Sweep, CsvUsesInfLiteral) {
  std::vector<ComplexityPoint> pts{complexity_from_rho(0.5, 1.0, 1, 0.5), complexity_from_rho(1.5, 1.0, 2, 0.5)};
  std::ostringstream out;
  write_sweep_csv(out, pts);
  const std::string text = out.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), kSweepHeader);
  EXPECT_NE(text.find(",inf,inf,"), std::string::npos);
}
