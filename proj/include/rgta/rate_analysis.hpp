#pragma once

#include <array>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "rgta/method.hpp"

namespace rgta {

struct RateParams {
  double mu = 1.0;
  double L = 1.0;
  int n = 1;
  std::array<double, 4> beta{0.0, 0.0, 0.0, 0.0};
  // ||Z_1^{n_c} - I||_2; 2 is always a valid bound.
  double norm_z1_minus_i = 2.0;
  double p = 1.0;
  int n_c = 1;
  double alpha = 0.0;

  double kappa() const { return L / mu; }
  // beta_i^{n_c}, slot i in 1..4
  double beta_pow(int i) const;
  // p beta_i^{n_c} + 1 - p
  double eta(int i) const;
  // 1 - eta_i, computed without cancellation
  double one_minus_eta(int i) const;

  // Throws std::invalid_argument on negative or out-of-range values.
  void validate() const;
};

struct RateMatrix {
  Eigen::Matrix3d A;
  RateParams params;
  Method method = Method::kCustom;
};

// Rate matrix for arbitrary (W1..W4), described by their beta_i.
RateMatrix build_A_general(const RateParams& params);

// Specialized matrices for RGTA-1/2/3 with ||Z_1^{n_c} - I|| bounded by 2.
RateMatrix build_A_method(Method method, double mu, double L, int n, double beta, double p, int n_c,
                          double alpha);

// beta_i for each method: slots holding W get beta, identity slots get 1.
std::array<double, 4> method_betas(Method method, double beta);

// Largest eigenvalue modulus of a nonnegative 3x3 matrix, from the roots of
// its characteristic cubic, polished by Newton steps in extended precision.
// Clustered roots are resolved through the derivatives of the cubic.
double spectral_radius(const Eigen::Matrix3d& A);

// Power iteration on A + I; independent of the cubic solver.
double spectral_radius_power(const Eigen::Matrix3d& A, double tolerance = 1e-14, int max_iterations = 1'000'000);

// Largest admissible step size for 0 < p < 1. Returns 0 when beta_1 or
// beta_3 equals 1 (no admissible step). params.alpha is ignored.
double step_bound_general(const RateParams& params);

// Per-method closed forms in (eta, beta^{n_c}, kappa, p).
double step_bound_method(Method method, double mu, double L, double beta, double p, int n_c);

// lambda_u >= rho(A) for alpha <= 1/L and 0 < p < 1.
double rate_upper_bound(const RateParams& params);

// Per-method simplified bounds; valid for 0 < p <= 1 and alpha <= 1/L.
double rate_upper_bound_method(Method method, double mu, double L, double beta, double p, int n_c,
                               double alpha);

struct ComplexityPoint {
  Method method = Method::kRgta3;
  double beta = 0.0;
  double p = 1.0;
  int n_c = 1;
  double alpha_star = 0.0;
  double rho = 1.0;
  double comp = 0.0;  // +inf when rho >= 1
  double comm = 0.0;
  double epsilon = 0.0;

  bool feasible() const { return rho < 1.0; }
};

// comp = log(1/eps)/(1 - rho), comm = p n_c comp; both +inf when rho >= 1.
ComplexityPoint complexity_from_rho(double rho, double p, int n_c, double epsilon);

// Geometric grid 2^{-s}/L for s = 0, 1/k, 2/k, ..., octaves (k points per
// octave). Every grid value is <= 1/L. Ascending order.
std::vector<double> alpha_grid(double L, int octaves = 30, int points_per_octave = 10);

// Minimizes spectral_radius(build_A_method) over the grid; ties go to the
// smallest alpha.
ComplexityPoint complexity_point(Method method, double mu, double L, int n, double beta, double p, int n_c,
                                 double epsilon, const std::vector<double>& grid);

struct SweepSpec {
  std::vector<Method> methods{Method::kRgta1, Method::kRgta2, Method::kRgta3};
  double mu = 10.0;
  double L = 1e5;
  int n = 16;
  std::vector<double> betas;
  std::vector<double> p_grid{1.0};
  std::vector<int> nc_grid{1};
  double epsilon = 0.36787944117144233;
  std::vector<double> grid;  // alpha grid; empty -> alpha_grid(L)
};

// One point per (beta, method, n_c, p) in that nesting order. Cells are
// evaluated in parallel when threads > 1; the output order is fixed.
std::vector<ComplexityPoint> sweep(const SweepSpec& spec, int threads = 1);

inline constexpr const char* kSweepHeader = "method,beta,p,n_c,alpha_star,rho,comp,comm,epsilon";

// Infeasible cells print comp and comm as the literal inf.
void write_sweep_csv(std::ostream& out, const std::vector<ComplexityPoint>& points);

}  // namespace rgta
