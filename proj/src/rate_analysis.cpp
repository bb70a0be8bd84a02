#include "rgta/rate_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "rgta/parallel.hpp"

namespace rgta {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const char* message) {
  if (!ok) throw std::invalid_argument(message);
}

void check_common(double mu, double L, double beta, double p, int n_c) {
  require(mu > 0.0 && std::isfinite(mu), "mu must be positive");
  require(L >= mu && std::isfinite(L), "L must be finite and >= mu");
  require(beta >= 0.0 && beta <= 1.0, "beta must lie in [0, 1]");
  require(p > 0.0 && p <= 1.0, "p must lie in (0, 1]");
  require(n_c >= 1, "n_c must be >= 1");
}

// sqrt(1 + x) - 1 without cancellation for small x
double sqrt1p_minus1(double x) { return x / (std::sqrt(1.0 + x) + 1.0); }

// det(lambda I - A), expanded by cofactors in extended precision
long double char_poly(const Eigen::Matrix3d& A, long double lambda) {
  const long double a = lambda - A(0, 0), b = -A(0, 1), c = -A(0, 2);
  const long double d = -A(1, 0), e = lambda - A(1, 1), f = -A(1, 2);
  const long double g = -A(2, 0), h = -A(2, 1), i = lambda - A(2, 2);
  return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g);
}

// derivative of det(lambda I - A): sum of the principal 2x2 minors of (lambda I - A)
long double char_poly_derivative(const Eigen::Matrix3d& A, long double lambda) {
  const long double a = lambda - A(0, 0), e = lambda - A(1, 1), i = lambda - A(2, 2);
  return (e * i - static_cast<long double>(A(1, 2)) * A(2, 1)) +
         (a * i - static_cast<long double>(A(0, 2)) * A(2, 0)) +
         (a * e - static_cast<long double>(A(0, 1)) * A(1, 0));
}

// 1 - beta^{n_c} without cancellation
double one_minus_pow(double beta, int n_c) {
  if (beta <= 0.0) return 1.0;
  if (beta >= 1.0) return 0.0;
  return -std::expm1(n_c * std::log(beta));
}

}  // namespace

double RateParams::beta_pow(int i) const {
  require(i >= 1 && i <= 4, "slot index must be in 1..4");
  return std::pow(beta[i - 1], n_c);
}

double RateParams::eta(int i) const { return p * beta_pow(i) + (1.0 - p); }

double RateParams::one_minus_eta(int i) const {
  require(i >= 1 && i <= 4, "slot index must be in 1..4");
  return p * one_minus_pow(beta[i - 1], n_c);
}

void RateParams::validate() const {
  require(mu > 0.0 && std::isfinite(mu), "mu must be positive");
  require(L >= mu && std::isfinite(L), "L must be finite and >= mu");
  require(n >= 1, "n must be >= 1");
  for (double b : beta) require(b >= 0.0 && b <= 1.0, "beta_i must lie in [0, 1]");
  require(norm_z1_minus_i >= 0.0 && norm_z1_minus_i <= 2.0 + 1e-12, "||Z1 - I|| must lie in [0, 2]");
  require(p > 0.0 && p <= 1.0, "p must lie in (0, 1]");
  require(n_c >= 1, "n_c must be >= 1");
  require(alpha >= 0.0 && std::isfinite(alpha), "alpha must be nonnegative");
}

RateMatrix build_A_general(const RateParams& params) {
  params.validate();
  const double a = params.alpha, L = params.L, mu = params.mu, p = params.p;
  const double sn = std::sqrt(static_cast<double>(params.n));
  const double e1 = params.eta(1), e2 = params.eta(2), e3 = params.eta(3), e4 = params.eta(4);
  RateMatrix out;
  out.params = params;
  out.method = Method::kCustom;
  out.A << 1.0 - a * mu, a * L / sn, 0.0,
           0.0, e1, a * e2,
           sn * e4 * a * L * L, p * params.beta_pow(4) * L * params.norm_z1_minus_i + e4 * a * L * L,
           e3 + e4 * a * L;
  return out;
}

std::array<double, 4> method_betas(Method method, double beta) {
  switch (method) {
    case Method::kRgta1: return {beta, 1.0, beta, 1.0};
    case Method::kRgta2: return {beta, beta, beta, 1.0};
    case Method::kRgta3: return {beta, beta, beta, beta};
    default: throw std::invalid_argument("no rate matrix for method " + to_string(method));
  }
}

RateMatrix build_A_method(Method method, double mu, double L, int n, double beta, double p, int n_c,
                          double alpha) {
  check_common(mu, L, beta, p, n_c);
  require(n >= 1, "n must be >= 1");
  require(alpha >= 0.0 && std::isfinite(alpha), "alpha must be nonnegative");

  RateMatrix out;
  out.method = method;
  out.params = RateParams{mu, L, n, method_betas(method, beta), 2.0, p, n_c, alpha};
  const double b = std::pow(beta, n_c);
  const double eta = p * b + (1.0 - p);
  const double sn = std::sqrt(static_cast<double>(n));
  const double aL = alpha * L;
  out.A.row(0) << 1.0 - alpha * mu, aL / sn, 0.0;
  switch (method) {
    case Method::kRgta1:
      out.A.row(1) << 0.0, eta, alpha;
      out.A.row(2) << sn * alpha * L * L, L * (2.0 * p + aL), eta + aL;
      break;
    case Method::kRgta2:
      out.A.row(1) << 0.0, eta, alpha * eta;
      out.A.row(2) << sn * alpha * L * L, L * (2.0 * p + aL), eta + aL;
      break;
    case Method::kRgta3:
      out.A.row(1) << 0.0, eta, alpha * eta;
      out.A.row(2) << eta * sn * alpha * L * L, L * (2.0 * b * p + eta * aL), eta * (1.0 + aL);
      break;
    default:
      throw std::invalid_argument("no rate matrix for method " + to_string(method));
  }
  return out;
}

double spectral_radius(const Eigen::Matrix3d& A) {
  require(A.allFinite(), "spectral_radius: non-finite entry");
  require((A.array() >= 0.0).all(), "spectral_radius: matrix must be nonnegative");

  // lambda^3 + c2 lambda^2 + c1 lambda + c0
  const double c2 = -A.trace();
  const double c1 = A(0, 0) * A(1, 1) - A(0, 1) * A(1, 0) + A(0, 0) * A(2, 2) - A(0, 2) * A(2, 0) +
                    A(1, 1) * A(2, 2) - A(1, 2) * A(2, 1);
  const double c0 = -A.determinant();
  Eigen::Matrix3d companion;
  companion << 0.0, 0.0, -c0,
               1.0, 0.0, -c1,
               0.0, 1.0, -c2;
  const Eigen::EigenSolver<Eigen::Matrix3d> solver(companion, false);
  if (solver.info() != Eigen::Success) throw std::runtime_error("spectral_radius: eigen solver failed");
  const auto roots = solver.eigenvalues();

  // The Perron root is real, nonnegative and has the largest real part.
  int top = 0;
  for (int k = 1; k < 3; ++k) {
    if (roots[k].real() > roots[top].real()) top = k;
  }
  long double x = std::max(0.0, roots[top].real());
  long double fx = char_poly(A, x);
  for (int iter = 0; iter < 200 && fx != 0.0L; ++iter) {
    const long double dfx = char_poly_derivative(A, x);
    if (dfx == 0.0L) break;
    const long double next = x - fx / dfx;
    const long double fnext = char_poly(A, next);
    if (!(std::fabs(fnext) < std::fabs(fx))) break;
    x = next;
    fx = fnext;
  }

  // A multiple root splits into a cluster of companion roots. It is also a
  // root of the derivative (double) or second derivative (triple).
  const double spread = 1e-4 * std::max(1.0, std::abs(roots[top]));
  int count = 0;
  double mean = 0.0;
  for (int k = 0; k < 3; ++k) {
    if (std::abs(roots[k] - roots[top]) <= spread) {
      mean += roots[k].real();
      ++count;
    }
  }
  mean /= count;
  if (count == 3) {
    const long double t = A.trace() / 3.0L;
    if (std::fabs(char_poly(A, t)) <= std::fabs(fx)) x = t;
  } else if (count == 2) {
    // stationary point of the cubic nearest the cluster
    const long double tr = A.trace();
    const long double c1 = static_cast<long double>(A(0, 0)) * A(1, 1) - static_cast<long double>(A(0, 1)) * A(1, 0) +
                           static_cast<long double>(A(0, 0)) * A(2, 2) - static_cast<long double>(A(0, 2)) * A(2, 0) +
                           static_cast<long double>(A(1, 1)) * A(2, 2) - static_cast<long double>(A(1, 2)) * A(2, 1);
    const long double disc = std::max(0.0L, tr * tr - 3.0L * c1);
    const long double s1 = (tr + std::sqrt(disc)) / 3.0L, s2 = (tr - std::sqrt(disc)) / 3.0L;
    const long double t = std::fabs(s1 - mean) <= std::fabs(s2 - mean) ? s1 : s2;
    if (std::fabs(char_poly(A, t)) <= std::fabs(fx)) x = t;
  }
  const double result = std::max(0.0, static_cast<double>(x));
  // guard against a Newton step wandering to another root
  if (std::abs(result - mean) > spread) return std::max(0.0, mean);
  return result;
}

double spectral_radius_power(const Eigen::Matrix3d& A, double tolerance, int max_iterations) {
  require(A.allFinite() && (A.array() >= 0.0).all(), "spectral_radius_power: matrix must be nonnegative");
  const Eigen::Matrix3d shifted = A + Eigen::Matrix3d::Identity();
  Eigen::Vector3d v = Eigen::Vector3d::Ones();
  double estimate = 0.0;
  for (int k = 0; k < max_iterations; ++k) {
    const Eigen::Vector3d w = shifted * v;
    const double next = w.norm() / v.norm();
    v = w / w.norm();
    if (std::abs(next - estimate) <= tolerance * next) {
      estimate = next;
      break;
    }
    estimate = next;
  }
  return estimate - 1.0;
}

double step_bound_general(const RateParams& params) {
  params.validate();
  require(params.p < 1.0, "step_bound_general requires p < 1");
  if (params.beta[0] >= 1.0 || params.beta[2] >= 1.0) return 0.0;

  const double L = params.L, mu = params.mu, kappa = params.kappa(), p = params.p;
  const double e2 = params.eta(2), e4 = params.eta(4);
  const double r1 = params.one_minus_eta(1), r3 = params.one_minus_eta(3);
  const double N = e4 * r1 + 2.0 * e2 * p * params.beta_pow(4);
  const double x = 4.0 * r1 * r3 * e2 * e4 * (kappa + 1.0) / (N * N);
  const double third = N / (2.0 * e2 * e4 * kappa * (L + mu)) * sqrt1p_minus1(x);
  return std::min({1.0 / L, r3 / (L * e4), third});
}

double step_bound_method(Method method, double mu, double L, double beta, double p, int n_c) {
  check_common(mu, L, beta, p, n_c);
  require(p < 1.0, "step_bound_method requires p < 1");
  const double kappa = L / mu;
  const double b = std::pow(beta, n_c);
  const double eta = p * b + (1.0 - p);
  const double r = one_minus_pow(beta, n_c);
  const double one_minus_eta = p * r;
  switch (method) {
    case Method::kRgta1: {
      const double q = r / (2.0 + r);
      const double third = p * (2.0 + r) / (2.0 * kappa * (L + mu)) * sqrt1p_minus1(4.0 * (kappa + 1.0) * q * q);
      return std::min(one_minus_eta / L, third);
    }
    case Method::kRgta2: {
      const double q = r / (2.0 * eta + r);
      const double third = p * (2.0 * eta + r) / (2.0 * kappa * eta * (L + mu)) *
                           sqrt1p_minus1(4.0 * eta * (kappa + 1.0) * q * q);
      return std::min(one_minus_eta / L, third);
    }
    case Method::kRgta3: {
      const double q = r / (1.0 + b);
      const double third = p * (1.0 + b) / (2.0 * kappa * eta * (L + mu)) * sqrt1p_minus1(4.0 * (kappa + 1.0) * q * q);
      return std::min({1.0 / L, one_minus_eta / (L * eta), third});
    }
    default:
      throw std::invalid_argument("no step bound for method " + to_string(method));
  }
}

double rate_upper_bound(const RateParams& params) {
  params.validate();
  require(params.p < 1.0, "rate_upper_bound requires p < 1");
  require(params.alpha <= 1.0 / params.L, "rate_upper_bound requires alpha <= 1/L");
  const double aL = params.alpha * params.L, p = params.p;
  const double e1 = params.eta(1), e2 = params.eta(2), e3 = params.eta(3), e4 = params.eta(4);
  const double diff = e1 - e3 - aL * e4;
  const double lambda_hat =
      0.5 * (e1 + e3 + aL * e4 + std::sqrt(diff * diff + 4.0 * e2 * e4 * aL * aL + 8.0 * p * aL * e2 * params.beta_pow(4)));
  return std::max(1.0 - params.alpha * params.mu / 2.0, lambda_hat + std::sqrt(2.0 * aL * params.kappa() * e2 * e4));
}

double rate_upper_bound_method(Method method, double mu, double L, double beta, double p, int n_c, double alpha) {
  check_common(mu, L, beta, p, n_c);
  require(alpha >= 0.0 && alpha <= 1.0 / L, "rate_upper_bound_method requires 0 <= alpha <= 1/L");
  const double kappa = L / mu;
  // at p = 1 eta reduces to beta^{n_c}
  const double eta = p * std::pow(beta, n_c) + (1.0 - p);
  const double s = std::sqrt(alpha * L);
  double second = 0.0;
  switch (method) {
    case Method::kRgta1: second = eta + s * (2.5 + std::sqrt(2.0 * kappa)); break;
    case Method::kRgta2: second = eta + s * (2.5 + std::sqrt(2.0 * kappa * eta)); break;
    case Method::kRgta3: second = eta * (1.0 + s * (2.5 + std::sqrt(2.0 * kappa))); break;
    default: throw std::invalid_argument("no rate bound for method " + to_string(method));
  }
  return std::max(1.0 - alpha * mu / 2.0, second);
}

ComplexityPoint complexity_from_rho(double rho, double p, int n_c, double epsilon) {
  require(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0, 1)");
  ComplexityPoint point;
  point.rho = rho;
  point.p = p;
  point.n_c = n_c;
  point.epsilon = epsilon;
  if (rho < 1.0) {
    point.comp = std::log(1.0 / epsilon) / (1.0 - rho);
    point.comm = p * n_c * point.comp;
  } else {
    point.comp = kInf;
    point.comm = kInf;
  }
  return point;
}

std::vector<double> alpha_grid(double L, int octaves, int points_per_octave) {
  require(L > 0.0 && std::isfinite(L), "L must be positive");
  require(octaves >= 0 && points_per_octave >= 1, "invalid alpha grid shape");
  const int count = octaves * points_per_octave + 1;
  std::vector<double> grid(static_cast<std::size_t>(count));
  for (int j = 0; j < count; ++j) {
    const double s = static_cast<double>(count - 1 - j) / points_per_octave;
    grid[static_cast<std::size_t>(j)] = std::exp2(-s) / L;
  }
  return grid;
}

ComplexityPoint complexity_point(Method method, double mu, double L, int n, double beta, double p, int n_c,
                                 double epsilon, const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("alpha grid is empty");
  double best_rho = kInf;
  double best_alpha = 0.0;
  for (double alpha : grid) {
    require(alpha > 0.0 && alpha <= 1.0 / L * (1.0 + 1e-12), "alpha grid must lie in (0, 1/L]");
    const double rho = spectral_radius(build_A_method(method, mu, L, n, beta, p, n_c, alpha).A);
    if (rho < best_rho || (rho == best_rho && alpha < best_alpha)) {
      best_rho = rho;
      best_alpha = alpha;
    }
  }
  ComplexityPoint point = complexity_from_rho(best_rho, p, n_c, epsilon);
  point.method = method;
  point.beta = beta;
  point.alpha_star = best_alpha;
  return point;
}

std::vector<ComplexityPoint> sweep(const SweepSpec& spec, int threads) {
  if (spec.methods.empty() || spec.betas.empty() || spec.p_grid.empty() || spec.nc_grid.empty()) {
    throw std::invalid_argument("sweep grids must be nonempty");
  }
  const std::vector<double> grid = spec.grid.empty() ? alpha_grid(spec.L) : spec.grid;

  struct Cell {
    Method method;
    double beta;
    double p;
    int n_c;
  };
  std::vector<Cell> cells;
  for (double beta : spec.betas)
    for (Method m : spec.methods)
      for (int nc : spec.nc_grid)
        for (double p : spec.p_grid) cells.push_back({m, beta, p, nc});

  std::vector<ComplexityPoint> out(cells.size());
  parallel_for(cells.size(), threads, [&](std::size_t i) {
    const Cell& c = cells[i];
    out[i] = complexity_point(c.method, spec.mu, spec.L, spec.n, c.beta, c.p, c.n_c, spec.epsilon, grid);
  });
  return out;
}

namespace {
std::string number(double v) { return std::isinf(v) ? std::string("inf") : fmt::format("{}", v); }
}  // namespace

void write_sweep_csv(std::ostream& out, const std::vector<ComplexityPoint>& points) {
  out << kSweepHeader << '\n';
  for (const ComplexityPoint& c : points) {
    out << fmt::format("{},{},{},{},{},{},{},{},{}\n", to_string(c.method), number(c.beta), number(c.p), c.n_c,
                       number(c.alpha_star), number(c.rho), number(c.comp), number(c.comm), number(c.epsilon));
  }
}

}  // namespace rgta
