#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "rgta/method.hpp"
#include "rgta/network.hpp"
#include "rgta/problems.hpp"

namespace rgta {

// Counter-based Bernoulli source: the draw for iteration k depends only on
// (seed, k), so the coin sequence does not change with budgets or with the
// method being run.
class CoinStream {
 public:
  explicit CoinStream(std::uint64_t seed) : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform(std::uint64_t k) const;
  bool flip(std::uint64_t k, double p) const { return uniform(k) < p; }

  static std::uint64_t mix(std::uint64_t z);

 private:
  std::uint64_t key_;
};

// Node-stacked iterates. Row i of x/y/grad belongs to node i.
struct StackedState {
  Eigen::MatrixXd x;
  Eigen::MatrixXd y;
  Eigen::MatrixXd grad;  // grad f_i(x_i), kept coherent with x
  // Scaffold / Scaffnew control variates; unused by the tracking methods.
  Eigen::MatrixXd control;
  Eigen::RowVectorXd server_control;
  long k = 0;
  long grad_evals = 0;
  long comm_rounds = 0;

  int nodes() const { return static_cast<int>(x.rows()); }
  int dim() const { return static_cast<int>(x.cols()); }
  Eigen::RowVectorXd x_mean() const { return x.colwise().mean(); }
  Eigen::RowVectorXd y_mean() const { return y.colwise().mean(); }
  double consensus_error_x() const;
  double consensus_error_y() const;

  // scratch space for the update rules
  Eigen::MatrixXd work_a, work_b, work_c;
};

struct Budget {
  long max_grad_evals = 100'000;
  long max_comm_rounds = std::numeric_limits<long>::max();
  long max_iterations = std::numeric_limits<long>::max();
};

struct RunConfig {
  Method method = Method::kRgta3;
  double alpha = 1e-3;
  // Scaffold: server step size. Scaffnew: mixing step size.
  double secondary_alpha = 1.0;
  int n_c = 1;
  double p = 1.0;
  std::uint64_t seed = 0;
  Budget budget;
  int local_steps = 1;  // FedAvg / Scaffold
  bool stop_on_divergence = false;
  // false keeps only the first and the last record; divergence is then
  // checked every 64 iterations
  bool record_trace = true;

  void validate() const;
};

struct TraceRecord {
  long k = 0;
  long grad_evals = 0;
  long comm_rounds = 0;
  double opt_error = 0.0;
  double cons_error_x = 0.0;
  double cons_error_y = 0.0;
  int theta = 0;

  bool operator==(const TraceRecord&) const = default;
};

struct MetricsTrace {
  std::vector<TraceRecord> records;
  bool diverged = false;

  bool empty() const { return records.empty(); }
  const TraceRecord& front() const { return records.front(); }
  const TraceRecord& back() const { return records.back(); }
};

// X rows = x0 (broadcast) or the given n x d matrix; y = grad = per-node
// gradients; counters zero except grad_evals = 1.
StackedState init_state(const GradientOracle& oracle, const Eigen::VectorXd& x0);
StackedState init_state(const GradientOracle& oracle, const Eigen::MatrixXd& x0);

// One iteration of the randomized tracking method with the coin fixed.
// theta = true:  x <- W1^nc x - alpha W2^nc y;  y <- W3^nc y + W4^nc (g+ - g)
// theta = false: x <- x - alpha y;              y <- y + (g+ - g)
void rgta_step_with_coin(StackedState& state, const GradientOracle& oracle, double alpha,
                         const CommunicationSet& comm, bool theta);

// Draws theta_k from the coin stream, applies the step, returns theta_k.
bool rgta_step(StackedState& state, const GradientOracle& oracle, const RunConfig& config,
               const CommunicationSet& comm, const CoinStream& coins);

// One outer iteration of GD / FedAvg / Scaffold (a communication round) or
// Scaffnew (a local step, communicating with probability p). Returns whether
// this iteration communicated.
bool baseline_step(StackedState& state, const GradientOracle& oracle, const RunConfig& config,
                   const CommunicationSet& comm, const CoinStream& coins);

TraceRecord measure(const StackedState& state, const Eigen::VectorXd& x_star, bool theta);

// Iterates from x0 (default zero) until a budget is exhausted, recording one
// row for the initial state and one per iteration.
MetricsTrace run(const GradientOracle& oracle, const RunConfig& config, const CommunicationSet& comm,
                 const Eigen::VectorXd& x_star,
                 const std::optional<Eigen::VectorXd>& x0 = std::nullopt);

// CSV with header k,grad_evals,comm_rounds,opt_error,cons_error_x,cons_error_y,theta
void write_trace_csv(std::ostream& out, const MetricsTrace& trace);
MetricsTrace read_trace_csv(std::istream& in);

inline constexpr const char* kTraceHeader = "k,grad_evals,comm_rounds,opt_error,cons_error_x,cons_error_y,theta";

}  // namespace rgta
