#include "rgta/engine.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

#include "rgta/errors.hpp"

namespace rgta {

std::uint64_t CoinStream::mix(std::uint64_t z) {
  // splitmix64 finalizer
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double CoinStream::uniform(std::uint64_t k) const {
  const std::uint64_t bits = mix(key_ ^ mix(k * 0xd1b54a32d192ed03ULL));
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

double StackedState::consensus_error_x() const { return (x.rowwise() - x_mean()).norm(); }
double StackedState::consensus_error_y() const { return (y.rowwise() - y_mean()).norm(); }

void RunConfig::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be > 0");
  if (!(secondary_alpha > 0.0)) throw std::invalid_argument("secondary_alpha must be > 0");
  if (n_c < 1) throw std::invalid_argument("n_c must be >= 1");
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("p must lie in (0, 1]");
  if (local_steps < 1) throw std::invalid_argument("local_steps must be >= 1");
  if (budget.max_grad_evals < 1 || budget.max_comm_rounds < 1 || budget.max_iterations < 1) {
    throw std::invalid_argument("budgets must be positive");
  }
}

StackedState init_state(const GradientOracle& oracle, const Eigen::MatrixXd& x0) {
  if (x0.rows() != oracle.nodes() || x0.cols() != oracle.dim()) {
    throw std::invalid_argument(fmt::format("initial point is {}x{}, oracle expects {}x{}", x0.rows(),
                                            x0.cols(), oracle.nodes(), oracle.dim()));
  }
  StackedState state;
  state.x = x0;
  oracle.stacked_gradient(state.x, state.grad);
  state.y = state.grad;
  state.control = Eigen::MatrixXd::Zero(x0.rows(), x0.cols());
  state.server_control = Eigen::RowVectorXd::Zero(x0.cols());
  state.grad_evals = 1;
  return state;
}

StackedState init_state(const GradientOracle& oracle, const Eigen::VectorXd& x0) {
  if (x0.size() != oracle.dim()) throw std::invalid_argument("initial point has wrong dimension");
  return init_state(oracle, Eigen::MatrixXd(x0.transpose().replicate(oracle.nodes(), 1)));
}

void rgta_step_with_coin(StackedState& state, const GradientOracle& oracle, double alpha,
                         const CommunicationSet& comm, bool theta) {
  if (comm[0].size() != state.nodes()) throw std::invalid_argument("network size does not match state");
  Eigen::MatrixXd& mixed_x = state.work_a;
  Eigen::MatrixXd& mixed = state.work_b;
  Eigen::MatrixXd& scratch = state.work_c;

  if (theta && comm.shared_x) {
    state.x -= alpha * state.y;
    consensus_apply_inplace(comm[0], state.x, comm.n_c, scratch);
  } else if (theta) {
    mixed_x = state.x;
    consensus_apply_inplace(comm[0], mixed_x, comm.n_c, scratch);
    mixed = state.y;
    consensus_apply_inplace(comm[1], mixed, comm.n_c, scratch);
    state.x = mixed_x - alpha * mixed;
  } else {
    state.x -= alpha * state.y;
  }

  // mixed_x <- g+ ; mixed <- g+ - g
  oracle.stacked_gradient(state.x, mixed_x);
  mixed = mixed_x - state.grad;
  if (theta && comm.shared_y) {
    state.y += mixed;
    consensus_apply_inplace(comm[2], state.y, comm.n_c, scratch);
  } else if (theta) {
    consensus_apply_inplace(comm[2], state.y, comm.n_c, scratch);
    consensus_apply_inplace(comm[3], mixed, comm.n_c, scratch);
    state.y += mixed;
  } else {
    state.y += mixed;
  }
  if (theta) state.comm_rounds += comm.n_c;
  state.grad.swap(mixed_x);
  state.grad_evals += 1;
  state.k += 1;
}

bool rgta_step(StackedState& state, const GradientOracle& oracle, const RunConfig& config,
               const CommunicationSet& comm, const CoinStream& coins) {
  const bool theta = coins.flip(static_cast<std::uint64_t>(state.k), config.p);
  rgta_step_with_coin(state, oracle, config.alpha, comm, theta);
  return theta;
}

namespace {

void require_complete(const CommunicationSet& comm, Method method) {
  const Eigen::MatrixXd& w = comm[0].weights();
  if ((w.array() <= 0.0).any()) {
    throw std::invalid_argument(to_string(method) + " runs only on the complete network");
  }
}

void average_rows(Eigen::MatrixXd& m) {
  const Eigen::RowVectorXd mean = m.colwise().mean();
  m.rowwise() = mean;
}

void gd_step(StackedState& s, const GradientOracle& oracle, const RunConfig& cfg) {
  const Eigen::RowVectorXd g = s.grad.colwise().mean();
  s.x.rowwise() -= cfg.alpha * g;
  oracle.stacked_gradient(s.x, s.grad);
  s.y = s.grad;
  s.grad_evals += 1;
  s.comm_rounds += 1;
}

void fedavg_round(StackedState& s, const GradientOracle& oracle, const RunConfig& cfg) {
  // the gradient at the start of the round is the cached one
  for (int step = 0; step < cfg.local_steps; ++step) {
    if (step > 0) oracle.stacked_gradient(s.x, s.grad);
    s.x -= cfg.alpha * s.grad;
  }
  average_rows(s.x);
  oracle.stacked_gradient(s.x, s.grad);
  s.y = s.grad;
  s.grad_evals += cfg.local_steps;
  s.comm_rounds += 1;
}

void scaffold_round(StackedState& s, const GradientOracle& oracle, const RunConfig& cfg) {
  const double local_lr = cfg.alpha;
  const double server_lr = cfg.secondary_alpha;
  const Eigen::MatrixXd start = s.x;
  Eigen::MatrixXd& local = s.work_a;
  local = s.x;
  for (int step = 0; step < cfg.local_steps; ++step) {
    if (step > 0) oracle.stacked_gradient(local, s.grad);
    local -= local_lr * ((s.grad - s.control).rowwise() + s.server_control);
  }
  // option II control update
  s.control = (s.control.rowwise() - s.server_control) +
              (start - local) / (cfg.local_steps * local_lr);
  s.server_control = s.control.colwise().mean();
  const Eigen::RowVectorXd delta = (local - start).colwise().mean();
  s.x = start.rowwise() + server_lr * delta;
  oracle.stacked_gradient(s.x, s.grad);
  s.y = s.grad;
  s.grad_evals += cfg.local_steps;
  s.comm_rounds += 1;
}

bool scaffnew_step(StackedState& s, const GradientOracle& oracle, const RunConfig& cfg,
                   const CommunicationSet& comm, const CoinStream& coins) {
  const double gamma = cfg.alpha;
  const double tau = cfg.secondary_alpha;
  const bool theta = coins.flip(static_cast<std::uint64_t>(s.k), cfg.p);
  Eigen::MatrixXd& local = s.work_a;
  local = s.x - gamma * (s.grad - s.control);
  if (theta) {
    Eigen::MatrixXd& shifted = s.work_b;
    shifted = local - (gamma / cfg.p) * s.control;
    s.x = shifted;
    consensus_apply_inplace(comm[0], s.x, comm.n_c, s.work_c);
    s.x = (1.0 - tau) * shifted + tau * s.x;
    s.control += (cfg.p / gamma) * (s.x - local);
    s.comm_rounds += comm.n_c;
  } else {
    s.x = local;
  }
  oracle.stacked_gradient(s.x, s.grad);
  s.y = s.grad;
  s.grad_evals += 1;
  return theta;
}

}  // namespace

bool baseline_step(StackedState& state, const GradientOracle& oracle, const RunConfig& config,
                   const CommunicationSet& comm, const CoinStream& coins) {
  bool theta = true;
  switch (config.method) {
    case Method::kGd:
      gd_step(state, oracle, config);
      break;
    case Method::kFedAvg:
      require_complete(comm, config.method);
      fedavg_round(state, oracle, config);
      break;
    case Method::kScaffold:
      require_complete(comm, config.method);
      scaffold_round(state, oracle, config);
      break;
    case Method::kScaffnew:
      theta = scaffnew_step(state, oracle, config, comm, coins);
      break;
    default:
      throw std::invalid_argument("baseline_step: " + to_string(config.method) + " is not a baseline");
  }
  state.k += 1;
  return theta;
}

TraceRecord measure(const StackedState& state, const Eigen::VectorXd& x_star, bool theta) {
  TraceRecord r;
  r.k = state.k;
  r.grad_evals = state.grad_evals;
  r.comm_rounds = state.comm_rounds;
  r.opt_error = (state.x_mean().transpose() - x_star).norm();
  r.cons_error_x = state.consensus_error_x();
  r.cons_error_y = state.consensus_error_y();
  r.theta = theta ? 1 : 0;
  return r;
}

MetricsTrace run(const GradientOracle& oracle, const RunConfig& config, const CommunicationSet& comm,
                 const Eigen::VectorXd& x_star, const std::optional<Eigen::VectorXd>& x0) {
  config.validate();
  if (x_star.size() != oracle.dim()) throw std::invalid_argument("x_star has wrong dimension");
  if (comm[0].size() != oracle.nodes()) throw std::invalid_argument("network size does not match oracle");
  const bool tracking = is_tracking_method(config.method);
  if (tracking && comm.n_c != config.n_c) throw std::invalid_argument("communication set n_c != config n_c");
  if (tracking && config.method != comm.tag) {
    throw std::invalid_argument("communication set was built for " + to_string(comm.tag));
  }

  StackedState state = init_state(oracle, x0 ? *x0 : Eigen::VectorXd::Zero(oracle.dim()));
  const CoinStream coins(config.seed);
  MetricsTrace trace;
  trace.records.push_back(measure(state, x_star, false));

  const Budget& budget = config.budget;
  while (state.grad_evals < budget.max_grad_evals && state.comm_rounds < budget.max_comm_rounds &&
         state.k < budget.max_iterations) {
    const bool theta = tracking ? rgta_step(state, oracle, config, comm, coins)
                                : baseline_step(state, oracle, config, comm, coins);
    // summary mode measures every 64th iteration and at the end
    const bool last = !(state.grad_evals < budget.max_grad_evals && state.comm_rounds < budget.max_comm_rounds &&
                        state.k < budget.max_iterations);
    if (!config.record_trace && !last && state.k % 64 != 0) continue;
    TraceRecord r = measure(state, x_star, theta);
    const bool finite = std::isfinite(r.opt_error) && std::isfinite(r.cons_error_x) && std::isfinite(r.cons_error_y);
    if (config.record_trace || trace.records.size() < 2) {
      trace.records.push_back(r);
    } else {
      trace.records.back() = r;
    }
    if (!finite) {
      trace.diverged = true;
      if (config.stop_on_divergence) break;
    }
  }
  return trace;
}

void write_trace_csv(std::ostream& out, const MetricsTrace& trace) {
  out << kTraceHeader << '\n';
  fmt::memory_buffer buf;
  for (const TraceRecord& r : trace.records) {
    buf.clear();
    fmt::format_to(std::back_inserter(buf), "{},{},{},{:.17g},{:.17g},{:.17g},{}\n", r.k, r.grad_evals,
                   r.comm_rounds, r.opt_error, r.cons_error_x, r.cons_error_y, r.theta);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
}

MetricsTrace read_trace_csv(std::istream& in) {
  MetricsTrace trace;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty trace file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceHeader) throw ParseError("unexpected trace header '" + line + "'", 1);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell[7];
    for (int c = 0; c < 7; ++c) {
      if (!std::getline(row, cell[c], ',')) throw ParseError("trace row has fewer than 7 columns", lineno);
    }
    try {
      TraceRecord r;
      r.k = std::stol(cell[0]);
      r.grad_evals = std::stol(cell[1]);
      r.comm_rounds = std::stol(cell[2]);
      r.opt_error = std::stod(cell[3]);
      r.cons_error_x = std::stod(cell[4]);
      r.cons_error_y = std::stod(cell[5]);
      r.theta = std::stoi(cell[6]);
      trace.records.push_back(r);
      if (!std::isfinite(r.opt_error)) trace.diverged = true;
    } catch (const std::exception&) {
      throw ParseError("malformed trace row", lineno);
    }
  }
  return trace;
}

}  // namespace rgta
