#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rgta/config.hpp"
#include "rgta/engine.hpp"
#include "rgta/network.hpp"
#include "rgta/problems.hpp"

namespace rgta {

// One (method, n_c, p) combination of an experiment grid.
struct Cell {
  Method method = Method::kRgta3;
  int n_c = 1;
  double p = 1.0;

  bool operator==(const Cell&) const = default;
};

// GD, FedAvg and Scaffold ignore n_c and p and contribute a single (1, 1) cell.
std::vector<Cell> expand_cells(const ExperimentConfig& config);

// Whether runs of this cell differ between seeds (only through the coin).
bool seed_matters(const Cell& cell);

// "<method>_<nc>_<p>_<seed>.csv"
std::string trace_file_name(const Cell& cell, std::uint64_t seed);
struct TraceKey {
  Cell cell;
  std::uint64_t seed = 0;
};
std::optional<TraceKey> parse_trace_file_name(const std::string& name);

struct Experiment {
  std::unique_ptr<GradientOracle> oracle;
  std::unique_ptr<Topology> topology;
  std::unique_ptr<MixingMatrix> mixing;
  Eigen::VectorXd x_star;
  std::filesystem::path x_star_file;
  double kappa_target = 0.0;
  double kappa_achieved = 0.0;
  std::size_t samples = 0;  // logistic only
};

// Builds the problem and network and resolves x*, reading or writing the
// cache file xstar_<fingerprint>.txt in cache_dir.
Experiment prepare_experiment(const ExperimentConfig& config, const std::filesystem::path& cache_dir);

RunConfig make_run_config(const ExperimentConfig& config, const Cell& cell, double alpha, std::uint64_t seed);
CommunicationSet make_communication_set(const Experiment& experiment, const Cell& cell);

// One trace per configured seed, in seed order.
std::vector<MetricsTrace> run_cell(const Experiment& experiment, const ExperimentConfig& config, const Cell& cell,
                                   double alpha);

struct AlphaScore {
  double alpha = 0.0;
  double mean_final_error = 0.0;
  bool excluded = false;  // some seed diverged
};

struct TunedCell {
  Cell cell;
  std::optional<double> alpha;     // empty when every step size diverged
  std::vector<AlphaScore> scores;  // one per grid value, grid order
  std::vector<MetricsTrace> traces;

  bool feasible() const { return alpha.has_value(); }
};

struct TunedResult {
  std::vector<TunedCell> cells;
};

// Picks the step size with the smallest seed-averaged final optimization
// error. A step size is excluded when any of its runs ends non-finite or
// above the initial error. Ties go to the larger step size.
std::optional<double> select_alpha(const std::vector<AlphaScore>& scores);

TunedResult tune(const Experiment& experiment, const ExperimentConfig& config, bool keep_traces = true);

// Writes each trace and the manifest into out_dir; tunes first when the
// config has no fixed alpha. With epsilon targets configured, also writes
// summary.csv (absolute targets). Returns the trace file paths.
std::vector<std::filesystem::path> run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir);

// Writes tuning.csv (every grid value) and tuned.csv (selection per cell).
TunedResult tune_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir);

void write_tuning_csv(std::ostream& out, const TunedResult& result);
void write_tuned_csv(std::ostream& out, const TunedResult& result);

std::string manifest_text(const ExperimentConfig& config, const Experiment& experiment,
                          const std::vector<std::pair<Cell, std::optional<double>>>& alphas);

// ---------------------------------------------------------------------------

struct FirstHit {
  long grad_evals = 0;
  long comm_rounds = 0;
  bool censored = false;  // counts are then those of the last record
};

FirstHit first_hit(const MetricsTrace& trace, double epsilon);

struct LabeledTrace {
  TraceKey key;
  MetricsTrace trace;
};

// Reads every file in dir whose name parses as a trace file name.
std::vector<LabeledTrace> load_traces(const std::filesystem::path& dir);

struct SummaryRow {
  Cell cell;
  double epsilon = 0.0;
  bool relative = false;
  int seeds = 0;
  int censored = 0;
  double grads_mean = 0.0;
  double grads_se = 0.0;
  double comms_mean = 0.0;
  double comms_se = 0.0;
};

// Groups by cell. With relative = true the target for each trace is
// epsilon * (initial optimization error).
std::vector<SummaryRow> aggregate(const std::vector<LabeledTrace>& traces, double epsilon, bool relative);

inline constexpr const char* kSummaryHeader =
    "method,n_c,p,epsilon,relative,seeds,censored,grads_mean,grads_se,comms_mean,comms_se";
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace rgta
