// rgta: rate analysis sweeps, simulation runs, step-size tuning and trace
// aggregation.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "rgta/config.hpp"
#include "rgta/errors.hpp"
#include "rgta/harness.hpp"
#include "rgta/rate_analysis.hpp"

namespace fs = std::filesystem;
using namespace rgta;

namespace {

constexpr int kUsageError = 2;
constexpr int kRuntimeError = 1;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AnalyzeArgs {
  double mu = 10.0;
  double L = 1e5;
  int n = 16;
  std::vector<double> betas;
  std::string sweep = "nc";
  std::vector<int> nc{1};
  int nc_max = 50;
  std::vector<double> p;
  double eps = 0.36787944117144233;
  std::vector<std::string> methods{"RGTA-1", "RGTA-2", "RGTA-3"};
  int octaves = 30;
  int points_per_octave = 10;
  std::string out_dir = "out";
  int threads = 1;
};

struct ConfigArgs {
  std::string config;
  std::string out_dir;
  std::vector<std::uint64_t> seeds;
  int threads = 0;
};

struct AggregateArgs {
  std::string dir;
  std::vector<double> eps;
  std::vector<double> eps_rel;
  std::string out;
};

int do_analyze(const AnalyzeArgs& a) {
  if (a.betas.empty()) throw UsageError("--beta needs at least one value");
  SweepSpec spec;
  spec.mu = a.mu;
  spec.L = a.L;
  spec.n = a.n;
  spec.epsilon = a.eps;
  spec.methods.clear();
  for (const auto& m : a.methods) {
    const Method parsed = parse_method(m);
    if (parsed != Method::kRgta1 && parsed != Method::kRgta2 && parsed != Method::kRgta3) {
      throw UsageError("analyze supports RGTA-1, RGTA-2 and RGTA-3, got " + m);
    }
    spec.methods.push_back(parsed);
  }
  if (a.sweep == "nc") {
    if (a.nc_max < 1) throw UsageError("--nc-max must be >= 1");
    spec.nc_grid.clear();
    for (int k = 1; k <= a.nc_max; ++k) spec.nc_grid.push_back(k);
    spec.p_grid = a.p.empty() ? std::vector<double>{1.0} : a.p;
  } else {
    spec.nc_grid = a.nc;
    spec.p_grid = a.p.empty() ? std::vector<double>{0.01, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0} : a.p;
  }
  spec.grid = alpha_grid(a.L, a.octaves, a.points_per_octave);

  const fs::path out_dir(a.out_dir);
  for (double beta : a.betas) {
    spec.betas = {beta};
    const auto points = sweep(spec, a.threads);
    std::ostringstream csv;
    write_sweep_csv(csv, points);
    const fs::path file = out_dir / fmt::format("sweep_{}_beta{:g}.csv", a.sweep, beta);
    write_file_atomic(file, csv.str());
    std::cout << file.string() << '\n';
  }
  return 0;
}

ExperimentConfig load_with_overrides(const ConfigArgs& a) {
  ExperimentConfig c = load_config(a.config);
  if (!a.out_dir.empty()) c.out_dir = a.out_dir;
  if (!a.seeds.empty()) c.seeds = a.seeds;
  if (a.threads > 0) c.threads = a.threads;
  c.validate();
  return c;
}

int do_run(const ConfigArgs& a) {
  const ExperimentConfig c = load_with_overrides(a);
  for (const auto& path : run_experiment(c, c.out_dir)) std::cout << path.string() << '\n';
  return 0;
}

int do_tune(const ConfigArgs& a) {
  const ExperimentConfig c = load_with_overrides(a);
  const TunedResult result = tune_experiment(c, c.out_dir);
  write_tuned_csv(std::cout, result);
  return 0;
}

int do_aggregate(const AggregateArgs& a) {
  if (a.eps.empty() && a.eps_rel.empty()) throw UsageError("give --eps and/or --eps-rel");
  const auto traces = load_traces(a.dir);
  if (traces.empty()) throw std::runtime_error("no trace files in " + a.dir);
  std::vector<SummaryRow> rows;
  for (double e : a.eps) {
    auto r = aggregate(traces, e, false);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  for (double e : a.eps_rel) {
    auto r = aggregate(traces, e, true);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  std::ostringstream csv;
  write_summary_csv(csv, rows);
  const fs::path out = a.out.empty() ? fs::path(a.dir) / "summary.csv" : fs::path(a.out);
  write_file_atomic(out, csv.str());
  std::cout << csv.str();
  return 0;
}

void add_config_options(CLI::App* cmd, ConfigArgs& a) {
  cmd->add_option("--config", a.config, "experiment config (INI)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out-dir", a.out_dir, "output directory (overrides run.out_dir)");
  cmd->add_option("--seed", a.seeds, "seed list (overrides run.seeds)")->delimiter(',');
  cmd->add_option("--threads", a.threads, "worker threads (overrides run.threads)")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Randomized gradient tracking: rate analysis and simulation"};
  app.require_subcommand(1);

  AnalyzeArgs analyze;
  auto* an = app.add_subcommand("analyze", "sweep rate-matrix complexities over n_c or p");
  an->add_option("--mu", analyze.mu, "strong convexity")->check(CLI::PositiveNumber);
  an->add_option("--L", analyze.L, "Lipschitz constant")->check(CLI::PositiveNumber);
  an->add_option("--n", analyze.n, "number of nodes")->check(CLI::PositiveNumber);
  an->add_option("--beta", analyze.betas, "connectivity values, comma separated")->delimiter(',')->required();
  an->add_option("--sweep", analyze.sweep, "nc or p")->check(CLI::IsMember({"nc", "p"}));
  an->add_option("--nc", analyze.nc, "n_c values for the p sweep")->delimiter(',');
  an->add_option("--nc-max", analyze.nc_max, "largest n_c for the n_c sweep");
  an->add_option("--p", analyze.p, "p values")->delimiter(',');
  an->add_option("--eps", analyze.eps, "target accuracy epsilon in (0, 1)");
  an->add_option("--methods", analyze.methods, "methods, comma separated")->delimiter(',');
  an->add_option("--octaves", analyze.octaves, "step-size grid spans 2^-octaves/L .. 1/L");
  an->add_option("--points-per-octave", analyze.points_per_octave, "step-size grid density")
      ->check(CLI::PositiveNumber);
  an->add_option("--out-dir", analyze.out_dir, "output directory");
  an->add_option("--threads", analyze.threads, "worker threads")->check(CLI::PositiveNumber);
  an->add_option("--seed", "ignored; analysis is deterministic");

  ConfigArgs run_args, tune_args;
  add_config_options(app.add_subcommand("run", "simulate every configured cell and write traces"), run_args);
  add_config_options(app.add_subcommand("tune", "tune step sizes by simulation"), tune_args);

  AggregateArgs agg;
  auto* ag = app.add_subcommand("aggregate", "gradients and communications to reach epsilon");
  ag->add_option("--dir", agg.dir, "directory holding trace CSVs")->required()->check(CLI::ExistingDirectory);
  ag->add_option("--eps", agg.eps, "absolute targets")->delimiter(',');
  ag->add_option("--eps-rel", agg.eps_rel, "targets relative to the initial error")->delimiter(',');
  ag->add_option("--out", agg.out, "summary file (default <dir>/summary.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (an->parsed()) return do_analyze(analyze);
    if (app.got_subcommand("run")) return do_run(run_args);
    if (app.got_subcommand("tune")) return do_tune(tune_args);
    if (ag->parsed()) return do_aggregate(agg);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kUsageError;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kRuntimeError;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kUsageError;
}
