#include "rgta/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <system_error>
#include <thread>
#include <tuple>

#include <fmt/format.h>

#include "rgta/errors.hpp"
#include "rgta/parallel.hpp"

namespace rgta {
namespace fs = std::filesystem;

namespace {

std::string num(double v) { return fmt::format("{}", v); }

std::string format_p(double p) { return fmt::format("{:g}", p); }

bool uses_grid(Method m) { return is_tracking_method(m) || m == Method::kScaffnew; }

}  // namespace

std::vector<Cell> expand_cells(const ExperimentConfig& config) {
  std::vector<Cell> cells;
  for (Method m : config.methods) {
    if (!uses_grid(m)) {
      cells.push_back({m, 1, 1.0});
      continue;
    }
    for (int nc : config.nc_grid)
      for (double p : config.p_grid) cells.push_back({m, nc, p});
  }
  return cells;
}

bool seed_matters(const Cell& cell) { return uses_grid(cell.method) && cell.p < 1.0; }

std::string trace_file_name(const Cell& cell, std::uint64_t seed) {
  return fmt::format("{}_{}_{}_{}.csv", to_string(cell.method), cell.n_c, format_p(cell.p), seed);
}

std::optional<TraceKey> parse_trace_file_name(const std::string& name) {
  constexpr std::string_view ext = ".csv";
  if (name.size() <= ext.size() || name.compare(name.size() - ext.size(), ext.size(), ext) != 0) return std::nullopt;
  std::string stem = name.substr(0, name.size() - ext.size());
  std::vector<std::string> parts;
  for (int k = 0; k < 3; ++k) {
    const auto cut = stem.rfind('_');
    if (cut == std::string::npos) return std::nullopt;
    parts.push_back(stem.substr(cut + 1));
    stem.resize(cut);
  }
  try {
    TraceKey key;
    key.cell.method = parse_method(stem);
    std::size_t used = 0;
    key.seed = std::stoull(parts[0], &used);
    if (used != parts[0].size()) return std::nullopt;
    key.cell.p = std::stod(parts[1], &used);
    if (used != parts[1].size()) return std::nullopt;
    key.cell.n_c = std::stoi(parts[2], &used);
    if (used != parts[2].size()) return std::nullopt;
    return key;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

// ---------------------------------------------------------------------------

Experiment prepare_experiment(const ExperimentConfig& config, const fs::path& cache_dir) {
  config.validate();
  Experiment ex;
  const ProblemSpec& spec = config.problem;
  if (spec.kind == ProblemKind::kQuadratic) {
    QuadraticProblem problem = generate_quadratic(spec.n, spec.d, spec.kappa, spec.seed);
    ex.kappa_target = problem.kappa_target;
    ex.kappa_achieved = problem.kappa_achieved;
    ex.oracle = std::make_unique<QuadraticOracle>(std::move(problem));
  } else {
    if (!fs::exists(spec.dataset)) throw ConfigError("dataset not found: " + spec.dataset);
    Dataset data = load_libsvm(spec.dataset, spec.declared_dim);
    ex.samples = data.rows();
    if (static_cast<std::size_t>(spec.n) > data.rows()) {
      throw ConfigError(fmt::format("dataset has {} rows, fewer than {} nodes", data.rows(), spec.n));
    }
    auto oracle = std::make_unique<LogisticOracle>(make_logistic_problem(data, partition(data, spec.n)));
    ex.kappa_achieved = oracle->lipschitz() / oracle->strong_convexity();
    ex.oracle = std::move(oracle);
  }

  ex.topology = std::make_unique<Topology>(build_topology(config.network.kind, spec.n));
  ex.mixing = std::make_unique<MixingMatrix>(mixing_matrix(*ex.topology, config.network.scheme));

  const GradientOracle& oracle = *ex.oracle;
  ex.x_star_file = cache_dir / fmt::format("xstar_{:016x}.txt", oracle.fingerprint());
  bool cached = false;
  if (fs::exists(ex.x_star_file)) {
    try {
      ex.x_star = read_vector(ex.x_star_file);
      cached = ex.x_star.size() == oracle.dim();
    } catch (const ParseError&) {
      cached = false;
    }
  }
  if (!cached) {
    if (spec.kind == ProblemKind::kQuadratic) {
      ex.x_star = quadratic_optimum(static_cast<const QuadraticOracle&>(oracle).problem());
    } else {
      ex.x_star = centralized_optimum(oracle);
    }
    fs::create_directories(cache_dir);
    write_vector(ex.x_star_file, ex.x_star);
    // use exactly what later runs will read back
    ex.x_star = read_vector(ex.x_star_file);
  }
  return ex;
}

RunConfig make_run_config(const ExperimentConfig& config, const Cell& cell, double alpha, std::uint64_t seed) {
  RunConfig rc;
  rc.method = cell.method;
  rc.alpha = alpha;
  rc.secondary_alpha = config.secondary_alpha;
  rc.n_c = cell.n_c;
  rc.p = cell.p;
  rc.seed = seed;
  rc.budget = config.budget;
  rc.local_steps = config.local_steps;
  return rc;
}

CommunicationSet make_communication_set(const Experiment& experiment, const Cell& cell) {
  return communication_set(cell.method, *experiment.mixing, cell.n_c);
}

std::vector<MetricsTrace> run_cell(const Experiment& experiment, const ExperimentConfig& config, const Cell& cell,
                                   double alpha) {
  const CommunicationSet comm = make_communication_set(experiment, cell);
  std::vector<MetricsTrace> traces(config.seeds.size());
  if (!seed_matters(cell)) {
    const MetricsTrace trace =
        run(*experiment.oracle, make_run_config(config, cell, alpha, config.seeds.front()), comm, experiment.x_star);
    std::fill(traces.begin(), traces.end(), trace);
    return traces;
  }
  parallel_for(config.seeds.size(), config.threads, [&](std::size_t s) {
    traces[s] = run(*experiment.oracle, make_run_config(config, cell, alpha, config.seeds[s]), comm, experiment.x_star);
  });
  return traces;
}

// ---------------------------------------------------------------------------

std::optional<double> select_alpha(const std::vector<AlphaScore>& scores) {
  std::optional<double> best;
  double best_error = 0.0;
  for (const AlphaScore& s : scores) {
    if (s.excluded) continue;
    if (!best || s.mean_final_error < best_error || (s.mean_final_error == best_error && s.alpha > *best)) {
      best = s.alpha;
      best_error = s.mean_final_error;
    }
  }
  return best;
}

TunedResult tune(const Experiment& experiment, const ExperimentConfig& config, bool keep_traces) {
  const std::vector<Cell> cells = expand_cells(config);
  const std::vector<double> grid = config.alpha_grid();

  struct Job {
    std::size_t cell, alpha, seed;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const std::size_t seeds = seed_matters(cells[c]) ? config.seeds.size() : 1;
    for (std::size_t a = 0; a < grid.size(); ++a)
      for (std::size_t s = 0; s < seeds; ++s) jobs.push_back({c, a, s});
  }

  std::vector<CommunicationSet> comms;
  for (const Cell& c : cells) comms.push_back(make_communication_set(experiment, c));

  struct Outcome {
    double final_error = 0.0;
    bool bad = false;
  };
  std::vector<Outcome> outcomes(jobs.size());
  parallel_for(jobs.size(), config.threads, [&](std::size_t j) {
    const Job& job = jobs[j];
    RunConfig rc = make_run_config(config, cells[job.cell], grid[job.alpha], config.seeds[job.seed]);
    rc.stop_on_divergence = true;
    rc.record_trace = false;
    const MetricsTrace t = run(*experiment.oracle, rc, comms[job.cell], experiment.x_star);
    const double initial = t.front().opt_error;
    const double final_error = t.back().opt_error;
    outcomes[j] = {final_error, t.diverged || !std::isfinite(final_error) || final_error > initial};
  });

  TunedResult result;
  result.cells.resize(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    result.cells[c].cell = cells[c];
    result.cells[c].scores.resize(grid.size());
    for (std::size_t a = 0; a < grid.size(); ++a) result.cells[c].scores[a].alpha = grid[a];
  }
  std::vector<std::vector<int>> counts(cells.size(), std::vector<int>(grid.size(), 0));
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    AlphaScore& s = result.cells[jobs[j].cell].scores[jobs[j].alpha];
    s.mean_final_error += outcomes[j].final_error;
    s.excluded = s.excluded || outcomes[j].bad;
    ++counts[jobs[j].cell][jobs[j].alpha];
  }
  for (std::size_t c = 0; c < cells.size(); ++c) {
    TunedCell& tc = result.cells[c];
    for (std::size_t a = 0; a < grid.size(); ++a) tc.scores[a].mean_final_error /= counts[c][a];
    tc.alpha = select_alpha(tc.scores);
    if (keep_traces && tc.alpha) tc.traces = run_cell(experiment, config, tc.cell, *tc.alpha);
  }
  return result;
}

void write_tuning_csv(std::ostream& out, const TunedResult& result) {
  out << "method,n_c,p,alpha,mean_final_error,excluded,selected\n";
  for (const TunedCell& tc : result.cells) {
    for (const AlphaScore& s : tc.scores) {
      out << fmt::format("{},{},{},{},{},{},{}\n", to_string(tc.cell.method), tc.cell.n_c, num(tc.cell.p), num(s.alpha),
                         num(s.mean_final_error), s.excluded ? 1 : 0, tc.alpha && *tc.alpha == s.alpha ? 1 : 0);
    }
  }
}

void write_tuned_csv(std::ostream& out, const TunedResult& result) {
  out << "method,n_c,p,alpha\n";
  for (const TunedCell& tc : result.cells) {
    out << fmt::format("{},{},{},{}\n", to_string(tc.cell.method), tc.cell.n_c, num(tc.cell.p),
                       tc.alpha ? num(*tc.alpha) : std::string("infeasible"));
  }
}

std::string manifest_text(const ExperimentConfig& config, const Experiment& ex,
                          const std::vector<std::pair<Cell, std::optional<double>>>& alphas) {
  std::string out;
  auto line = [&out](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
  line("problem", config.problem.kind == ProblemKind::kQuadratic ? "quadratic" : "logistic");
  line("n", std::to_string(ex.oracle->nodes()));
  line("d", std::to_string(ex.oracle->dim()));
  if (config.problem.kind == ProblemKind::kQuadratic) {
    line("kappa_target", num(ex.kappa_target));
    line("kappa_achieved", num(ex.kappa_achieved));
  } else {
    line("dataset", config.problem.dataset);
    line("samples", std::to_string(ex.samples));
    line("kappa", num(ex.kappa_achieved));
  }
  line("L", num(ex.oracle->lipschitz()));
  line("mu", num(ex.oracle->strong_convexity()));
  line("topology", std::string(to_string(config.network.kind)));
  line("scheme", std::string(to_string(config.network.scheme)));
  line("beta", num(ex.mixing->beta()));
  line("x_star_file", ex.x_star_file.filename().string());
  line("x_star_norm", num(ex.x_star.norm()));
  line("seeds", [&] {
    std::string s;
    for (std::size_t i = 0; i < config.seeds.size(); ++i) s += (i ? "," : "") + std::to_string(config.seeds[i]);
    return s;
  }());
  for (const auto& [cell, alpha] : alphas) {
    line(fmt::format("alpha.{}_{}_{}", to_string(cell.method), cell.n_c, format_p(cell.p)),
         alpha ? num(*alpha) : std::string("infeasible"));
  }
  return out;
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += fmt::format(".tmp{}", std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

namespace {

std::string to_csv(const MetricsTrace& trace) {
  std::ostringstream out;
  write_trace_csv(out, trace);
  return out.str();
}

}  // namespace

std::vector<fs::path> run_experiment(const ExperimentConfig& config, const fs::path& out_dir) {
  const Experiment ex = prepare_experiment(config, out_dir);
  std::vector<std::pair<Cell, std::optional<double>>> alphas;
  std::vector<std::pair<Cell, std::vector<MetricsTrace>>> results;

  if (config.alpha) {
    for (const Cell& cell : expand_cells(config)) {
      alphas.emplace_back(cell, *config.alpha);
      results.emplace_back(cell, run_cell(ex, config, cell, *config.alpha));
    }
  } else {
    TunedResult tuned = tune(ex, config);
    std::ostringstream tuning;
    write_tuning_csv(tuning, tuned);
    write_file_atomic(out_dir / "tuning.csv", tuning.str());
    for (TunedCell& tc : tuned.cells) {
      alphas.emplace_back(tc.cell, tc.alpha);
      if (tc.alpha) results.emplace_back(tc.cell, std::move(tc.traces));
    }
  }

  std::vector<fs::path> written;
  for (const auto& [cell, traces] : results) {
    for (std::size_t s = 0; s < traces.size(); ++s) {
      const fs::path path = out_dir / trace_file_name(cell, config.seeds[s]);
      write_file_atomic(path, to_csv(traces[s]));
      written.push_back(path);
    }
  }
  if (!config.epsilons.empty()) {
    std::vector<LabeledTrace> labeled;
    for (const auto& [cell, traces] : results) {
      for (std::size_t s = 0; s < traces.size(); ++s) labeled.push_back({{cell, config.seeds[s]}, traces[s]});
    }
    std::vector<SummaryRow> rows;
    for (double e : config.epsilons) {
      const auto r = aggregate(labeled, e, false);
      rows.insert(rows.end(), r.begin(), r.end());
    }
    std::ostringstream summary;
    write_summary_csv(summary, rows);
    write_file_atomic(out_dir / "summary.csv", summary.str());
  }
  write_file_atomic(out_dir / "manifest.txt", manifest_text(config, ex, alphas));
  return written;
}

TunedResult tune_experiment(const ExperimentConfig& config, const fs::path& out_dir) {
  const Experiment ex = prepare_experiment(config, out_dir);
  TunedResult tuned = tune(ex, config, false);
  std::ostringstream tuning, selected;
  write_tuning_csv(tuning, tuned);
  write_tuned_csv(selected, tuned);
  write_file_atomic(out_dir / "tuning.csv", tuning.str());
  write_file_atomic(out_dir / "tuned.csv", selected.str());
  std::vector<std::pair<Cell, std::optional<double>>> alphas;
  for (const TunedCell& tc : tuned.cells) alphas.emplace_back(tc.cell, tc.alpha);
  write_file_atomic(out_dir / "manifest.txt", manifest_text(config, ex, alphas));
  return tuned;
}

// ---------------------------------------------------------------------------

FirstHit first_hit(const MetricsTrace& trace, double epsilon) {
  if (trace.empty()) throw std::invalid_argument("empty trace");
  for (const TraceRecord& r : trace.records) {
    if (r.opt_error <= epsilon) return {r.grad_evals, r.comm_rounds, false};
  }
  return {trace.back().grad_evals, trace.back().comm_rounds, true};
}

std::vector<LabeledTrace> load_traces(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && parse_trace_file_name(entry.path().filename().string())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<LabeledTrace> out;
  for (const fs::path& f : files) {
    std::ifstream in(f);
    if (!in) throw std::runtime_error("cannot read " + f.string());
    try {
      out.push_back({*parse_trace_file_name(f.filename().string()), read_trace_csv(in)});
    } catch (const ParseError& e) {
      throw ParseError(f.filename().string() + ": " + e.what());
    }
    if (out.back().trace.empty()) throw ParseError(f.filename().string() + ": trace has no records");
  }
  return out;
}

std::vector<SummaryRow> aggregate(const std::vector<LabeledTrace>& traces, double epsilon, bool relative) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
  using Key = std::tuple<int, int, double>;
  std::map<Key, std::vector<FirstHit>> groups;
  std::map<Key, Cell> cells;
  for (const LabeledTrace& t : traces) {
    const Key key{static_cast<int>(t.key.cell.method), t.key.cell.n_c, t.key.cell.p};
    const double target = relative ? epsilon * t.trace.front().opt_error : epsilon;
    groups[key].push_back(first_hit(t.trace, target));
    cells[key] = t.key.cell;
  }
  std::vector<SummaryRow> rows;
  for (const auto& [key, hits] : groups) {
    SummaryRow row;
    row.cell = cells[key];
    row.epsilon = epsilon;
    row.relative = relative;
    row.seeds = static_cast<int>(hits.size());
    const double m = static_cast<double>(hits.size());
    for (const FirstHit& h : hits) {
      row.grads_mean += h.grad_evals / m;
      row.comms_mean += h.comm_rounds / m;
      row.censored += h.censored ? 1 : 0;
    }
    if (hits.size() > 1) {
      double vg = 0.0, vc = 0.0;
      for (const FirstHit& h : hits) {
        vg += (h.grad_evals - row.grads_mean) * (h.grad_evals - row.grads_mean);
        vc += (h.comm_rounds - row.comms_mean) * (h.comm_rounds - row.comms_mean);
      }
      row.grads_se = std::sqrt(vg / (m - 1.0) / m);
      row.comms_se = std::sqrt(vc / (m - 1.0) / m);
    }
    rows.push_back(row);
  }
  return rows;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << kSummaryHeader << '\n';
  for (const SummaryRow& r : rows) {
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", to_string(r.cell.method), r.cell.n_c, num(r.cell.p),
                       num(r.epsilon), r.relative ? 1 : 0, r.seeds, r.censored, num(r.grads_mean), num(r.grads_se),
                       num(r.comms_mean), num(r.comms_se));
  }
}

}  // namespace rgta
