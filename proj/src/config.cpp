#include "rgta/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "rgta/errors.hpp"

namespace rgta {
namespace {

namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(fmt::format("{}: '{}' is not a finite number", key, text));
}

long to_long(const std::string& key, const std::string& text) {
  long exact = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), exact);
  if (ec == std::errc() && end == text.data() + text.size()) return exact;
  // integral values written as 1e5
  const double v = to_double(key, text);
  if (v != std::floor(v) || std::abs(v) > 9.2e18) throw ConfigError(fmt::format("{}: '{}' is not an integer", key, text));
  return static_cast<long>(v);
}

std::uint64_t to_u64(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(text, &used);
    if (used == text.size() && text.front() != '-') return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(fmt::format("{}: '{}' is not a nonnegative integer", key, text));
}

std::string num(double v) { return fmt::format("{}", v); }

template <typename T, typename F>
std::string join(const std::vector<T>& values, F&& format) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += format(values[i]);
  }
  return out;
}

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"problem", {"type", "n", "d", "kappa", "seed", "dataset", "declared_dim"}},
      {"network", {"kind", "scheme"}},
      {"methods", {"names", "n_c", "p", "alpha", "secondary_alpha", "local_steps"}},
      {"tuning", {"t_min", "t_max", "points_per_octave"}},
      {"budget", {"max_grad_evals", "max_comm_rounds", "max_iterations"}},
      {"run", {"seeds", "epsilon", "out_dir", "threads"}},
  };
  return keys;
}

}  // namespace

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  return problem == o.problem && network == o.network && methods == o.methods && nc_grid == o.nc_grid &&
         p_grid == o.p_grid && alpha == o.alpha && secondary_alpha == o.secondary_alpha &&
         local_steps == o.local_steps && t_min == o.t_min && t_max == o.t_max &&
         points_per_octave == o.points_per_octave && budget.max_grad_evals == o.budget.max_grad_evals &&
         budget.max_comm_rounds == o.budget.max_comm_rounds && budget.max_iterations == o.budget.max_iterations &&
         seeds == o.seeds && epsilons == o.epsilons && out_dir == o.out_dir && threads == o.threads;
}

std::vector<double> ExperimentConfig::alpha_grid() const {
  std::vector<double> grid;
  const int steps = (t_max - t_min) * points_per_octave;
  for (int j = 0; j <= steps; ++j) {
    grid.push_back(std::exp2(-(t_min + static_cast<double>(j) / points_per_octave)));
  }
  return grid;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (problem.n < 1) fail("problem.n must be >= 1");
  if (problem.kind == ProblemKind::kQuadratic) {
    if (problem.d < 1) fail("problem.d must be >= 1");
    if (!(problem.kappa >= 1.0)) fail("problem.kappa must be >= 1");
  } else {
    if (problem.dataset.empty()) fail("problem.dataset is required for logistic problems");
    if (problem.declared_dim && *problem.declared_dim < 1) fail("problem.declared_dim must be >= 1");
  }
  if (methods.empty()) fail("methods.names must not be empty");
  for (Method m : methods) {
    if (m == Method::kCustom) fail("custom communication sets cannot be configured from a file");
  }
  if (nc_grid.empty()) fail("methods.n_c must not be empty");
  for (int nc : nc_grid) {
    if (nc < 1) fail("methods.n_c values must be >= 1");
  }
  if (p_grid.empty()) fail("methods.p must not be empty");
  for (double p : p_grid) {
    if (!(p > 0.0 && p <= 1.0)) fail("methods.p values must lie in (0, 1]");
  }
  if (alpha && !(*alpha > 0.0)) fail("methods.alpha must be > 0");
  if (!(secondary_alpha > 0.0)) fail("methods.secondary_alpha must be > 0");
  if (local_steps < 1) fail("methods.local_steps must be >= 1");
  if (t_min < 0 || t_max < t_min) fail("tuning needs 0 <= t_min <= t_max");
  if (points_per_octave < 1) fail("tuning.points_per_octave must be >= 1");
  if (budget.max_grad_evals < 1 || budget.max_comm_rounds < 1 || budget.max_iterations < 1) {
    fail("budgets must be positive");
  }
  if (seeds.empty()) fail("run.seeds must not be empty");
  for (double e : epsilons) {
    if (!(e > 0.0)) fail("run.epsilon values must be > 0");
  }
  if (out_dir.empty()) fail("run.out_dir must not be empty");
  if (threads < 1) fail("run.threads must be >= 1");
}

ExperimentConfig parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(e.message(), e.line());
  }
  for (const auto& [section, body] : tree) {
    const auto it = schema().find(section);
    if (it == schema().end()) {
      if (body.empty()) throw ConfigError("key '" + section + "' must be inside a section");
      throw ConfigError("unknown section [" + section + "]");
    }
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) throw ConfigError("unknown key " + section + "." + key);
    }
  }

  auto get = [&](const std::string& path) -> std::optional<std::string> {
    if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(path, '.'))) return trim(*v);
    return std::nullopt;
  };

  ExperimentConfig c;
  try {
    if (auto v = get("problem.type")) {
      if (*v == "quadratic") c.problem.kind = ProblemKind::kQuadratic;
      else if (*v == "logistic") c.problem.kind = ProblemKind::kLogistic;
      else throw ConfigError("problem.type must be quadratic or logistic, got '" + *v + "'");
    }
    if (auto v = get("problem.n")) c.problem.n = static_cast<int>(to_long("problem.n", *v));
    if (auto v = get("problem.d")) c.problem.d = static_cast<int>(to_long("problem.d", *v));
    if (auto v = get("problem.kappa")) c.problem.kappa = to_double("problem.kappa", *v);
    if (auto v = get("problem.seed")) c.problem.seed = to_u64("problem.seed", *v);
    if (auto v = get("problem.dataset")) c.problem.dataset = *v;
    if (auto v = get("problem.declared_dim")) c.problem.declared_dim = static_cast<int>(to_long("problem.declared_dim", *v));

    if (auto v = get("network.kind")) c.network.kind = parse_topology_kind(*v);
    if (auto v = get("network.scheme")) c.network.scheme = parse_mixing_scheme(*v);

    if (auto v = get("methods.names")) {
      c.methods.clear();
      for (const auto& name : split_list(*v)) c.methods.push_back(parse_method(name));
    }
    if (auto v = get("methods.n_c")) {
      c.nc_grid.clear();
      for (const auto& s : split_list(*v)) c.nc_grid.push_back(static_cast<int>(to_long("methods.n_c", s)));
    }
    if (auto v = get("methods.p")) {
      c.p_grid.clear();
      for (const auto& s : split_list(*v)) c.p_grid.push_back(to_double("methods.p", s));
    }
    if (auto v = get("methods.alpha")) c.alpha = to_double("methods.alpha", *v);
    if (auto v = get("methods.secondary_alpha")) c.secondary_alpha = to_double("methods.secondary_alpha", *v);
    if (auto v = get("methods.local_steps")) c.local_steps = static_cast<int>(to_long("methods.local_steps", *v));

    if (auto v = get("tuning.t_min")) c.t_min = static_cast<int>(to_long("tuning.t_min", *v));
    if (auto v = get("tuning.t_max")) c.t_max = static_cast<int>(to_long("tuning.t_max", *v));
    if (auto v = get("tuning.points_per_octave")) {
      c.points_per_octave = static_cast<int>(to_long("tuning.points_per_octave", *v));
    }

    c.budget.max_grad_evals = c.problem.kind == ProblemKind::kQuadratic ? 100'000 : 10'000;
    if (auto v = get("budget.max_grad_evals")) c.budget.max_grad_evals = to_long("budget.max_grad_evals", *v);
    if (auto v = get("budget.max_comm_rounds")) c.budget.max_comm_rounds = to_long("budget.max_comm_rounds", *v);
    if (auto v = get("budget.max_iterations")) c.budget.max_iterations = to_long("budget.max_iterations", *v);

    if (auto v = get("run.seeds")) {
      c.seeds.clear();
      for (const auto& s : split_list(*v)) c.seeds.push_back(to_u64("run.seeds", s));
    }
    if (auto v = get("run.epsilon")) {
      c.epsilons.clear();
      for (const auto& s : split_list(*v)) c.epsilons.push_back(to_double("run.epsilon", s));
    }
    if (auto v = get("run.out_dir")) c.out_dir = *v;
    if (auto v = get("run.threads")) c.threads = static_cast<int>(to_long("run.threads", *v));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  ExperimentConfig c = parse_config(in);
  if (!c.problem.dataset.empty()) {
    const std::filesystem::path dataset(c.problem.dataset);
    if (dataset.is_relative()) c.problem.dataset = (path.parent_path() / dataset).lexically_normal().string();
  }
  return c;
}

std::string serialize_config(const ExperimentConfig& c) {
  std::string out;
  auto line = [&out](const std::string& key, const std::string& value) { out += key + " = " + value + "\n"; };

  out += "[problem]\n";
  line("type", c.problem.kind == ProblemKind::kQuadratic ? "quadratic" : "logistic");
  line("n", std::to_string(c.problem.n));
  line("d", std::to_string(c.problem.d));
  line("kappa", num(c.problem.kappa));
  line("seed", std::to_string(c.problem.seed));
  if (!c.problem.dataset.empty()) line("dataset", c.problem.dataset);
  if (c.problem.declared_dim) line("declared_dim", std::to_string(*c.problem.declared_dim));

  out += "\n[network]\n";
  line("kind", std::string(to_string(c.network.kind)));
  line("scheme", std::string(to_string(c.network.scheme)));

  out += "\n[methods]\n";
  line("names", join(c.methods, [](Method m) { return to_string(m); }));
  line("n_c", join(c.nc_grid, [](int v) { return std::to_string(v); }));
  line("p", join(c.p_grid, num));
  if (c.alpha) line("alpha", num(*c.alpha));
  line("secondary_alpha", num(c.secondary_alpha));
  line("local_steps", std::to_string(c.local_steps));

  out += "\n[tuning]\n";
  line("t_min", std::to_string(c.t_min));
  line("t_max", std::to_string(c.t_max));
  line("points_per_octave", std::to_string(c.points_per_octave));

  out += "\n[budget]\n";
  line("max_grad_evals", std::to_string(c.budget.max_grad_evals));
  line("max_comm_rounds", std::to_string(c.budget.max_comm_rounds));
  line("max_iterations", std::to_string(c.budget.max_iterations));

  out += "\n[run]\n";
  line("seeds", join(c.seeds, [](std::uint64_t s) { return std::to_string(s); }));
  if (!c.epsilons.empty()) line("epsilon", join(c.epsilons, num));
  line("out_dir", c.out_dir);
  line("threads", std::to_string(c.threads));
  return out;
}

}  // namespace rgta
