#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rgta/engine.hpp"
#include "rgta/method.hpp"
#include "rgta/network.hpp"

namespace rgta {

enum class ProblemKind { kQuadratic, kLogistic };

struct ProblemSpec {
  ProblemKind kind = ProblemKind::kQuadratic;
  int n = 16;
  // quadratic
  int d = 10;
  double kappa = 1e4;
  std::uint64_t seed = 1;
  // logistic
  std::string dataset;
  std::optional<int> declared_dim;

  bool operator==(const ProblemSpec&) const = default;
};

struct NetworkSpec {
  TopologyKind kind = TopologyKind::kStar;
  MixingScheme scheme = MixingScheme::kMetropolis;

  bool operator==(const NetworkSpec&) const = default;
};

// INI sections: [problem] [network] [methods] [tuning] [budget] [run].
// The full key list is documented in the README.
struct ExperimentConfig {
  ProblemSpec problem;
  NetworkSpec network;

  std::vector<Method> methods{Method::kRgta3};
  std::vector<int> nc_grid{1};
  std::vector<double> p_grid{1.0};
  // Fixed step size; when unset, `run` tunes first.
  std::optional<double> alpha;
  double secondary_alpha = 1.0;
  int local_steps = 1;

  // Step sizes 2^{-t}, t = t_min, t_min + 1/k, ..., t_max with k points per unit of t.
  int t_min = 0;
  int t_max = 20;
  int points_per_octave = 1;

  Budget budget;
  std::vector<std::uint64_t> seeds{0};
  std::vector<double> epsilons;
  std::string out_dir = "out";
  int threads = 1;

  bool operator==(const ExperimentConfig&) const;

  // Tuning grid in descending order (largest step first).
  std::vector<double> alpha_grid() const;

  // Throws ConfigError when a grid is empty or a value is out of range.
  void validate() const;
};

ExperimentConfig parse_config(std::istream& in);
ExperimentConfig parse_config_string(const std::string& text);
// Relative dataset paths are resolved against the config file's directory.
ExperimentConfig load_config(const std::filesystem::path& path);

std::string serialize_config(const ExperimentConfig& config);

}  // namespace rgta
