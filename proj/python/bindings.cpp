#include <memory>
#include <sstream>
#include <string>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "rgta/config.hpp"
#include "rgta/engine.hpp"
#include "rgta/errors.hpp"
#include "rgta/harness.hpp"
#include "rgta/network.hpp"
#include "rgta/problems.hpp"
#include "rgta/rate_analysis.hpp"

namespace py = pybind11;
using namespace rgta;

namespace {

py::dict trace_to_dict(const MetricsTrace& trace) {
  const auto m = static_cast<Eigen::Index>(trace.records.size());
  Eigen::VectorXd opt(m), cx(m), cy(m);
  Eigen::Matrix<long, Eigen::Dynamic, 1> k(m), grads(m), comms(m), theta(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const TraceRecord& r = trace.records[static_cast<std::size_t>(i)];
    k(i) = r.k;
    grads(i) = r.grad_evals;
    comms(i) = r.comm_rounds;
    opt(i) = r.opt_error;
    cx(i) = r.cons_error_x;
    cy(i) = r.cons_error_y;
    theta(i) = r.theta;
  }
  py::dict d;
  d["k"] = k;
  d["grad_evals"] = grads;
  d["comm_rounds"] = comms;
  d["opt_error"] = opt;
  d["cons_error_x"] = cx;
  d["cons_error_y"] = cy;
  d["theta"] = theta;
  d["diverged"] = trace.diverged;
  return d;
}

py::dict point_to_dict(const ComplexityPoint& c) {
  py::dict d;
  d["method"] = to_string(c.method);
  d["beta"] = c.beta;
  d["p"] = c.p;
  d["n_c"] = c.n_c;
  d["alpha_star"] = c.alpha_star;
  d["rho"] = c.rho;
  d["comp"] = c.comp;
  d["comm"] = c.comm;
  d["epsilon"] = c.epsilon;
  return d;
}

RateParams make_params(double mu, double L, int n, const std::array<double, 4>& betas, double p, int n_c,
                       double alpha, double norm_z1_minus_i) {
  return RateParams{mu, L, n, betas, norm_z1_minus_i, p, n_c, alpha};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Randomized gradient tracking simulator and rate analysis";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NonConvergenceError>(m, "NonConvergenceError", PyExc_RuntimeError);

  // network ---------------------------------------------------------------
  m.def(
      "build_topology",
      [](const std::string& kind, int n) {
        const Topology topology = build_topology(parse_topology_kind(kind), n);
        std::vector<std::pair<int, int>> edges;
        for (const Edge& e : topology.edges()) edges.emplace_back(e.a, e.b);
        return edges;
      },
      py::arg("kind"), py::arg("n"), "Edge list (i, j), i < j, of a complete, star or line graph.");

  py::class_<MixingMatrix>(m, "MixingMatrix")
      .def(py::init<Eigen::MatrixXd>(), py::arg("weights"))
      .def_property_readonly("weights", &MixingMatrix::weights)
      .def_property_readonly("beta", &MixingMatrix::beta)
      .def_property_readonly("size", &MixingMatrix::size);

  m.def(
      "mixing_matrix",
      [](const std::string& kind, int n, const std::string& scheme) {
        return mixing_matrix(build_topology(parse_topology_kind(kind), n), parse_mixing_scheme(scheme));
      },
      py::arg("kind"), py::arg("n"), py::arg("scheme") = "metropolis");
  m.def(
      "beta_of", [](const Eigen::MatrixXd& w) { return beta_of(w); }, py::arg("w"));
  m.def("consensus_apply", &consensus_apply, py::arg("w"), py::arg("x"), py::arg("reps"));

  // problems --------------------------------------------------------------
  py::class_<GradientOracle>(m, "GradientOracle")
      .def_property_readonly("nodes", &GradientOracle::nodes)
      .def_property_readonly("dim", &GradientOracle::dim)
      .def_property_readonly("L", &GradientOracle::lipschitz)
      .def_property_readonly("mu", &GradientOracle::strong_convexity)
      .def(
          "local_gradient",
          [](const GradientOracle& o, int node, const Eigen::VectorXd& x) { return o.local_gradient(node, x); },
          py::arg("node"), py::arg("x"))
      .def(
          "local_value",
          [](const GradientOracle& o, int node, const Eigen::VectorXd& x) { return o.local_value(node, x); },
          py::arg("node"), py::arg("x"))
      .def("global_gradient", &GradientOracle::global_gradient, py::arg("x"))
      .def("global_value", &GradientOracle::global_value, py::arg("x"))
      .def(
          "centralized_optimum",
          [](const GradientOracle& o, double tol, long max_iterations) {
            return centralized_optimum(o, OptimumOptions{tol, max_iterations});
          },
          py::arg("tol") = 1e-12, py::arg("max_iterations") = 100'000'000L);

  py::class_<QuadraticOracle, GradientOracle>(m, "QuadraticOracle")
      .def_property_readonly("kappa_target", [](const QuadraticOracle& o) { return o.problem().kappa_target; })
      .def_property_readonly("kappa_achieved", [](const QuadraticOracle& o) { return o.problem().kappa_achieved; })
      .def("optimum", [](const QuadraticOracle& o) { return quadratic_optimum(o.problem()); });

  m.def(
      "generate_quadratic",
      [](int n, int d, double kappa, std::uint64_t seed) {
        return std::make_unique<QuadraticOracle>(generate_quadratic(n, d, kappa, seed));
      },
      py::arg("n"), py::arg("d"), py::arg("kappa"), py::arg("seed"));

  py::class_<LogisticOracle, GradientOracle>(m, "LogisticOracle")
      .def_property_readonly("sizes", [](const LogisticOracle& o) {
        std::vector<std::size_t> s;
        for (int i = 0; i < o.nodes(); ++i) s.push_back(o.problem().samples(i));
        return s;
      });

  m.def(
      "logistic_from_libsvm",
      [](const std::string& text, int n, std::optional<int> declared_dim) {
        std::istringstream in(text);
        const Dataset data = parse_libsvm(in, declared_dim);
        return std::make_unique<LogisticOracle>(make_logistic_problem(data, partition(data, n)));
      },
      py::arg("text"), py::arg("n"), py::arg("declared_dim") = std::nullopt,
      "Parses LIBSVM text and splits it contiguously across n nodes.");

  m.def(
      "parse_libsvm",
      [](const std::string& text, std::optional<int> declared_dim) {
        std::istringstream in(text);
        const Dataset data = parse_libsvm(in, declared_dim);
        return py::make_tuple(data.labels, Eigen::MatrixXd(data.features));
      },
      py::arg("text"), py::arg("declared_dim") = std::nullopt, "Returns (labels, dense feature matrix).");

  m.def(
      "partition_sizes", [](std::size_t rows, int n) { return partition(rows, n).sizes(); }, py::arg("rows"),
      py::arg("n"));

  // engine ----------------------------------------------------------------
  m.def(
      "run",
      [](const GradientOracle& oracle, const MixingMatrix& w, const std::string& method, double alpha, int n_c,
         double p, std::uint64_t seed, long max_grad_evals, long max_comm_rounds, long max_iterations,
         double secondary_alpha, int local_steps, const Eigen::VectorXd& x_star) {
        RunConfig rc;
        rc.method = parse_method(method);
        rc.alpha = alpha;
        rc.n_c = n_c;
        rc.p = p;
        rc.seed = seed;
        rc.budget = Budget{max_grad_evals, max_comm_rounds, max_iterations};
        rc.secondary_alpha = secondary_alpha;
        rc.local_steps = local_steps;
        MetricsTrace trace;
        {
          py::gil_scoped_release release;
          trace = run(oracle, rc, communication_set(rc.method, w, n_c), x_star);
        }
        return trace_to_dict(trace);
      },
      py::arg("oracle"), py::arg("w"), py::arg("method"), py::arg("alpha"), py::arg("n_c") = 1, py::arg("p") = 1.0,
      py::arg("seed") = 0, py::arg("max_grad_evals") = 100'000L,
      py::arg("max_comm_rounds") = std::numeric_limits<long>::max(),
      py::arg("max_iterations") = std::numeric_limits<long>::max(), py::arg("secondary_alpha") = 1.0,
      py::arg("local_steps") = 1, py::arg("x_star"),
      "Runs one method from the zero vector; returns the trace as a dict of arrays.");

  // rate analysis ---------------------------------------------------------
  m.def(
      "build_A_method",
      [](const std::string& method, double mu, double L, int n, double beta, double p, int n_c, double alpha) {
        return Eigen::MatrixXd(build_A_method(parse_method(method), mu, L, n, beta, p, n_c, alpha).A);
      },
      py::arg("method"), py::arg("mu"), py::arg("L"), py::arg("n"), py::arg("beta"), py::arg("p"), py::arg("n_c"),
      py::arg("alpha"));
  m.def(
      "build_A_general",
      [](double mu, double L, int n, const std::array<double, 4>& betas, double p, int n_c, double alpha,
         double norm_z1_minus_i) {
        return Eigen::MatrixXd(build_A_general(make_params(mu, L, n, betas, p, n_c, alpha, norm_z1_minus_i)).A);
      },
      py::arg("mu"), py::arg("L"), py::arg("n"), py::arg("betas"), py::arg("p"), py::arg("n_c"), py::arg("alpha"),
      py::arg("norm_z1_minus_i") = 2.0);
  m.def(
      "spectral_radius", [](const Eigen::Matrix3d& a) { return spectral_radius(a); }, py::arg("a"));
  m.def(
      "step_bound_general",
      [](double mu, double L, int n, const std::array<double, 4>& betas, double p, int n_c) {
        return step_bound_general(make_params(mu, L, n, betas, p, n_c, 0.0, 2.0));
      },
      py::arg("mu"), py::arg("L"), py::arg("n"), py::arg("betas"), py::arg("p"), py::arg("n_c"));
  m.def(
      "step_bound_method",
      [](const std::string& method, double mu, double L, double beta, double p, int n_c) {
        return step_bound_method(parse_method(method), mu, L, beta, p, n_c);
      },
      py::arg("method"), py::arg("mu"), py::arg("L"), py::arg("beta"), py::arg("p"), py::arg("n_c"));
  m.def(
      "rate_upper_bound",
      [](double mu, double L, int n, const std::array<double, 4>& betas, double p, int n_c, double alpha) {
        return rate_upper_bound(make_params(mu, L, n, betas, p, n_c, alpha, 2.0));
      },
      py::arg("mu"), py::arg("L"), py::arg("n"), py::arg("betas"), py::arg("p"), py::arg("n_c"), py::arg("alpha"));
  m.def(
      "complexity_point",
      [](const std::string& method, double mu, double L, int n, double beta, double p, int n_c, double epsilon,
         std::vector<double> grid) {
        if (grid.empty()) grid = alpha_grid(L);
        return point_to_dict(complexity_point(parse_method(method), mu, L, n, beta, p, n_c, epsilon, grid));
      },
      py::arg("method"), py::arg("mu"), py::arg("L"), py::arg("n"), py::arg("beta"), py::arg("p"), py::arg("n_c"),
      py::arg("epsilon"), py::arg("alpha_grid") = std::vector<double>{});
  m.def("alpha_grid", &alpha_grid, py::arg("L"), py::arg("octaves") = 30, py::arg("points_per_octave") = 10);

  // harness ---------------------------------------------------------------
  m.def(
      "run_experiment",
      [](const std::filesystem::path& config_path, std::optional<std::filesystem::path> out_dir) {
        ExperimentConfig c = load_config(config_path);
        const std::filesystem::path out = out_dir ? *out_dir : std::filesystem::path(c.out_dir);
        std::vector<std::filesystem::path> written;
        {
          py::gil_scoped_release release;
          written = run_experiment(c, out);
        }
        return written;
      },
      py::arg("config"), py::arg("out_dir") = std::nullopt,
      "Runs every cell of an INI experiment config; returns the trace paths.");
  m.def(
      "config_roundtrip", [](const std::string& text) { return serialize_config(parse_config_string(text)); },
      py::arg("text"), "Parses an INI config and serializes it back in canonical form.");
}
