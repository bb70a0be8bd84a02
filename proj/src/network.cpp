#include "rgta/network.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include <Eigen/SVD>

namespace rgta {

namespace {

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

TopologyKind parse_topology_kind(std::string_view text) {
  const std::string name = lower(text);
  if (name == "complete") return TopologyKind::kComplete;
  if (name == "star") return TopologyKind::kStar;
  if (name == "line") return TopologyKind::kLine;
  throw std::invalid_argument("unknown topology kind '" + std::string(text) + "'");
}

std::string_view to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::kComplete: return "complete";
    case TopologyKind::kStar: return "star";
    case TopologyKind::kLine: return "line";
  }
  return "unknown";
}

MixingScheme parse_mixing_scheme(std::string_view text) {
  const std::string name = lower(text);
  if (name == "metropolis") return MixingScheme::kMetropolis;
  if (name == "equal_complete") return MixingScheme::kEqualComplete;
  throw std::invalid_argument("unknown mixing scheme '" + std::string(text) + "'");
}

std::string_view to_string(MixingScheme scheme) {
  return scheme == MixingScheme::kMetropolis ? "metropolis" : "equal_complete";
}

Topology::Topology(int n, std::vector<Edge> edges) : n_(n), edges_(std::move(edges)) {
  if (n <= 0) throw std::invalid_argument("topology needs at least one node");
  for (Edge& e : edges_) {
    if (e.a == e.b) throw std::invalid_argument("self-loop at node " + std::to_string(e.a));
    if (e.a < 0 || e.b < 0 || e.a >= n || e.b >= n) {
      throw std::invalid_argument("edge endpoint out of range");
    }
    if (e.a > e.b) std::swap(e.a, e.b);
  }
  std::sort(edges_.begin(), edges_.end());
  if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end()) {
    throw std::invalid_argument("duplicate edge");
  }
}

bool Topology::has_edge(int i, int j) const {
  if (i > j) std::swap(i, j);
  return std::binary_search(edges_.begin(), edges_.end(), Edge{i, j});
}

std::vector<int> Topology::degrees() const {
  std::vector<int> deg(n_, 0);
  for (const Edge& e : edges_) {
    ++deg[e.a];
    ++deg[e.b];
  }
  return deg;
}

bool Topology::connected() const {
  // union-find over the edge list
  std::vector<int> parent(n_);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  int components = n_;
  for (const Edge& e : edges_) {
    int ra = find(e.a), rb = find(e.b);
    if (ra != rb) {
      parent[ra] = rb;
      --components;
    }
  }
  return components == 1;
}

bool Topology::is_complete() const {
  return edges_.size() == static_cast<std::size_t>(n_) * (n_ - 1) / 2;
}

Topology build_topology(TopologyKind kind, int n) {
  if (n <= 0) throw std::invalid_argument("node count must be positive");
  if (n == 1 && kind != TopologyKind::kComplete) {
    throw std::invalid_argument("star and line topologies need n >= 2");
  }
  std::vector<Edge> edges;
  switch (kind) {
    case TopologyKind::kComplete:
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) edges.push_back({i, j});
      break;
    case TopologyKind::kStar:
      for (int j = 1; j < n; ++j) edges.push_back({0, j});
      break;
    case TopologyKind::kLine:
      for (int j = 0; j + 1 < n; ++j) edges.push_back({j, j + 1});
      break;
  }
  Topology topology(n, std::move(edges));
  if (!topology.connected()) throw std::logic_error("built-in topology is disconnected");
  return topology;
}

namespace {

void validate_weights(const Eigen::MatrixXd& w) {
  const double tol = MixingMatrix::kTolerance;
  if (w.rows() != w.cols() || w.rows() == 0) {
    throw std::invalid_argument("mixing matrix must be square and nonempty");
  }
  if (!w.allFinite()) throw std::invalid_argument("mixing matrix has non-finite entries");
  const Eigen::Index n = w.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(w(i, i) > 0.0)) throw std::invalid_argument("mixing matrix needs w_ii > 0");
    for (Eigen::Index j = 0; j < n; ++j) {
      if (w(i, j) < 0.0) throw std::invalid_argument("mixing matrix has a negative entry");
      if (std::abs(w(i, j) - w(j, i)) > tol) {
        throw std::invalid_argument("mixing matrix is not symmetric");
      }
    }
  }
  const Eigen::VectorXd rows = w.rowwise().sum();
  const Eigen::VectorXd cols = w.colwise().sum().transpose();
  if ((rows.array() - 1.0).abs().maxCoeff() > tol || (cols.array() - 1.0).abs().maxCoeff() > tol) {
    throw std::invalid_argument("mixing matrix is not doubly stochastic");
  }
}

}  // namespace

MixingMatrix::MixingMatrix(Eigen::MatrixXd w) : w_(std::move(w)) {
  validate_weights(w_);
  beta_ = beta_of(w_);
  identity_ = w_.isIdentity(0.0);
  sparse_ = w_.sparseView();
  prefers_sparse_ = 2 * sparse_.nonZeros() <= w_.size();
}

MixingMatrix::MixingMatrix(Eigen::MatrixXd w, const Topology& pattern) : MixingMatrix(std::move(w)) {
  if (pattern.size() != size()) throw std::invalid_argument("mixing matrix / topology size mismatch");
  for (int i = 0; i < size(); ++i) {
    for (int j = 0; j < size(); ++j) {
      if (i != j && w_(i, j) != 0.0 && !pattern.has_edge(i, j)) {
        throw std::invalid_argument("mixing matrix weight on a non-edge (" + std::to_string(i) +
                                    "," + std::to_string(j) + ")");
      }
    }
  }
}

MixingMatrix MixingMatrix::identity(int n) {
  return MixingMatrix(Eigen::MatrixXd::Identity(n, n));
}

MixingMatrix mixing_matrix(const Topology& topology, MixingScheme scheme) {
  if (!topology.connected()) throw std::invalid_argument("mixing matrix needs a connected topology");
  const int n = topology.size();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  if (scheme == MixingScheme::kEqualComplete) {
    if (!topology.is_complete()) {
      throw std::invalid_argument("equal_complete weights require the complete topology");
    }
    w.setConstant(1.0 / n);
    return MixingMatrix(std::move(w), topology);
  }
  const std::vector<int> deg = topology.degrees();
  for (const Edge& e : topology.edges()) {
    const double weight = 1.0 / (1.0 + std::max(deg[e.a], deg[e.b]));
    w(e.a, e.b) = weight;
    w(e.b, e.a) = weight;
  }
  for (int i = 0; i < n; ++i) {
    double off = 0.0;
    for (int j = 0; j < n; ++j)
      if (j != i) off += w(i, j);
    w(i, i) = 1.0 - off;
  }
  return MixingMatrix(std::move(w), topology);
}

double beta_of(const Eigen::Ref<const Eigen::MatrixXd>& w) {
  if (w.rows() != w.cols()) throw std::invalid_argument("beta_of needs a square matrix");
  const Eigen::Index n = w.rows();
  if (n == 0) return 0.0;
  Eigen::MatrixXd centered = w;
  centered.array() -= 1.0 / static_cast<double>(n);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
  return svd.singularValues()(0);
}

void consensus_apply_inplace(const MixingMatrix& w, Eigen::MatrixXd& x, int reps,
                             Eigen::MatrixXd& scratch) {
  if (x.rows() != w.size()) throw std::invalid_argument("consensus_apply dimension mismatch");
  if (reps < 0) throw std::invalid_argument("consensus_apply needs reps >= 0");
  if (w.is_identity()) return;
  for (int r = 0; r < reps; ++r) {
    if (w.prefers_sparse()) {
      const auto& sw = w.sparse_weights();
      scratch.setZero(x.rows(), x.cols());
      for (int i = 0; i < sw.outerSize(); ++i) {
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(sw, i); it; ++it) {
          scratch.row(i) += it.value() * x.row(it.col());
        }
      }
    } else {
      scratch.noalias() = w.weights() * x;
    }
    x.swap(scratch);
  }
}

Eigen::MatrixXd consensus_apply(const MixingMatrix& w, const Eigen::MatrixXd& x, int reps) {
  Eigen::MatrixXd out = x;
  Eigen::MatrixXd scratch;
  consensus_apply_inplace(w, out, reps, scratch);
  return out;
}

CommunicationSet communication_set(Method method, const MixingMatrix& w, int n_c) {
  if (n_c < 1) throw std::invalid_argument("n_c must be >= 1");
  const MixingMatrix id = MixingMatrix::identity(w.size());
  switch (method) {
    case Method::kRgta1: return {{w, id, w, id}, n_c, method, w.is_identity(), w.is_identity()};
    case Method::kRgta2: return {{w, w, w, id}, n_c, method, true, w.is_identity()};
    case Method::kRgta3:
    case Method::kGd:
    case Method::kFedAvg:
    case Method::kScaffold:
    case Method::kScaffnew: return {{w, w, w, w}, n_c, method, true, true};
    case Method::kCustom:
      break;
  }
  throw std::invalid_argument("communication_set: use custom_communication_set for custom methods");
}

CommunicationSet custom_communication_set(const std::array<MixingMatrix, 4>& w, int n_c) {
  if (n_c < 1) throw std::invalid_argument("n_c must be >= 1");
  for (const MixingMatrix& m : w) {
    if (m.size() != w[0].size()) throw std::invalid_argument("communication matrices differ in size");
  }
  return {w, n_c, Method::kCustom, w[0].weights() == w[1].weights(), w[2].weights() == w[3].weights()};
}

}  // namespace rgta
