#pragma once

#include <array>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "rgta/method.hpp"

namespace rgta {

enum class TopologyKind { kComplete, kStar, kLine };

TopologyKind parse_topology_kind(std::string_view name);
std::string_view to_string(TopologyKind kind);

struct Edge {
  int a;
  int b;
  auto operator<=>(const Edge&) const = default;
};

// Undirected simple graph on nodes 0..n-1. Edges are stored normalized (a < b)
// and sorted.
class Topology {
 public:
  Topology(int n, std::vector<Edge> edges);

  int size() const { return n_; }
  const std::vector<Edge>& edges() const { return edges_; }
  bool has_edge(int i, int j) const;
  std::vector<int> degrees() const;
  bool connected() const;
  bool is_complete() const;

 private:
  int n_;
  std::vector<Edge> edges_;
};

// complete: all pairs; star: hub is node 0; line: path 0-1-...-(n-1).
Topology build_topology(TopologyKind kind, int n);

enum class MixingScheme { kMetropolis, kEqualComplete };

MixingScheme parse_mixing_scheme(std::string_view name);
std::string_view to_string(MixingScheme scheme);

// Symmetric doubly-stochastic weight matrix with positive diagonal, together
// with its connectivity parameter beta = ||W - 11^T/n||_2.
class MixingMatrix {
 public:
  // Validates symmetry, stochasticity, nonnegativity and w_ii > 0.
  explicit MixingMatrix(Eigen::MatrixXd w);
  // Additionally requires w_ij == 0 whenever (i, j) is not an edge.
  MixingMatrix(Eigen::MatrixXd w, const Topology& pattern);

  static MixingMatrix identity(int n);

  const Eigen::MatrixXd& weights() const { return w_; }
  double beta() const { return beta_; }
  int size() const { return static_cast<int>(w_.rows()); }
  bool is_identity() const { return identity_; }
  // Row-major copy of the nonzero pattern; used when at most half the
  // entries are nonzero.
  const Eigen::SparseMatrix<double, Eigen::RowMajor>& sparse_weights() const { return sparse_; }
  bool prefers_sparse() const { return prefers_sparse_; }

  static constexpr double kTolerance = 1e-12;

 private:
  Eigen::MatrixXd w_;
  double beta_;
  bool identity_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> sparse_;
  bool prefers_sparse_;
};

MixingMatrix mixing_matrix(const Topology& topology, MixingScheme scheme);

// Largest singular value of W - 11^T/n.
double beta_of(const Eigen::Ref<const Eigen::MatrixXd>& w);

// W^reps * X, realized as reps successive neighbor-averaging rounds.
Eigen::MatrixXd consensus_apply(const MixingMatrix& w, const Eigen::MatrixXd& x, int reps);

// In-place variant for the simulation loop. scratch is resized as needed.
void consensus_apply_inplace(const MixingMatrix& w, Eigen::MatrixXd& x, int reps,
                             Eigen::MatrixXd& scratch);

// The four communication matrices of the generalized tracking update plus the
// number of consensus rounds per communicating iteration.
struct CommunicationSet {
  std::array<MixingMatrix, 4> w;
  int n_c;
  Method tag;
  // Slots 1 and 2 (resp. 3 and 4) hold the same matrix, so the update can
  // mix the combined term once.
  bool shared_x = false;
  bool shared_y = false;

  const MixingMatrix& operator[](int slot) const { return w[slot]; }
};

// RGTA-1 -> (W, I, W, I); RGTA-2 -> (W, W, W, I); RGTA-3 -> (W, W, W, W).
// Baseline methods get (W, W, W, W); only Scaffnew reads it.
CommunicationSet communication_set(Method method, const MixingMatrix& w, int n_c);

CommunicationSet custom_communication_set(const std::array<MixingMatrix, 4>& w, int n_c);

}  // namespace rgta
