#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "gridtwin/common.hpp"

namespace gridtwin {

struct Bus {
  int id = 0;
  std::string name;
};

// Branch j delivers power to bus j (branches are labelled by their
// downstream bus, so ids run 1..n).
struct Branch {
  int id = 0;
  int parent = 0;
  double r = 0.0;  // p.u. resistance
  double x = 0.0;  // p.u. reactance
};

// Rooted tree over buses 0..n with the substation at bus 0.  Stores the
// parent/child structure, depth layers and root-to-leaf order, and exposes
// the reduced incidence algebra used throughout the estimators.
class TreeTopology {
 public:
  TreeTopology() = default;

  // parent[j-1] is the upstream bus of branch j, j = 1..n.
  static TreeTopology from_parents(const std::vector<int>& parent);

  // Undirected edge list over buses 0..n; orientation is recovered by
  // rooting at bus 0.  Throws not_a_tree unless the edges form a spanning
  // tree of {0..n}.
  static TreeTopology from_edges(int n, const std::vector<std::pair<int, int>>& edges);

  int bus_count() const { return static_cast<int>(parent_.size()); }
  int branch_count() const { return bus_count() - 1; }

  int parent(int bus) const { return parent_.at(bus); }
  const std::vector<int>& children(int bus) const { return children_.at(bus); }
  bool is_leaf(int bus) const { return children_.at(bus).empty(); }

  // Buses on the path from `bus` up to (and excluding) the substation,
  // starting with `bus` itself.
  const std::vector<int>& path_to_root(int bus) const { return paths_.at(bus); }
  int depth(int bus) const { return depth_.at(bus); }
  int max_depth() const { return max_depth_; }
  // layers()[d] lists the buses at depth d, d = 1..max_depth().
  const std::vector<std::vector<int>>& layers() const { return layers_; }
  // Branch ids ordered so that every parent precedes its children.
  const std::vector<int>& order_root_to_leaves() const { return order_; }

  std::vector<std::pair<int, int>> edges() const;  // (parent, child) per branch

  // Reduced incidence matrix A (n x n): column j has -1 in row j and +1 in
  // row parent(j) when parent(j) != 0.
  Eigen::MatrixXd incidence() const;
  // Substation row a0 of the full incidence matrix.
  Eigen::VectorXd root_incidence() const;
  // B = A^{-1}; b_ij = -1 exactly when bus i lies on the path from bus j to
  // the substation (inclusive of j), else 0.
  Eigen::MatrixXd incidence_inverse() const;

  // out[j-1] = sum of values over the subtree rooted at bus j.  Equals
  // -A^{-1} * values.
  Eigen::VectorXd subtree_sums(const Eigen::VectorXd& values) const;
  // out[j-1] = sum of values over path_to_root(j).  Equals -A^{-T} * values.
  Eigen::VectorXd path_sums(const Eigen::VectorXd& values) const;

 private:
  void finalize();  // fills children/depth/layers/paths/order from parent_

  std::vector<int> parent_;                 // size n+1, parent_[0] = -1
  std::vector<std::vector<int>> children_;  // size n+1
  std::vector<int> depth_;                  // size n+1, depth_[0] = 0
  std::vector<std::vector<int>> layers_;    // size max_depth_+1, layers_[0] empty
  std::vector<std::vector<int>> paths_;     // size n+1, paths_[0] empty
  std::vector<int> order_;                  // size n
  int max_depth_ = 0;
};

// Catalogue of admissible resistance/reactance ratios for the line types
// present in a feeder.
class ConductorLibrary {
 public:
  ConductorLibrary() = default;
  explicit ConductorLibrary(std::vector<double> ratios);

  int size() const { return static_cast<int>(ratios_.size()); }
  bool empty() const { return ratios_.empty(); }
  double ratio(int index) const { return ratios_.at(index); }
  const std::vector<double>& ratios() const { return ratios_; }

  // Index of the ratio closest to r/x (ties -> lower index).
  int nearest(double ratio) const;

 private:
  std::vector<double> ratios_;
};

class RadialNetwork {
 public:
  RadialNetwork() = default;

  // Validates and assembles a radial network.  Bus ids must be contiguous
  // 0..n; branch ids must cover 1..n exactly once; impedances must be
  // positive; the parent relation must form a tree rooted at bus 0.
  static RadialNetwork build(std::vector<Bus> buses, std::vector<Branch> branches);

  const TreeTopology& topology() const { return topology_; }
  int bus_count() const { return topology_.bus_count(); }
  int branch_count() const { return topology_.branch_count(); }

  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<Branch>& branches() const { return branches_; }  // index j-1
  const Branch& branch(int id) const { return branches_.at(id - 1); }

  double resistance(int branch_id) const { return branch(branch_id).r; }
  double reactance(int branch_id) const { return branch(branch_id).x; }
  Eigen::VectorXd resistances() const;
  Eigen::VectorXd reactances() const;
  // Per-branch r/x ratios, index j-1.
  Eigen::VectorXd ratios() const;

  // Reactance-weighted Laplacian over buses 1..n: y_ij = -1/x_j when j is a
  // child of i, y_jj accumulates 1/x_k over branch j and its child branches.
  // Equals A diag(x)^{-1} A^T.
  Eigen::MatrixXd weighted_laplacian() const;

  // Sensitivity of the Laplacian fit to per-branch ratio deviations d:
  // entry (i,j) is d_i - d_c on the path step below i towards j (c the child
  // of i on that path), d_j on the diagonal, zero off the tree paths.
  // Equals A diag(d) A^{-1}.
  Eigen::MatrixXd ratio_deviation_matrix(const Eigen::VectorXd& deviations) const;

 private:
  TreeTopology topology_;
  std::vector<Bus> buses_;        // by id
  std::vector<Branch> branches_;  // by id, index j-1
};

}  // namespace gridtwin
