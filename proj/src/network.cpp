#include "gridtwin/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gridtwin {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::parse_error: return "ParseError";
    case Errc::io_error: return "IoError";
    case Errc::cycle_detected: return "CycleDetected";
    case Errc::disconnected: return "Disconnected";
    case Errc::duplicate_downstream_bus: return "DuplicateDownstreamBus";
    case Errc::non_positive_impedance: return "NonPositiveImpedance";
    case Errc::not_a_tree: return "NotATree";
    case Errc::non_convergence: return "NonConvergence";
    case Errc::missing_child_flow: return "MissingChildFlow";
    case Errc::zero_voltage: return "ZeroVoltage";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::too_few_samples: return "TooFewSamples";
    case Errc::too_few_points: return "TooFewPoints";
    case Errc::ill_conditioned: return "IllConditioned";
    case Errc::singular_normal_matrix: return "SingularNormalMatrix";
    case Errc::degenerate_row: return "DegenerateRow";
    case Errc::no_cluster_found: return "NoClusterFound";
    case Errc::all_candidates_degenerate: return "AllCandidatesDegenerate";
    case Errc::unrooted_topology: return "UnrootedTopology";
    case Errc::universe_mismatch: return "UniverseMismatch";
    case Errc::constant_row: return "ConstantRow";
  }
  return "UnknownError";
}

TreeTopology TreeTopology::from_parents(const std::vector<int>& parent) {
  const int n = static_cast<int>(parent.size());
  TreeTopology t;
  t.parent_.assign(n + 1, -1);
  for (int j = 1; j <= n; ++j) {
    const int p = parent[j - 1];
    require(p >= 0 && p <= n, Errc::invalid_argument,
            "branch " + std::to_string(j) + " references unknown bus " + std::to_string(p));
    require(p != j, Errc::cycle_detected,
            "branch " + std::to_string(j) + " is a self-loop");
    t.parent_[j] = p;
  }
  t.finalize();
  return t;
}

TreeTopology TreeTopology::from_edges(int n, const std::vector<std::pair<int, int>>& edges) {
  require(static_cast<int>(edges.size()) == n, Errc::not_a_tree,
          "expected " + std::to_string(n) + " edges for " + std::to_string(n + 1) +
              " buses, got " + std::to_string(edges.size()));
  std::vector<std::vector<int>> adjacency(n + 1);
  for (const auto& [a, b] : edges) {
    require(a >= 0 && a <= n && b >= 0 && b <= n, Errc::not_a_tree,
            "edge endpoint outside bus range");
    require(a != b, Errc::not_a_tree, "self-loop edge");
    adjacency[a].push_back(b);
    adjacency[b].push_back(a);
  }
  std::vector<int> parent(n + 1, -2);
  std::vector<int> queue{0};
  parent[0] = -1;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const int bus = queue[head];
    for (int next : adjacency[bus]) {
      if (parent[next] == -2) {
        parent[next] = bus;
        queue.push_back(next);
      }
    }
  }
  require(static_cast<int>(queue.size()) == n + 1, Errc::not_a_tree,
          "edges do not connect every bus to the substation");
  std::vector<int> by_branch(n);
  for (int j = 1; j <= n; ++j) by_branch[j - 1] = parent[j];
  return from_parents(by_branch);
}

void TreeTopology::finalize() {
  const int buses = static_cast<int>(parent_.size());
  const int n = buses - 1;
  children_.assign(buses, {});
  for (int j = 1; j <= n; ++j) children_[parent_[j]].push_back(j);
  for (auto& c : children_) std::sort(c.begin(), c.end());

  // breadth-first from the substation; any bus left unvisited sits on a
  // parent cycle (every bus has exactly one upstream branch).
  depth_.assign(buses, -1);
  depth_[0] = 0;
  order_.clear();
  order_.reserve(n);
  std::vector<int> queue{0};
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const int bus = queue[head];
    for (int child : children_[bus]) {
      depth_[child] = depth_[bus] + 1;
      order_.push_back(child);
      queue.push_back(child);
    }
  }
  for (int j = 1; j <= n; ++j) {
    if (depth_[j] < 0) {
      raise(Errc::cycle_detected,
            "bus " + std::to_string(j) + " is not fed from the substation");
    }
  }

  max_depth_ = 0;
  for (int j = 1; j <= n; ++j) max_depth_ = std::max(max_depth_, depth_[j]);
  layers_.assign(max_depth_ + 1, {});
  for (int j : order_) layers_[depth_[j]].push_back(j);

  paths_.assign(buses, {});
  for (int j : order_) {
    paths_[j].reserve(depth_[j]);
    paths_[j].push_back(j);
    const int p = parent_[j];
    if (p != 0) {
      paths_[j].insert(paths_[j].end(), paths_[p].begin(), paths_[p].end());
    }
  }
}

std::vector<std::pair<int, int>> TreeTopology::edges() const {
  std::vector<std::pair<int, int>> out;
  out.reserve(branch_count());
  for (int j = 1; j <= branch_count(); ++j) out.emplace_back(parent_[j], j);
  return out;
}

Eigen::MatrixXd TreeTopology::incidence() const {
  const int n = branch_count();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int j = 1; j <= n; ++j) {
    a(j - 1, j - 1) = -1.0;
    if (parent_[j] != 0) a(parent_[j] - 1, j - 1) = 1.0;
  }
  return a;
}

Eigen::VectorXd TreeTopology::root_incidence() const {
  const int n = branch_count();
  Eigen::VectorXd a0 = Eigen::VectorXd::Zero(n);
  for (int j = 1; j <= n; ++j) {
    if (parent_[j] == 0) a0(j - 1) = 1.0;
  }
  return a0;
}

Eigen::MatrixXd TreeTopology::incidence_inverse() const {
  const int n = branch_count();
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
  for (int j = 1; j <= n; ++j) {
    for (int i : paths_[j]) b(i - 1, j - 1) = -1.0;
  }
  return b;
}

Eigen::VectorXd TreeTopology::subtree_sums(const Eigen::VectorXd& values) const {
  const int n = branch_count();
  require(values.size() == n, Errc::dimension_mismatch, "subtree_sums: size mismatch");
  Eigen::VectorXd out = values;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    const int j = *it;
    if (parent_[j] != 0) out(parent_[j] - 1) += out(j - 1);
  }
  return out;
}

Eigen::VectorXd TreeTopology::path_sums(const Eigen::VectorXd& values) const {
  const int n = branch_count();
  require(values.size() == n, Errc::dimension_mismatch, "path_sums: size mismatch");
  Eigen::VectorXd out = values;
  for (int j : order_) {
    if (parent_[j] != 0) out(j - 1) += out(parent_[j] - 1);
  }
  return out;
}

ConductorLibrary::ConductorLibrary(std::vector<double> ratios) : ratios_(std::move(ratios)) {
  require(!ratios_.empty(), Errc::invalid_argument, "conductor library is empty");
  for (double g : ratios_) {
    require(std::isfinite(g) && g > 0.0, Errc::invalid_argument,
            "conductor ratios must be positive");
  }
}

int ConductorLibrary::nearest(double ratio) const {
  int best = 0;
  double best_gap = std::abs(ratios_[0] - ratio);
  for (int z = 1; z < size(); ++z) {
    const double gap = std::abs(ratios_[z] - ratio);
    if (gap < best_gap) {
      best = z;
      best_gap = gap;
    }
  }
  return best;
}

RadialNetwork RadialNetwork::build(std::vector<Bus> buses, std::vector<Branch> branches) {
  require(!buses.empty(), Errc::invalid_argument,
          "a network needs at least the substation bus");
  const int n = static_cast<int>(buses.size()) - 1;

  std::vector<Bus> by_bus(n + 1);
  std::vector<bool> seen_bus(n + 1, false);
  for (auto& bus : buses) {
    require(bus.id >= 0 && bus.id <= n, Errc::invalid_argument,
            "bus id " + std::to_string(bus.id) + " outside 0.." + std::to_string(n));
    require(!seen_bus[bus.id], Errc::invalid_argument,
            "duplicate bus id " + std::to_string(bus.id));
    seen_bus[bus.id] = true;
    by_bus[bus.id] = std::move(bus);
  }

  std::vector<Branch> by_branch(n);
  std::vector<bool> seen_branch(n + 1, false);
  for (auto& br : branches) {
    require(br.id >= 1 && br.id <= n, Errc::invalid_argument,
            "branch id " + std::to_string(br.id) + " outside 1.." + std::to_string(n));
    require(!seen_branch[br.id], Errc::duplicate_downstream_bus,
            "two branches feed bus " + std::to_string(br.id));
    seen_branch[br.id] = true;
    require(br.parent >= 0 && br.parent <= n, Errc::invalid_argument,
            "branch " + std::to_string(br.id) + " references unknown bus " +
                std::to_string(br.parent));
    require(std::isfinite(br.r) && std::isfinite(br.x) && br.r > 0.0 && br.x > 0.0,
            Errc::non_positive_impedance,
            "branch " + std::to_string(br.id) + " must have positive r and x");
    by_branch[br.id - 1] = std::move(br);
  }
  for (int j = 1; j <= n; ++j) {
    require(seen_branch[j], Errc::disconnected,
            "bus " + std::to_string(j) + " has no supplying branch");
  }

  std::vector<int> parent(n);
  for (int j = 1; j <= n; ++j) parent[j - 1] = by_branch[j - 1].parent;

  RadialNetwork net;
  net.topology_ = TreeTopology::from_parents(parent);
  net.buses_ = std::move(by_bus);
  net.branches_ = std::move(by_branch);
  return net;
}

Eigen::VectorXd RadialNetwork::resistances() const {
  Eigen::VectorXd r(branch_count());
  for (int j = 1; j <= branch_count(); ++j) r(j - 1) = branches_[j - 1].r;
  return r;
}

Eigen::VectorXd RadialNetwork::reactances() const {
  Eigen::VectorXd x(branch_count());
  for (int j = 1; j <= branch_count(); ++j) x(j - 1) = branches_[j - 1].x;
  return x;
}

Eigen::VectorXd RadialNetwork::ratios() const {
  Eigen::VectorXd g(branch_count());
  for (int j = 1; j <= branch_count(); ++j) g(j - 1) = branches_[j - 1].r / branches_[j - 1].x;
  return g;
}

Eigen::MatrixXd RadialNetwork::weighted_laplacian() const {
  const int n = branch_count();
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, n);
  for (int j = 1; j <= n; ++j) {
    const double w = 1.0 / branches_[j - 1].x;
    y(j - 1, j - 1) += w;
    const int i = branches_[j - 1].parent;
    if (i != 0) {
      y(i - 1, i - 1) += w;
      y(i - 1, j - 1) = -w;
      y(j - 1, i - 1) = -w;
    }
  }
  return y;
}

Eigen::MatrixXd RadialNetwork::ratio_deviation_matrix(const Eigen::VectorXd& deviations) const {
  const int n = branch_count();
  require(deviations.size() == n, Errc::dimension_mismatch,
          "ratio_deviation_matrix: need one deviation per branch");
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(n, n);
  const TreeTopology& t = topology_;
  for (int j = 1; j <= n; ++j) {
    const auto& path = t.path_to_root(j);
    delta(j - 1, j - 1) = deviations(j - 1);
    // walking up from j: between consecutive path buses c (lower) and i
    // (upper), bus i contributes d_i - d_c in column j.
    for (std::size_t step = 0; step + 1 < path.size(); ++step) {
      const int c = path[step];
      const int i = path[step + 1];
      delta(i - 1, j - 1) = deviations(i - 1) - deviations(c - 1);
    }
  }
  return delta;
}

}  // namespace gridtwin
