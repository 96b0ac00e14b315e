#include "gridtwin/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace gridtwin {

namespace {

std::set<std::pair<int, int>> normalize_edges(const std::vector<std::pair<int, int>>& edges,
                                              int n, const char* side) {
  std::set<std::pair<int, int>> out;
  for (const auto& [a, b] : edges) {
    require(a >= 0 && a <= n && b >= 0 && b <= n, Errc::universe_mismatch,
            std::string(side) + " edge endpoint outside bus range");
    require(a != b, Errc::universe_mismatch, std::string(side) + " edge is a self-loop");
    out.emplace(std::min(a, b), std::max(a, b));
  }
  return out;
}

}  // namespace

TopologyScore compare_edge_sets(const std::vector<std::pair<int, int>>& estimated,
                                const std::vector<std::pair<int, int>>& truth, int n) {
  const auto est = normalize_edges(estimated, n, "estimated");
  const auto ref = normalize_edges(truth, n, "reference");

  TopologyScore score;
  for (const auto& e : est) {
    if (ref.count(e)) {
      ++score.true_positives;
    } else {
      ++score.false_positives;
    }
  }
  for (const auto& e : ref) {
    if (!est.count(e)) ++score.false_negatives;
  }
  const int predicted = score.true_positives + score.false_positives;
  const int expected = score.true_positives + score.false_negatives;
  score.precision = predicted == 0 ? 1.0 : double(score.true_positives) / predicted;
  score.recall = expected == 0 ? 1.0 : double(score.true_positives) / expected;
  return score;
}

TopologyScore compare_topology(const AdjacencyEstimate& estimate,
                               const RadialNetwork& truth) {
  require(estimate.bus_count == truth.branch_count(), Errc::universe_mismatch,
          "estimate and reference network cover different bus sets");
  std::vector<std::pair<int, int>> est = estimate.edges;
  for (int bus : estimate.root_adjacent) est.emplace_back(0, bus);
  return compare_edge_sets(est, truth.topology().edges(), truth.branch_count());
}

ErrorSummary relative_errors(const Eigen::VectorXd& r_est, const Eigen::VectorXd& x_est,
                             const RadialNetwork& truth) {
  const int n = truth.branch_count();
  require(r_est.size() == n && x_est.size() == n, Errc::dimension_mismatch,
          "estimate vectors must cover every branch");

  ErrorSummary summary;
  summary.rows.resize(n);
  const int depth_count = truth.topology().max_depth();
  summary.by_layer.assign(depth_count, {});
  std::vector<int> layer_sizes(depth_count, 0);

  for (int j = 1; j <= n; ++j) {
    BranchErrorRow row;
    row.branch = j;
    row.depth = truth.topology().depth(j);
    row.rel_r = 100.0 * std::abs(r_est(j - 1) - truth.resistance(j)) / truth.resistance(j);
    row.rel_x = 100.0 * std::abs(x_est(j - 1) - truth.reactance(j)) / truth.reactance(j);
    summary.rows[j - 1] = row;

    summary.max_rel_r = std::max(summary.max_rel_r, row.rel_r);
    summary.max_rel_x = std::max(summary.max_rel_x, row.rel_x);
    summary.mean_rel_r += row.rel_r / n;
    summary.mean_rel_x += row.rel_x / n;

    LayerErrorStat& stat = summary.by_layer[row.depth - 1];
    stat.depth = row.depth;
    stat.mean_rel_r += row.rel_r;
    stat.mean_rel_x += row.rel_x;
    stat.max_rel_r = std::max(stat.max_rel_r, row.rel_r);
    stat.max_rel_x = std::max(stat.max_rel_x, row.rel_x);
    ++layer_sizes[row.depth - 1];
  }
  for (int d = 0; d < depth_count; ++d) {
    if (layer_sizes[d] > 0) {
      summary.by_layer[d].mean_rel_r /= layer_sizes[d];
      summary.by_layer[d].mean_rel_x /= layer_sizes[d];
    }
    summary.by_layer[d].depth = d + 1;
  }
  return summary;
}

ErrorSummary relative_errors(const SweepResult& result, const RadialNetwork& truth) {
  ErrorSummary summary = relative_errors(result.r(), result.x(), truth);
  for (std::size_t j = 0; j < result.estimates.size(); ++j) {
    summary.rows[j].confidence = result.estimates[j].confidence;
  }
  return summary;
}

Eigen::VectorXd normalize_minmax(const Eigen::VectorXd& values) {
  require(values.size() >= 1, Errc::invalid_argument, "normalize_minmax: empty input");
  const double lo = values.minCoeff();
  const double hi = values.maxCoeff();
  require(hi > lo, Errc::constant_row, "normalize_minmax: all entries coincide");
  return (values.array() - lo) / (hi - lo);
}

}  // namespace gridtwin
