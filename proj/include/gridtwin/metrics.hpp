#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "gridtwin/impedance.hpp"
#include "gridtwin/network.hpp"
#include "gridtwin/topology.hpp"

namespace gridtwin {

struct TopologyScore {
  int true_positives = 0;
  int false_positives = 0;
  int false_negatives = 0;
  double precision = 0.0;  // 1.0 when nothing was predicted
  double recall = 0.0;     // 1.0 when nothing was expected
};

// Edge-set agreement over buses 0..n; both sides are normalized to
// unordered pairs before matching.
TopologyScore compare_edge_sets(const std::vector<std::pair<int, int>>& estimated,
                                const std::vector<std::pair<int, int>>& truth, int n);

// Scores an adjacency estimate (bus-to-bus edges plus substation
// attachments) against the edges of the reference network.
TopologyScore compare_topology(const AdjacencyEstimate& estimate,
                               const RadialNetwork& truth);

struct BranchErrorRow {
  int branch = 0;
  int depth = 0;
  double rel_r = 0.0;  // percent: 100 * |est - true| / true
  double rel_x = 0.0;
  EstimateConfidence confidence = EstimateConfidence::ok;
};

struct LayerErrorStat {
  int depth = 0;
  double mean_rel_r = 0.0, max_rel_r = 0.0;
  double mean_rel_x = 0.0, max_rel_x = 0.0;
};

struct ErrorSummary {
  std::vector<BranchErrorRow> rows;       // index j-1
  std::vector<LayerErrorStat> by_layer;   // depth 1..D
  double max_rel_r = 0.0, max_rel_x = 0.0;
  double mean_rel_r = 0.0, mean_rel_x = 0.0;
};

ErrorSummary relative_errors(const Eigen::VectorXd& r_est, const Eigen::VectorXd& x_est,
                             const RadialNetwork& truth);
ErrorSummary relative_errors(const SweepResult& result, const RadialNetwork& truth);

// Affine rescaling of a vector onto [0, 1].  Raises ConstantRow when all
// entries coincide.
Eigen::VectorXd normalize_minmax(const Eigen::VectorXd& values);

// Aggregate of one identification run, ready for serialization.
struct EvaluationReport {
  std::string network_name;
  TopologyScore topology;
  ErrorSummary impedance;
  double laplacian_lambda = 0.0;
  double laplacian_residual = 0.0;
  double laplacian_condition = 0.0;
  int sample_count = 0;
  std::string method;  // branch regression used
  // Wall-clock seconds per pipeline stage, in execution order.
  std::vector<std::pair<std::string, double>> runtimes;
};

}  // namespace gridtwin
