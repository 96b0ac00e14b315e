#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "gridtwin/powerflow.hpp"

namespace gridtwin {

struct FitOptions {
  double condition_limit = 1e12;  // reject the normal system beyond this
};

// Joint least-squares estimate of the reactance-weighted Laplacian and the
// common r/x ratio from voltage/injection intervals.
struct LaplacianEstimate {
  Eigen::MatrixXd y;     // symmetric n x n
  double lambda = 0.0;   // fitted common ratio
  double residual = 0.0; // sqrt of the summed squared mismatch at the optimum
  double condition = 0.0;  // 2-norm condition of the equilibrated normal matrix
  int samples = 0;
};

// Minimizes sum_k || Y (v_k - v0_k 1) - 2 lambda p_k - 2 q_k ||^2 over
// symmetric Y and scalar lambda via the normal equations on the upper
// triangle of Y.
LaplacianEstimate fit_laplacian(const SampleSet& samples, const FitOptions& options = {});

// Same objective without the symmetry constraint (every entry of Y free).
// Used by the robustness certificate, where the perturbation analysis is
// carried out on the unconstrained system.
struct FreeLaplacianFit {
  Eigen::MatrixXd y;
  double lambda = 0.0;
  double min_eigenvalue = 0.0;  // smallest eigenvalue of the normal matrix
};

FreeLaplacianFit fit_laplacian_free(const SampleSet& samples);

// Label one-dimensional points by density: a point is core when at least
// `min_neighbors` other points lie within `radius`; chains of cores closer
// than `radius` form clusters; non-core points within `radius` of a core
// join the nearest core's cluster (ties -> lower label).  Returns one label
// per input point, -1 for outliers; labels are numbered 0.. in order of the
// leftmost core of each cluster.
std::vector<int> dbscan_1d(const std::vector<double>& values, double radius,
                           int min_neighbors);

// Radius selection from the gamma-th nearest-neighbour distance curve: sort
// the per-point distances ascending and take the value at the knee (largest
// perpendicular distance to the straight line through the curve endpoints;
// ties -> larger index; flat curve -> last point).
double auto_radius(const std::vector<double>& values, int gamma);

struct ClusterOptions {
  int gamma = 0;        // minimum neighbour count; 0 -> max(4, ceil(0.05 n))
  double radius = 0.0;  // DBSCAN radius in normalized units; 0 -> auto per row
  bool per_row = true;  // false: cluster all off-diagonal entries jointly
};

struct RowDiagnostics {
  int bus = 0;            // row owner (1..n)
  int cluster_count = 0;  // DBSCAN clusters found in the row
  int outlier_count = 0;
  int connected_count = 0;  // entries flagged as connections
  double radius = 0.0;      // radius used for the row
  double boundary = 0.0;    // normalized threshold between groups
};

struct AdjacencyEstimate {
  int bus_count = 0;                       // n (buses 1..n)
  std::vector<std::pair<int, int>> edges;  // i < j, both in 1..n
  std::vector<int> root_adjacent;          // buses attached to the substation
  Eigen::MatrixXi labels;                  // symmetric 0/1, zero diagonal
  int gamma = 0;
  double radius = 0.0;  // 0 when chosen per row
  std::vector<RowDiagnostics> rows;
};

// Reads the bus-to-bus connections out of a fitted Laplacian by clustering
// each row's off-diagonal entries, keeping the most negative group, and
// symmetrizing; buses feeding each connected component are then flagged as
// substation-adjacent via their diagonal surplus.
AdjacencyEstimate recover_topology(const LaplacianEstimate& estimate,
                                   const ClusterOptions& options = {});

// A posteriori certificate for the heterogeneous-ratio error bound: with
// data following the linear model at per-branch ratios, the gap between the
// unconstrained fit and the true Laplacian is bounded by eps times the norm
// of the ratio-deviation matrix.
struct RobustnessCertificate {
  double lhs = 0.0;         // ||Y_fit - Y_true||_F
  double eps = 0.0;         // certified amplification factor
  double delta_norm = 0.0;  // ||ratio deviation matrix||_F
  bool holds = false;       // lhs <= eps * delta_norm
  double lambda_fit = 0.0;
  double lambda_mean = 0.0;   // injection-weighted reference ratio
  double min_eigenvalue = 0.0;
};

RobustnessCertificate verify_robustness_bound(const RadialNetwork& net,
                                              const SampleSet& samples);

}  // namespace gridtwin
