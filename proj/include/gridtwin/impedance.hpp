#pragma once

#include <Eigen/Dense>
#include <array>
#include <map>
#include <utility>
#include <vector>

#include "gridtwin/powerflow.hpp"
#include "gridtwin/topology.hpp"

namespace gridtwin {

// Per-branch regression data: for every interval the squared-voltage drop
// across the branch, the receiving-end flows and the squared voltage at the
// receiving bus.
struct BranchSamples {
  Eigen::VectorXd dv;  // v_parent - v_bus
  Eigen::VectorXd p;   // receiving-end active flow
  Eigen::VectorXd q;   // receiving-end reactive flow
  Eigen::VectorXd v;   // squared voltage at the receiving bus
};

enum class EstimateConfidence { ok, underdetermined, low };

struct BranchEstimate {
  double r = 0.0;
  double x = 0.0;
  int library_index = -1;  // chosen ratio, -1 when none applies
  double objective = 0.0;  // residual norm (LS) or absolute sum (LAD)
  EstimateConfidence confidence = EstimateConfidence::ok;
  Eigen::VectorXd residuals;                 // mismatch at the estimate
  std::vector<double> per_ratio_objectives;  // best objective per library entry
};

// Mismatch of the voltage-drop equation at reactance x and ratio g:
//   e = dv - 2 (g p + q) x - (1 + g^2) (p^2 + q^2) / v * x^2,
// returned as coefficients (c0, c1, c2) of c0 + c1 x + c2 x^2.
std::array<double, 3> mismatch_coefficients(double ratio, double dv, double p,
                                            double q, double v);
double branch_mismatch(double x, double ratio, double dv, double p, double q, double v);

struct RegressionOptions {
  double x_max = 1.0;  // upper bound of the reactance search interval
};

// Exact minimizers of the one-branch mismatch over x in [0, x_max] for each
// library ratio; the returned estimate carries the best ratio overall (ties
// within 1e-12 -> lower index).  A single interval yields the smaller
// non-negative root and an `underdetermined` flag.  Raises
// AllCandidatesDegenerate when the data carries no impedance information
// (no power ever flows on the branch).
BranchEstimate solve_branch_ls(const BranchSamples& data, const ConductorLibrary& library,
                               const RegressionOptions& options = {});
BranchEstimate solve_branch_lad(const BranchSamples& data, const ConductorLibrary& library,
                                const RegressionOptions& options = {});
// Same search dropping the quadratic loss term from the model (first-order
// voltage-drop fit); kept for comparing against the exact variants.
BranchEstimate solve_branch_ls_linearized(const BranchSamples& data,
                                          const ConductorLibrary& library,
                                          const RegressionOptions& options = {});

// Unconstrained first-order fit of (r, x) without any ratio information:
// minimizes sum (dv - 2 r p - 2 x q)^2.  Solved by SVD so nearly collinear
// p/q columns return the minimum-norm solution instead of blowing up.
std::pair<double, double> fit_rx_free(const BranchSamples& data);

enum class RegressionMethod { lad, ls, ls_linearized };

struct SweepOptions {
  RegressionMethod method = RegressionMethod::lad;
  RegressionOptions regression;
  // branch id -> (r, x) imposed instead of estimating (what-if studies).
  std::map<int, std::pair<double, double>> forced;
};

struct SweepResult {
  std::vector<BranchEstimate> estimates;  // index j-1
  FlowTable flows;                        // reconstructed branch flows
  Eigen::VectorXd r() const;
  Eigen::VectorXd x() const;
};

// Layer-by-layer impedance estimation from the leaves towards the
// substation: each layer's receiving flows follow from the deeper, already
// estimated branches, then every branch in the layer is regressed
// independently.  Branches whose data is degenerate fall back to the most
// common ratio seen so far (library median if none) with a floor reactance
// and are marked low-confidence.
SweepResult sweep(const TreeTopology& topology, const SampleSet& samples,
                  const ConductorLibrary& library, const SweepOptions& options = {});

// Roots an undirected spanning edge set at the substation.  Raises
// UnrootedTopology when the edges do not form a tree over buses 0..n.
TreeTopology orient_tree(int n, const std::vector<std::pair<int, int>>& edges);

// Convenience: append the substation attachments of an adjacency estimate
// and orient.
TreeTopology orient_adjacency(const AdjacencyEstimate& adjacency);

}  // namespace gridtwin
