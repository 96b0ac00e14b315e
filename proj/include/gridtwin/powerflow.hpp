#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "gridtwin/network.hpp"

namespace gridtwin {

// One metering interval: net injections and squared voltage magnitudes at
// buses 1..n plus the substation squared voltage.  Loads enter as negative
// injections.
struct Snapshot {
  Eigen::VectorXd p;
  Eigen::VectorXd q;
  Eigen::VectorXd v;  // squared magnitudes
  double v0 = 1.0;
};

// Column-major collection of K snapshots over the same bus set.  p, q, v are
// K x n; v0 has one entry per interval.
class SampleSet {
 public:
  SampleSet() = default;
  SampleSet(Eigen::MatrixXd p, Eigen::MatrixXd q, Eigen::MatrixXd v, Eigen::VectorXd v0);

  int size() const { return static_cast<int>(p_.rows()); }       // K
  int bus_count() const { return static_cast<int>(p_.cols()); }  // n

  const Eigen::MatrixXd& p() const { return p_; }
  const Eigen::MatrixXd& q() const { return q_; }
  const Eigen::MatrixXd& v() const { return v_; }
  const Eigen::VectorXd& v0() const { return v0_; }

  Snapshot snapshot(int k) const;

  // Estimation-grade sample count: at least 3n intervals and at least one.
  void require_identifiable() const;

 private:
  Eigen::MatrixXd p_, q_, v_;
  Eigen::VectorXd v0_;
};

// Per-branch complex power at both ends of every branch, K x n each
// (column j-1 belongs to branch j).  `receiving` is measured at the
// downstream bus, `sending` at the upstream bus; they differ by the branch
// loss.  The `known` flags track which columns a partial reconstruction has
// filled in so far.
struct FlowTable {
  FlowTable() = default;
  FlowTable(int samples, int branches);

  Eigen::MatrixXd receiving_p, receiving_q;
  Eigen::MatrixXd sending_p, sending_q;
  std::vector<char> receiving_known, sending_known;  // index j-1

  bool receiving_ready(int branch_id) const { return receiving_known[branch_id - 1]; }
  bool sending_ready(int branch_id) const { return sending_known[branch_id - 1]; }
};

// Fills receiving-end flows for every branch ending at `layer` depth:
// the branch picks up its children's sending-end flows minus the local
// injection.  Children's sending flows must already be known.
void update_receiving_flows(const TreeTopology& topology, int layer,
                            const SampleSet& samples, FlowTable& flows);

// Fills sending-end flows for the same layer given branch impedances:
// sending = receiving + (r,x) * (P^2 + Q^2) / v at the downstream bus.
void update_sending_flows(const TreeTopology& topology, int layer,
                          const SampleSet& samples, const Eigen::VectorXd& r,
                          const Eigen::VectorXd& x, FlowTable& flows);

// Full deepest-to-shallowest pass of the two updates above.
FlowTable reconstruct_flows(const TreeTopology& topology, const SampleSet& samples,
                            const Eigen::VectorXd& r, const Eigen::VectorXd& x);

struct ExactSolveOptions {
  int max_iterations = 200;
  double tolerance = 1e-12;  // max |v change| between sweeps
};

struct ExactSolution {
  Eigen::VectorXd v;  // squared magnitudes, buses 1..n
  FlowTable flows;    // single-sample table (K = 1)
  int iterations = 0;
};

// Nonlinear branch-flow solve by alternating backward (flows) and forward
// (voltages) sweeps until the squared voltages settle.
ExactSolution solve_exact(const RadialNetwork& net, const Eigen::VectorXd& p,
                          const Eigen::VectorXd& q, double v0,
                          const ExactSolveOptions& options = {});

// Loss-free linear model: v = v0*1 - 2*B^T (R Bp + X Bq) with B = A^{-1};
// evaluated with two tree sweeps, no matrix assembly.
Eigen::VectorXd solve_linearized(const RadialNetwork& net, const Eigen::VectorXd& p,
                                 const Eigen::VectorXd& q, double v0);

// Largest absolute violation of the branch-flow equations at (v, flows).
double flow_residual(const RadialNetwork& net, const Eigen::VectorXd& p,
                     const Eigen::VectorXd& q, double v0, const Eigen::VectorXd& v,
                     const FlowTable& flows);

// Measurement corruption applied after the network solve.  sigma_* are
// standard deviations of additive Gaussian noise; a fraction of intervals
// additionally gets a gross voltage error of relative size outlier_magnitude
// at one random bus (meter fault model).
struct NoiseSpec {
  double sigma_v = 0.0;
  double sigma_p = 0.0;
  double sigma_q = 0.0;
  double outlier_fraction = 0.0;
  double outlier_magnitude = 0.05;
};

struct GeneratedData {
  SampleSet measured;             // noise applied
  SampleSet clean;                // exact solve results
  std::vector<FlowTable> flows;   // one single-sample table per interval
};

// Solves the exact model for each injection row and applies the noise spec.
// Interval k derives all randomness from mix_seed(seed, k), so results are
// identical no matter how many threads are used.
GeneratedData generate_samples(const RadialNetwork& net, const Eigen::MatrixXd& p,
                               const Eigen::MatrixXd& q, const Eigen::VectorXd& v0,
                               const NoiseSpec& noise = {}, std::uint64_t seed = 0,
                               int threads = 1);

}  // namespace gridtwin
