#include "gridtwin/powerflow.hpp"

#include <cmath>
#include <mutex>
#include <random>
#include <thread>

namespace gridtwin {

namespace {
constexpr double kVoltageFloor = 1e-6;  // squared p.u.; below this the loss
                                        // terms are meaningless
}

SampleSet::SampleSet(Eigen::MatrixXd p, Eigen::MatrixXd q, Eigen::MatrixXd v,
                     Eigen::VectorXd v0)
    : p_(std::move(p)), q_(std::move(q)), v_(std::move(v)), v0_(std::move(v0)) {
  require(p_.rows() == q_.rows() && p_.rows() == v_.rows() && p_.rows() == v0_.size(),
          Errc::dimension_mismatch, "sample set: interval counts differ");
  require(p_.cols() == q_.cols() && p_.cols() == v_.cols(), Errc::dimension_mismatch,
          "sample set: bus counts differ");
  require(p_.rows() >= 1 && p_.cols() >= 1, Errc::invalid_argument,
          "sample set: need at least one interval and one bus");
  require(p_.allFinite() && q_.allFinite() && v_.allFinite() && v0_.allFinite(),
          Errc::invalid_argument, "sample set: non-finite entry");
  require((v_.array() > 0.0).all() && (v0_.array() > 0.0).all(), Errc::invalid_argument,
          "sample set: squared voltages must be positive");
}

Snapshot SampleSet::snapshot(int k) const {
  require(k >= 0 && k < size(), Errc::invalid_argument, "snapshot index out of range");
  return Snapshot{p_.row(k).transpose(), q_.row(k).transpose(), v_.row(k).transpose(),
                  v0_(k)};
}

void SampleSet::require_identifiable() const {
  const int need = 3 * bus_count();
  require(size() >= need, Errc::too_few_samples,
          "need at least " + std::to_string(need) + " intervals for " +
              std::to_string(bus_count()) + " buses, got " + std::to_string(size()));
}

FlowTable::FlowTable(int samples, int branches)
    : receiving_p(Eigen::MatrixXd::Zero(samples, branches)),
      receiving_q(Eigen::MatrixXd::Zero(samples, branches)),
      sending_p(Eigen::MatrixXd::Zero(samples, branches)),
      sending_q(Eigen::MatrixXd::Zero(samples, branches)),
      receiving_known(branches, 0),
      sending_known(branches, 0) {}

void update_receiving_flows(const TreeTopology& topology, int layer,
                            const SampleSet& samples, FlowTable& flows) {
  require(layer >= 1 && layer <= topology.max_depth(), Errc::invalid_argument,
          "layer out of range");
  for (int j : topology.layers()[layer]) {
    Eigen::VectorXd sum_p = -samples.p().col(j - 1);
    Eigen::VectorXd sum_q = -samples.q().col(j - 1);
    for (int child : topology.children(j)) {
      require(flows.sending_ready(child), Errc::missing_child_flow,
              "branch " + std::to_string(j) + ": sending flow of child " +
                  std::to_string(child) + " not yet known");
      sum_p += flows.sending_p.col(child - 1);
      sum_q += flows.sending_q.col(child - 1);
    }
    flows.receiving_p.col(j - 1) = sum_p;
    flows.receiving_q.col(j - 1) = sum_q;
    flows.receiving_known[j - 1] = 1;
  }
}

void update_sending_flows(const TreeTopology& topology, int layer,
                          const SampleSet& samples, const Eigen::VectorXd& r,
                          const Eigen::VectorXd& x, FlowTable& flows) {
  require(layer >= 1 && layer <= topology.max_depth(), Errc::invalid_argument,
          "layer out of range");
  require(r.size() == topology.branch_count() && x.size() == topology.branch_count(),
          Errc::dimension_mismatch, "impedance vectors must cover every branch");
  for (int j : topology.layers()[layer]) {
    require(flows.receiving_ready(j), Errc::missing_child_flow,
            "branch " + std::to_string(j) + ": receiving flow not yet known");
    const auto pj = flows.receiving_p.col(j - 1).array();
    const auto qj = flows.receiving_q.col(j - 1).array();
    const auto vj = samples.v().col(j - 1).array();
    require((vj > kVoltageFloor).all(), Errc::zero_voltage,
            "branch " + std::to_string(j) + ": squared voltage at or below floor");
    const Eigen::ArrayXd current2 = (pj.square() + qj.square()) / vj;
    flows.sending_p.col(j - 1) = (pj + r(j - 1) * current2).matrix();
    flows.sending_q.col(j - 1) = (qj + x(j - 1) * current2).matrix();
    flows.sending_known[j - 1] = 1;
  }
}

FlowTable reconstruct_flows(const TreeTopology& topology, const SampleSet& samples,
                            const Eigen::VectorXd& r, const Eigen::VectorXd& x) {
  FlowTable flows(samples.size(), topology.branch_count());
  for (int layer = topology.max_depth(); layer >= 1; --layer) {
    update_receiving_flows(topology, layer, samples, flows);
    update_sending_flows(topology, layer, samples, r, x, flows);
  }
  return flows;
}

namespace {

// One backward pass at fixed squared voltages v: receiving/sending flows for
// every branch, deepest layer first.
void backward_sweep(const RadialNetwork& net, const Eigen::VectorXd& p,
                    const Eigen::VectorXd& q, const Eigen::VectorXd& v,
                    Eigen::VectorXd& rp, Eigen::VectorXd& rq, Eigen::VectorXd& sp,
                    Eigen::VectorXd& sq) {
  const TreeTopology& t = net.topology();
  const auto& order = t.order_root_to_leaves();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int j = *it;
    double sum_p = -p(j - 1);
    double sum_q = -q(j - 1);
    for (int child : t.children(j)) {
      sum_p += sp(child - 1);
      sum_q += sq(child - 1);
    }
    rp(j - 1) = sum_p;
    rq(j - 1) = sum_q;
    require(v(j - 1) > kVoltageFloor, Errc::zero_voltage,
            "voltage collapsed at bus " + std::to_string(j));
    const double current2 = (sum_p * sum_p + sum_q * sum_q) / v(j - 1);
    sp(j - 1) = sum_p + net.resistance(j) * current2;
    sq(j - 1) = sum_q + net.reactance(j) * current2;
  }
}

}  // namespace

ExactSolution solve_exact(const RadialNetwork& net, const Eigen::VectorXd& p,
                          const Eigen::VectorXd& q, double v0,
                          const ExactSolveOptions& options) {
  const int n = net.branch_count();
  require(p.size() == n && q.size() == n, Errc::dimension_mismatch,
          "injection vectors must cover buses 1..n");
  require(v0 > 0.0, Errc::invalid_argument, "substation voltage must be positive");
  const TreeTopology& t = net.topology();

  Eigen::VectorXd v = Eigen::VectorXd::Constant(n, v0);
  Eigen::VectorXd rp(n), rq(n), sp(n), sq(n);

  int iterations = 0;
  bool converged = false;
  while (iterations < options.max_iterations) {
    ++iterations;
    backward_sweep(net, p, q, v, rp, rq, sp, sq);

    // forward pass: each bus solves its own branch-drop quadratic
    //   v_j^2 - (v_i - 2(r P + x Q)) v_j + (r^2 + x^2)(P^2 + Q^2) = 0
    // and takes the high-voltage root.
    double delta = 0.0;
    for (int j : t.order_root_to_leaves()) {
      const int i = t.parent(j);
      const double vi = (i == 0) ? v0 : v(i - 1);
      const double r = net.resistance(j);
      const double x = net.reactance(j);
      const double pj = rp(j - 1);
      const double qj = rq(j - 1);
      const double c = vi - 2.0 * (r * pj + x * qj);
      const double loss = (r * r + x * x) * (pj * pj + qj * qj);
      const double disc = c * c - 4.0 * loss;
      require(disc >= 0.0 && c > 0.0, Errc::non_convergence,
              "no physical voltage solution at bus " + std::to_string(j));
      const double vj = 0.5 * (c + std::sqrt(disc));
      delta = std::max(delta, std::abs(vj - v(j - 1)));
      v(j - 1) = vj;
    }
    if (delta <= options.tolerance) {
      converged = true;
      break;
    }
  }
  require(converged, Errc::non_convergence,
          "voltage sweep did not settle in " + std::to_string(options.max_iterations) +
              " iterations");

  // final flows consistent with the converged voltages
  backward_sweep(net, p, q, v, rp, rq, sp, sq);
  ExactSolution out;
  out.v = v;
  out.iterations = iterations;
  out.flows = FlowTable(1, n);
  out.flows.receiving_p.row(0) = rp.transpose();
  out.flows.receiving_q.row(0) = rq.transpose();
  out.flows.sending_p.row(0) = sp.transpose();
  out.flows.sending_q.row(0) = sq.transpose();
  std::fill(out.flows.receiving_known.begin(), out.flows.receiving_known.end(), 1);
  std::fill(out.flows.sending_known.begin(), out.flows.sending_known.end(), 1);
  return out;
}

Eigen::VectorXd solve_linearized(const RadialNetwork& net, const Eigen::VectorXd& p,
                                 const Eigen::VectorXd& q, double v0) {
  const int n = net.branch_count();
  require(p.size() == n && q.size() == n, Errc::dimension_mismatch,
          "injection vectors must cover buses 1..n");
  const TreeTopology& t = net.topology();
  // v = v0*1 + 2 * pathsum(r .* subtreesum(p) + x .* subtreesum(q))
  const Eigen::VectorXd branch_p = t.subtree_sums(p);
  const Eigen::VectorXd branch_q = t.subtree_sums(q);
  const Eigen::VectorXd drops = net.resistances().cwiseProduct(branch_p) +
                                net.reactances().cwiseProduct(branch_q);
  return Eigen::VectorXd::Constant(n, v0) + 2.0 * t.path_sums(drops);
}

double flow_residual(const RadialNetwork& net, const Eigen::VectorXd& p,
                     const Eigen::VectorXd& q, double v0, const Eigen::VectorXd& v,
                     const FlowTable& flows) {
  const TreeTopology& t = net.topology();
  const int n = net.branch_count();
  double worst = 0.0;
  for (int j = 1; j <= n; ++j) {
    double sum_p = -p(j - 1), sum_q = -q(j - 1);
    for (int child : t.children(j)) {
      sum_p += flows.sending_p(0, child - 1);
      sum_q += flows.sending_q(0, child - 1);
    }
    const double pj = flows.receiving_p(0, j - 1);
    const double qj = flows.receiving_q(0, j - 1);
    worst = std::max(worst, std::abs(pj - sum_p));
    worst = std::max(worst, std::abs(qj - sum_q));

    const double r = net.resistance(j), x = net.reactance(j);
    const double current2 = (pj * pj + qj * qj) / v(j - 1);
    worst = std::max(worst, std::abs(flows.sending_p(0, j - 1) - pj - r * current2));
    worst = std::max(worst, std::abs(flows.sending_q(0, j - 1) - qj - x * current2));

    const double vi = (t.parent(j) == 0) ? v0 : v(t.parent(j) - 1);
    const double drop = 2.0 * (r * pj + x * qj) + (r * r + x * x) * current2;
    worst = std::max(worst, std::abs(vi - v(j - 1) - drop));
  }
  return worst;
}

GeneratedData generate_samples(const RadialNetwork& net, const Eigen::MatrixXd& p,
                               const Eigen::MatrixXd& q, const Eigen::VectorXd& v0,
                               const NoiseSpec& noise, std::uint64_t seed, int threads) {
  const int n = net.branch_count();
  const int samples = static_cast<int>(p.rows());
  require(q.rows() == samples && v0.size() == samples, Errc::dimension_mismatch,
          "injection matrices and v0 must agree on interval count");
  require(p.cols() == n && q.cols() == n, Errc::dimension_mismatch,
          "injection matrices must cover buses 1..n");
  require(noise.outlier_fraction >= 0.0 && noise.outlier_fraction <= 1.0,
          Errc::invalid_argument, "outlier fraction outside [0, 1]");

  Eigen::MatrixXd clean_v(samples, n);
  Eigen::MatrixXd meas_p = p, meas_q = q, meas_v(samples, n);
  std::vector<FlowTable> flows(samples);

  auto run_interval = [&](int k) {
    const ExactSolution sol =
        solve_exact(net, p.row(k).transpose(), q.row(k).transpose(), v0(k));
    clean_v.row(k) = sol.v.transpose();
    flows[k] = sol.flows;

    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(k)));
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd vk = sol.v;
    if (noise.sigma_v > 0.0) {
      for (int j = 0; j < n; ++j) vk(j) += noise.sigma_v * gauss(rng);
    }
    if (noise.sigma_p > 0.0) {
      for (int j = 0; j < n; ++j) meas_p(k, j) += noise.sigma_p * gauss(rng);
    }
    if (noise.sigma_q > 0.0) {
      for (int j = 0; j < n; ++j) meas_q(k, j) += noise.sigma_q * gauss(rng);
    }
    if (noise.outlier_fraction > 0.0) {
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      if (unit(rng) < noise.outlier_fraction) {
        std::uniform_int_distribution<int> pick(0, n - 1);
        const int bus = pick(rng);
        const double sign = (unit(rng) < 0.5) ? -1.0 : 1.0;
        vk(bus) *= 1.0 + sign * noise.outlier_magnitude;
      }
    }
    for (int j = 0; j < n; ++j) meas_v(k, j) = std::max(vk(j), 1e-9);
  };

  const int workers = std::max(1, std::min(threads, samples));
  if (workers == 1) {
    for (int k = 0; k < samples; ++k) run_interval(k);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w]() {
        try {
          for (int k = w; k < samples; k += workers) run_interval(k);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  GeneratedData out;
  out.clean = SampleSet(p, q, clean_v, v0);
  out.measured = SampleSet(std::move(meas_p), std::move(meas_q), std::move(meas_v), v0);
  out.flows = std::move(flows);
  return out;
}

}  // namespace gridtwin
