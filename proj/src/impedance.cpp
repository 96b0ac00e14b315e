#include "gridtwin/impedance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gridtwin {

namespace {
constexpr double kVoltageFloor = 1e-6;
constexpr double kTieTolerance = 1e-12;   // objective ties prefer lower ratio index
constexpr double kFallbackReactance = 1e-6;
}  // namespace

std::array<double, 3> mismatch_coefficients(double ratio, double dv, double p, double q,
                                            double v) {
  require(v > kVoltageFloor, Errc::zero_voltage,
          "squared voltage at or below floor in branch regression");
  const double c1 = -2.0 * (ratio * p + q);
  const double c2 = -(1.0 + ratio * ratio) * (p * p + q * q) / v;
  return {dv, c1, c2};
}

double branch_mismatch(double x, double ratio, double dv, double p, double q, double v) {
  const auto c = mismatch_coefficients(ratio, dv, p, q, v);
  return c[0] + c[1] * x + c[2] * x * x;
}

namespace {

void check_branch_samples(const BranchSamples& data) {
  const auto K = data.dv.size();
  require(K >= 1, Errc::invalid_argument, "branch regression: no intervals");
  require(data.p.size() == K && data.q.size() == K && data.v.size() == K,
          Errc::dimension_mismatch, "branch regression: interval counts differ");
}

// Ascending real roots of c0 + c1 x + c2 x^2 (stable two-product form).
int quadratic_roots(double c0, double c1, double c2, double out[2]) {
  if (c2 == 0.0) {
    if (c1 == 0.0) return 0;
    out[0] = -c0 / c1;
    return 1;
  }
  const double disc = c1 * c1 - 4.0 * c2 * c0;
  if (disc < 0.0) return 0;
  const double s = std::sqrt(disc);
  const double qq = -0.5 * (c1 + std::copysign(s, c1 == 0.0 ? 1.0 : c1));
  double r1, r2;
  if (qq == 0.0) {
    r1 = r2 = 0.0;  // c1 == 0 and c0 == 0: double root at the origin
  } else {
    r1 = qq / c2;
    r2 = c0 / qq;
  }
  if (r1 > r2) std::swap(r1, r2);
  out[0] = r1;
  out[1] = r2;
  return 2;
}

// Real roots of d0 + d1 x + d2 x^2 + d3 x^3 via the companion matrix, with
// graceful degree reduction when the leading coefficients vanish.
int cubic_roots(double d0, double d1, double d2, double d3, double out[3]) {
  const double scale = std::max({std::abs(d0), std::abs(d1), std::abs(d2)});
  if (std::abs(d3) <= 1e-14 * std::max(scale, 1e-300)) {
    return quadratic_roots(d0, d1, d2, out);
  }
  Eigen::Matrix3d companion;
  companion << 0, 0, -d0 / d3,
               1, 0, -d1 / d3,
               0, 1, -d2 / d3;
  const Eigen::EigenSolver<Eigen::Matrix3d> eig(companion);
  int count = 0;
  for (int i = 0; i < 3; ++i) {
    const auto root = eig.eigenvalues()(i);
    if (std::abs(root.imag()) <= 1e-8 * (1.0 + std::abs(root.real()))) {
      out[count++] = root.real();
    }
  }
  std::sort(out, out + count);
  return count;
}

struct CandidateFit {
  double x = 0.0;
  double objective = std::numeric_limits<double>::infinity();
  bool underdetermined = false;
};

// Per-interval polynomial coefficients for one library ratio.
struct CoefficientTable {
  Eigen::VectorXd c0, c1, c2;
  double information = 0.0;  // sum of c1^2 + c2^2; zero means x is invisible
};

CoefficientTable build_coefficients(const BranchSamples& data, double ratio,
                                    bool drop_loss_term) {
  const int K = static_cast<int>(data.dv.size());
  CoefficientTable t;
  t.c0.resize(K);
  t.c1.resize(K);
  t.c2.resize(K);
  for (int k = 0; k < K; ++k) {
    const auto c =
        mismatch_coefficients(ratio, data.dv(k), data.p(k), data.q(k), data.v(k));
    t.c0(k) = c[0];
    t.c1(k) = c[1];
    t.c2(k) = drop_loss_term ? 0.0 : c[2];
    t.information += t.c1(k) * t.c1(k) + t.c2(k) * t.c2(k);
  }
  return t;
}

double evaluate_l2(const CoefficientTable& t, double x) {
  return (t.c0.array() + t.c1.array() * x + t.c2.array() * x * x).square().sum();
}

double evaluate_l1(const CoefficientTable& t, double x) {
  return (t.c0.array() + t.c1.array() * x + t.c2.array() * x * x).abs().sum();
}

// Single-interval case shared by every method: the equation e(x) = 0 is
// solvable directly; report the smaller non-negative root.
CandidateFit solve_single_interval(const CoefficientTable& t, double x_max) {
  double roots[2];
  const int count = quadratic_roots(t.c0(0), t.c1(0), t.c2(0), roots);
  CandidateFit fit;
  fit.underdetermined = true;
  for (int i = 0; i < count; ++i) {
    if (roots[i] >= 0.0) {
      fit.x = roots[i];
      fit.objective = std::abs(t.c0(0) + t.c1(0) * fit.x + t.c2(0) * fit.x * fit.x);
      return fit;
    }
  }
  // no non-negative root: fall back to the interval minimizer of e^2
  const double a4 = t.c2(0) * t.c2(0);
  const double a3 = 2.0 * t.c1(0) * t.c2(0);
  const double a2 = t.c1(0) * t.c1(0) + 2.0 * t.c0(0) * t.c2(0);
  const double a1 = 2.0 * t.c0(0) * t.c1(0);
  double stationary[3];
  const int nst = cubic_roots(a1, 2.0 * a2, 3.0 * a3, 4.0 * a4, stationary);
  std::vector<double> candidates{0.0, x_max};
  for (int i = 0; i < nst; ++i) {
    if (stationary[i] > 0.0 && stationary[i] < x_max) candidates.push_back(stationary[i]);
  }
  for (double cand : candidates) {
    const double obj = std::sqrt(evaluate_l2(t, cand));
    if (obj < fit.objective) {
      fit.objective = obj;
      fit.x = cand;
    }
  }
  return fit;
}

// Global minimizer of sum e_k(x)^2 over [0, x_max]: the objective is a
// quartic polynomial, so the candidates are the real stationary points plus
// the interval ends.
CandidateFit minimize_l2(const CoefficientTable& t, double x_max) {
  if (t.c0.size() == 1) return solve_single_interval(t, x_max);
  const double a4 = t.c2.array().square().sum();
  const double a3 = 2.0 * (t.c1.array() * t.c2.array()).sum();
  const double a2 = t.c1.array().square().sum() + 2.0 * (t.c0.array() * t.c2.array()).sum();
  const double a1 = 2.0 * (t.c0.array() * t.c1.array()).sum();

  double stationary[3];
  const int nst = cubic_roots(a1, 2.0 * a2, 3.0 * a3, 4.0 * a4, stationary);
  std::vector<double> candidates{0.0, x_max};
  for (int i = 0; i < nst; ++i) {
    double root = stationary[i];
    if (!(root > 0.0 && root < x_max)) continue;
    // one Newton step on the derivative tightens the companion-matrix root
    for (int polish = 0; polish < 2; ++polish) {
      const double g1 = a1 + 2.0 * a2 * root + 3.0 * a3 * root * root +
                        4.0 * a4 * root * root * root;
      const double g2 = 2.0 * a2 + 6.0 * a3 * root + 12.0 * a4 * root * root;
      if (g2 == 0.0) break;
      const double next = root - g1 / g2;
      if (!(next > 0.0 && next < x_max)) break;
      root = next;
    }
    candidates.push_back(root);
  }
  CandidateFit fit;
  for (double cand : candidates) {
    const double obj = evaluate_l2(t, cand);
    if (obj < fit.objective) {
      fit.objective = obj;
      fit.x = cand;
    }
  }
  fit.objective = std::sqrt(fit.objective);
  return fit;
}

// Global minimizer of sum |e_k(x)| over [0, x_max]: between the roots of the
// individual parabolas the objective is a plain quadratic, so scanning the
// breakpoint intervals visits every local minimum.
CandidateFit minimize_l1(const CoefficientTable& t, double x_max) {
  if (t.c0.size() == 1) return solve_single_interval(t, x_max);
  const int K = static_cast<int>(t.c0.size());
  std::vector<double> points{0.0, x_max};
  double roots[2];
  for (int k = 0; k < K; ++k) {
    const int count = quadratic_roots(t.c0(k), t.c1(k), t.c2(k), roots);
    for (int i = 0; i < count; ++i) {
      if (roots[i] > 0.0 && roots[i] < x_max) points.push_back(roots[i]);
    }
  }
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());

  CandidateFit fit;
  auto consider = [&](double x) {
    const double obj = evaluate_l1(t, x);
    if (obj < fit.objective) {
      fit.objective = obj;
      fit.x = x;
    }
  };
  for (std::size_t seg = 0; seg + 1 < points.size(); ++seg) {
    const double a = points[seg];
    const double b = points[seg + 1];
    const double mid = 0.5 * (a + b);
    // fixed signs inside the segment make the objective quadratic
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (int k = 0; k < K; ++k) {
      const double e = t.c0(k) + t.c1(k) * mid + t.c2(k) * mid * mid;
      const double sign = e < 0.0 ? -1.0 : 1.0;
      s0 += sign * t.c0(k);
      s1 += sign * t.c1(k);
      s2 += sign * t.c2(k);
    }
    consider(a);
    if (s2 > 0.0) {
      const double vertex = -s1 / (2.0 * s2);
      if (vertex > a && vertex < b) consider(vertex);
    }
  }
  consider(points.back());
  return fit;
}

enum class Objective { l1, l2, l2_linearized };

BranchEstimate solve_branch(const BranchSamples& data, const ConductorLibrary& library,
                            const RegressionOptions& options, Objective objective) {
  check_branch_samples(data);
  require(!library.empty(), Errc::invalid_argument, "empty conductor library");
  require(options.x_max > 0.0, Errc::invalid_argument, "x_max must be positive");
  const int K = static_cast<int>(data.dv.size());

  BranchEstimate best;
  best.objective = std::numeric_limits<double>::infinity();
  best.per_ratio_objectives.assign(library.size(), 0.0);
  bool any_information = false;

  for (int z = 0; z < library.size(); ++z) {
    const CoefficientTable table =
        build_coefficients(data, library.ratio(z), objective == Objective::l2_linearized);
    if (table.information <= 1e-18 * K) {
      best.per_ratio_objectives[z] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    any_information = true;
    CandidateFit fit;
    switch (objective) {
      case Objective::l1:
        fit = minimize_l1(table, options.x_max);
        break;
      case Objective::l2:
      case Objective::l2_linearized:
        fit = minimize_l2(table, options.x_max);
        break;
    }
    best.per_ratio_objectives[z] = fit.objective;
    if (fit.objective < best.objective - kTieTolerance) {
      best.objective = fit.objective;
      best.x = fit.x;
      best.library_index = z;
      best.confidence = fit.underdetermined ? EstimateConfidence::underdetermined
                                            : EstimateConfidence::ok;
    }
  }
  require(any_information, Errc::all_candidates_degenerate,
          "no interval carries power over this branch; impedance unobservable");

  const double ratio = library.ratio(best.library_index);
  best.r = ratio * best.x;
  best.residuals.resize(K);
  for (int k = 0; k < K; ++k) {
    best.residuals(k) =
        branch_mismatch(best.x, ratio, data.dv(k), data.p(k), data.q(k), data.v(k));
  }
  return best;
}

}  // namespace

BranchEstimate solve_branch_ls(const BranchSamples& data, const ConductorLibrary& library,
                               const RegressionOptions& options) {
  return solve_branch(data, library, options, Objective::l2);
}

BranchEstimate solve_branch_lad(const BranchSamples& data, const ConductorLibrary& library,
                                const RegressionOptions& options) {
  return solve_branch(data, library, options, Objective::l1);
}

BranchEstimate solve_branch_ls_linearized(const BranchSamples& data,
                                          const ConductorLibrary& library,
                                          const RegressionOptions& options) {
  return solve_branch(data, library, options, Objective::l2_linearized);
}

std::pair<double, double> fit_rx_free(const BranchSamples& data) {
  check_branch_samples(data);
  const int K = static_cast<int>(data.dv.size());
  Eigen::MatrixXd design(K, 2);
  design.col(0) = 2.0 * data.p;
  design.col(1) = 2.0 * data.q;
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(design,
                                              Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::Vector2d rx = svd.solve(data.dv);
  return {rx(0), rx(1)};
}

Eigen::VectorXd SweepResult::r() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(estimates.size()));
  for (std::size_t j = 0; j < estimates.size(); ++j) out(j) = estimates[j].r;
  return out;
}

Eigen::VectorXd SweepResult::x() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(estimates.size()));
  for (std::size_t j = 0; j < estimates.size(); ++j) out(j) = estimates[j].x;
  return out;
}

namespace {

// Ratio used when a branch carries no information: the most common choice
// among the branches already estimated, otherwise the library's median.
int fallback_ratio_index(const std::vector<BranchEstimate>& estimates,
                         const std::vector<char>& done, const ConductorLibrary& library) {
  std::vector<int> votes(library.size(), 0);
  bool any = false;
  for (std::size_t j = 0; j < estimates.size(); ++j) {
    if (done[j] && estimates[j].confidence != EstimateConfidence::low &&
        estimates[j].library_index >= 0) {
      ++votes[estimates[j].library_index];
      any = true;
    }
  }
  if (any) {
    int best = 0;
    for (int z = 1; z < library.size(); ++z) {
      if (votes[z] > votes[best]) best = z;
    }
    return best;
  }
  std::vector<double> sorted = library.ratios();
  std::sort(sorted.begin(), sorted.end());
  return library.nearest(sorted[(sorted.size() - 1) / 2]);
}

}  // namespace

SweepResult sweep(const TreeTopology& topology, const SampleSet& samples,
                  const ConductorLibrary& library, const SweepOptions& options) {
  const int n = topology.branch_count();
  require(samples.bus_count() == n, Errc::dimension_mismatch,
          "sample set does not match the topology size");
  require(!library.empty(), Errc::invalid_argument, "empty conductor library");
  for (const auto& [branch, rx] : options.forced) {
    require(branch >= 1 && branch <= n, Errc::invalid_argument,
            "forced impedance for unknown branch " + std::to_string(branch));
    require(rx.first > 0.0 && rx.second > 0.0, Errc::non_positive_impedance,
            "forced impedance must be positive");
  }

  SweepResult result;
  result.estimates.resize(n);
  result.flows = FlowTable(samples.size(), n);
  Eigen::VectorXd r_hat = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd x_hat = Eigen::VectorXd::Zero(n);
  std::vector<char> done(n, 0);

  for (int layer = topology.max_depth(); layer >= 1; --layer) {
    update_receiving_flows(topology, layer, samples, result.flows);
    for (int j : topology.layers()[layer]) {
      BranchSamples data;
      const int parent = topology.parent(j);
      if (parent == 0) {
        data.dv = samples.v0() - samples.v().col(j - 1);
      } else {
        data.dv = samples.v().col(parent - 1) - samples.v().col(j - 1);
      }
      data.p = result.flows.receiving_p.col(j - 1);
      data.q = result.flows.receiving_q.col(j - 1);
      data.v = samples.v().col(j - 1);

      BranchEstimate est;
      if (const auto it = options.forced.find(j); it != options.forced.end()) {
        est.r = it->second.first;
        est.x = it->second.second;
        const double ratio = est.r / est.x;
        est.library_index = library.nearest(ratio);
        est.residuals.resize(samples.size());
        for (int k = 0; k < samples.size(); ++k) {
          est.residuals(k) =
              branch_mismatch(est.x, ratio, data.dv(k), data.p(k), data.q(k), data.v(k));
        }
        est.objective = options.method == RegressionMethod::lad
                            ? est.residuals.cwiseAbs().sum()
                            : est.residuals.norm();
      } else {
        try {
          switch (options.method) {
            case RegressionMethod::lad:
              est = solve_branch_lad(data, library, options.regression);
              break;
            case RegressionMethod::ls:
              est = solve_branch_ls(data, library, options.regression);
              break;
            case RegressionMethod::ls_linearized:
              est = solve_branch_ls_linearized(data, library, options.regression);
              break;
          }
        } catch (const Error& err) {
          if (err.code() != Errc::all_candidates_degenerate) throw;
          const int z = fallback_ratio_index(result.estimates, done, library);
          est.library_index = z;
          est.x = kFallbackReactance;
          est.r = library.ratio(z) * est.x;
          est.confidence = EstimateConfidence::low;
          est.residuals = data.dv;  // with no flow the drop itself is the misfit
          est.objective = options.method == RegressionMethod::lad
                              ? est.residuals.cwiseAbs().sum()
                              : est.residuals.norm();
          est.per_ratio_objectives.assign(library.size(),
                                          std::numeric_limits<double>::quiet_NaN());
        }
      }
      result.estimates[j - 1] = std::move(est);
      r_hat(j - 1) = result.estimates[j - 1].r;
      x_hat(j - 1) = result.estimates[j - 1].x;
      done[j - 1] = 1;
    }
    update_sending_flows(topology, layer, samples, r_hat, x_hat, result.flows);
  }
  return result;
}

TreeTopology orient_tree(int n, const std::vector<std::pair<int, int>>& edges) {
  try {
    return TreeTopology::from_edges(n, edges);
  } catch (const Error& err) {
    if (err.code() == Errc::not_a_tree) {
      raise(Errc::unrooted_topology,
            std::string("edge set cannot be rooted at the substation (") + err.what() + ")");
    }
    throw;
  }
}

TreeTopology orient_adjacency(const AdjacencyEstimate& adjacency) {
  require(!adjacency.root_adjacent.empty(), Errc::unrooted_topology,
          "no substation-adjacent bus identified");
  std::vector<std::pair<int, int>> edges = adjacency.edges;
  for (int bus : adjacency.root_adjacent) edges.emplace_back(0, bus);
  return orient_tree(adjacency.bus_count, edges);
}

}  // namespace gridtwin
