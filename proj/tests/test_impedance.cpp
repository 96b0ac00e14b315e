#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <vector>

#include "gridtwin/fixtures.hpp"
#include "gridtwin/impedance.hpp"
#include "gridtwin/metrics.hpp"
#include "gridtwin/powerflow.hpp"
#include "helpers.hpp"

using namespace gridtwin;
using testutil::max_abs_diff;

namespace {

BranchSamples resize_branch(int samples) {
  BranchSamples out;
  out.dv.resize(samples);
  out.p.resize(samples);
  out.q.resize(samples);
  out.v.resize(samples);
  return out;
}

// Exact-flow regression data for one branch under random loads.
BranchSamples exact_branch_data(double r, double x, int samples, std::uint64_t seed) {
  const RadialNetwork net = testutil::single_branch(r, x);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> active(0.05, 0.5);
  std::uniform_real_distribution<double> reactive(0.02, 0.3);
  BranchSamples out = resize_branch(samples);
  for (int k = 0; k < samples; ++k) {
    Eigen::VectorXd p(1), q(1);
    p << -active(rng);
    q << -reactive(rng);
    const ExactSolution sol = solve_exact(net, p, q, 1.0);
    out.dv(k) = 1.0 - sol.v(0);
    out.p(k) = sol.flows.receiving_p(0, 0);
    out.q(k) = sol.flows.receiving_q(0, 0);
    out.v(k) = sol.v(0);
  }
  return out;
}

double rel_err(double estimate, double truth) {
  return std::abs(estimate - truth) / truth;
}

// Least-squares objective of one ratio as a dense quartic over an x grid.
Eigen::ArrayXd ls_objective_on_grid(const BranchSamples& data, double ratio,
                                    const Eigen::ArrayXd& grid) {
  double a0 = 0, a1 = 0, a2 = 0, a3 = 0, a4 = 0;
  for (int k = 0; k < data.dv.size(); ++k) {
    const auto c = mismatch_coefficients(ratio, data.dv(k), data.p(k), data.q(k),
                                         data.v(k));
    a0 += c[0] * c[0];
    a1 += 2.0 * c[0] * c[1];
    a2 += c[1] * c[1] + 2.0 * c[0] * c[2];
    a3 += 2.0 * c[1] * c[2];
    a4 += c[2] * c[2];
  }
  return (((a4 * grid + a3) * grid + a2) * grid + a1) * grid + a0;
}

Eigen::ArrayXd lad_objective_on_grid(const BranchSamples& data, double ratio,
                                     const Eigen::ArrayXd& grid) {
  Eigen::ArrayXd total = Eigen::ArrayXd::Zero(grid.size());
  for (int k = 0; k < data.dv.size(); ++k) {
    const auto c = mismatch_coefficients(ratio, data.dv(k), data.p(k), data.q(k),
                                         data.v(k));
    total += ((c[2] * grid + c[1]) * grid + c[0]).abs();
  }
  return total;
}

SampleSet noiseless_samples(const Fixture& fixture, int samples, std::uint64_t seed) {
  const LoadProfile loads = synthesize_loads(fixture.network, samples, seed);
  return generate_samples(fixture.network, loads.p, loads.q, loads.v0).measured;
}

double max_rel_err(const SweepResult& result, const RadialNetwork& truth) {
  double worst = 0.0;
  for (int j = 1; j <= truth.branch_count(); ++j) {
    worst = std::max(worst, rel_err(result.estimates[j - 1].r, truth.resistance(j)));
    worst = std::max(worst, rel_err(result.estimates[j - 1].x, truth.reactance(j)));
  }
  return worst;
}

}  // namespace

TEST_CASE("mismatch coefficients evaluate the drop equation") {
  // At x = 0 the mismatch is the voltage drop itself.
  CHECK(branch_mismatch(0.0, 1.3, 0.0021, 0.1, 0.05, 0.99) == 0.0021);
  const auto c = mismatch_coefficients(1.0, 0.002002, 0.1, 0.0, 1.0);
  CHECK(c[0] == 0.002002);
  CHECK(c[1] == doctest::Approx(-0.2).epsilon(1e-14));
  CHECK(c[2] == doctest::Approx(-0.02).epsilon(1e-14));
  // dv chosen so that the truth x = 0.01 solves the equation exactly.
  CHECK(std::abs(branch_mismatch(0.01, 1.0, 0.002002, 0.1, 0.0, 1.0)) <= 1e-15);

  // True impedances zero the mismatch on exact-flow data.
  const double ratio = 0.8124, x = 0.01;
  const BranchSamples data = exact_branch_data(ratio * x, x, 12, 301);
  for (int k = 0; k < 12; ++k) {
    CHECK(std::abs(branch_mismatch(x, ratio, data.dv(k), data.p(k), data.q(k),
                                   data.v(k))) <= 1e-10);
  }

  CHECK_RAISES(Errc::zero_voltage, mismatch_coefficients(1.0, 0.1, 0.1, 0.0, 1e-7));
}

TEST_CASE("both regressions recover the branch exactly from clean data") {
  const ConductorLibrary library({0.5153, 1.2840, 0.8124, 0.8112, 0.9864, 2.0655});
  const double x = 0.013;
  const double ratio = library.ratio(2);
  const BranchSamples data = exact_branch_data(ratio * x, x, 10, 303);

  for (const auto* method : {"ls", "lad"}) {
    CAPTURE(method);
    const BranchEstimate estimate = (method == std::string("ls"))
                                        ? solve_branch_ls(data, library)
                                        : solve_branch_lad(data, library);
    CHECK(rel_err(estimate.x, x) <= 1e-8);
    CHECK(rel_err(estimate.r, ratio * x) <= 1e-8);
    CHECK(estimate.library_index == 2);
    CHECK(estimate.r == library.ratio(estimate.library_index) * estimate.x);
    CHECK(estimate.objective <= 1e-8);
    CHECK(estimate.confidence == EstimateConfidence::ok);
    CHECK(estimate.residuals.size() == 10);
    CHECK(estimate.residuals.cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(estimate.per_ratio_objectives.size() == 6);
  }
}

TEST_CASE("two independent samples determine the single unknown") {
  const double x = 0.02, ratio = 1.2840;
  const BranchSamples data = exact_branch_data(ratio * x, x, 2, 305);
  const ConductorLibrary only_truth({ratio});
  CHECK(rel_err(solve_branch_ls(data, only_truth).x, x) <= 1e-10);
  CHECK(rel_err(solve_branch_lad(data, only_truth).x, x) <= 1e-10);
}

TEST_CASE("enumerative minimizers beat a dense grid") {
  std::mt19937_64 rng(307);
  const RegressionOptions options;
  const Eigen::ArrayXd fine = Eigen::ArrayXd::LinSpaced(1000001, 0.0, options.x_max);
  const Eigen::ArrayXd coarse = Eigen::ArrayXd::LinSpaced(10001, 0.0, options.x_max);
  const double spacing = options.x_max / 1e6;

  for (int instance = 0; instance < 100; ++instance) {
    const double x = std::uniform_real_distribution<double>(1e-3, 5e-2)(rng);
    const double ratio = std::uniform_real_distribution<double>(0.3, 3.5)(rng);
    const int size = std::uniform_int_distribution<int>(1, 6)(rng);
    std::vector<double> ratios(size);
    for (double& g : ratios) {
      g = std::uniform_real_distribution<double>(0.3, 3.5)(rng);
    }
    ratios[std::uniform_int_distribution<int>(0, size - 1)(rng)] = ratio;
    const ConductorLibrary library(ratios);
    const BranchSamples data = exact_branch_data(ratio * x, x, 50, 1000 + instance);

    const BranchEstimate ls = solve_branch_ls(data, library);
    const BranchEstimate lad = solve_branch_lad(data, library);

    // The fine grid around the chosen ratio agrees with the closed-form x.
    const Eigen::ArrayXd g_fine =
        ls_objective_on_grid(data, library.ratio(ls.library_index), fine);
    int arg = 0;
    g_fine.minCoeff(&arg);
    CHECK(std::abs(ls.x - fine(arg)) <= spacing + 1e-12);

    // No (z, x) grid point does better than either returned objective.
    for (int z = 0; z < library.size(); ++z) {
      const Eigen::ArrayXd g = ls_objective_on_grid(data, library.ratio(z), coarse);
      const double best = g.minCoeff();
      CHECK(ls.objective * ls.objective <= best + 1e-9 * std::max(1.0, best));
      const Eigen::ArrayXd h = lad_objective_on_grid(data, library.ratio(z), coarse);
      CHECK(lad.objective <= h.minCoeff() + 1e-9 * std::max(1.0, h.minCoeff()));
    }
  }
}

TEST_CASE("least absolute deviations shrugs off gross outliers") {
  std::mt19937_64 rng(309);
  const ConductorLibrary library({0.5153, 1.2840, 0.8124, 0.8112, 0.9864, 2.0655});
  const double x = 0.015, ratio = library.ratio(4);

  // Single A/B comparison at 30% corruption.
  BranchSamples data = exact_branch_data(ratio * x, x, 60, 311);
  for (int k = 0; k < 18; ++k) {
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    data.dv(k) -= sign * 0.05 * data.v(k);  // gross voltage error at the meter
  }
  const double lad_err = rel_err(solve_branch_lad(data, library).x, x);
  const double ls_err = rel_err(solve_branch_ls(data, library).x, x);
  CHECK(lad_err <= 0.01);
  CHECK(ls_err > lad_err);

  // Median dominance across 50 randomized trials at 20% corruption.
  std::vector<double> lad_errors, ls_errors;
  for (int trial = 0; trial < 50; ++trial) {
    BranchSamples noisy = exact_branch_data(ratio * x, x, 40, 400 + trial);
    for (int k = 0; k < 8; ++k) {
      const int idx = std::uniform_int_distribution<int>(0, 39)(rng);
      const double sign = std::uniform_real_distribution<double>(0, 1)(rng) < 0.5
                              ? 1.0
                              : -1.0;
      noisy.dv(idx) -= sign * 0.05 * noisy.v(idx);
    }
    lad_errors.push_back(rel_err(solve_branch_lad(noisy, library).x, x));
    ls_errors.push_back(rel_err(solve_branch_ls(noisy, library).x, x));
  }
  std::sort(lad_errors.begin(), lad_errors.end());
  std::sort(ls_errors.begin(), ls_errors.end());
  CHECK(lad_errors[25] <= ls_errors[25]);
}

TEST_CASE("a single sample leaves the branch underdetermined") {
  BranchSamples data = resize_branch(1);
  data.dv << 0.002002;
  data.p << 0.1;
  data.q << 0.0;
  data.v << 1.0;
  const ConductorLibrary library({1.0});
  for (const BranchEstimate& estimate :
       {solve_branch_ls(data, library), solve_branch_lad(data, library)}) {
    CHECK(estimate.confidence == EstimateConfidence::underdetermined);
    CHECK(estimate.x == doctest::Approx(0.01).epsilon(1e-10));  // smaller root
    CHECK(estimate.r == estimate.x);                            // ratio 1
  }
}

TEST_CASE("branches that never see power raise a degenerate error") {
  BranchSamples data = resize_branch(5);
  data.dv.setZero();
  data.p.setZero();
  data.q.setZero();
  data.v.setOnes();
  const ConductorLibrary library({1.0, 2.0});
  CHECK_RAISES(Errc::all_candidates_degenerate, solve_branch_ls(data, library));
  CHECK_RAISES(Errc::all_candidates_degenerate, solve_branch_lad(data, library));
  CHECK_RAISES(Errc::invalid_argument, solve_branch_ls(data, ConductorLibrary()));
}

TEST_CASE("dropping the loss term biases the fit on heavy loads") {
  const ConductorLibrary library({0.5153, 1.2840, 0.8124, 0.8112, 0.9864, 2.0655});
  const double x = 0.02, ratio = library.ratio(5);
  const BranchSamples data = exact_branch_data(ratio * x, x, 20, 313);
  const double exact_err = rel_err(solve_branch_ls(data, library).x, x);
  const double linear_err = rel_err(solve_branch_ls_linearized(data, library).x, x);
  CHECK(exact_err <= 1e-8);
  CHECK(linear_err > exact_err);
}

TEST_CASE("free first-order fit works only for well-spread power factors") {
  std::mt19937_64 rng(315);
  const double r = 0.012, x = 0.02;
  BranchSamples data = resize_branch(10);
  for (int k = 0; k < 10; ++k) {
    data.p(k) = std::uniform_real_distribution<double>(0.05, 0.5)(rng);
    data.q(k) = std::uniform_real_distribution<double>(0.02, 0.4)(rng);
    data.v(k) = 1.0;
    data.dv(k) = 2.0 * (r * data.p(k) + x * data.q(k));  // loss-free model
  }
  const auto [r_hat, x_hat] = fit_rx_free(data);
  CHECK(rel_err(r_hat, r) <= 1e-10);
  CHECK(rel_err(x_hat, x) <= 1e-10);

  BranchSamples collinear = data;
  collinear.q = 0.3 * collinear.p;
  for (int k = 0; k < 10; ++k) {
    collinear.dv(k) = 2.0 * (r * collinear.p(k) + x * collinear.q(k));
  }
  const auto [r_c, x_c] = fit_rx_free(collinear);
  CHECK(std::isfinite(r_c));
  CHECK(std::isfinite(x_c));
}

TEST_CASE("sweep matches the benchmark feeder to numerical precision") {
  const Fixture fixture = builtin_fixture("feeder13");
  const SampleSet samples = noiseless_samples(fixture, 40, 317);
  for (const RegressionMethod method : {RegressionMethod::lad, RegressionMethod::ls}) {
    SweepOptions options;
    options.method = method;
    const SweepResult result =
        sweep(fixture.network.topology(), samples, fixture.library, options);
    CHECK(max_rel_err(result, fixture.network) <= 1e-6);
    for (const BranchEstimate& estimate : result.estimates) {
      CHECK(estimate.confidence == EstimateConfidence::ok);
      CHECK(estimate.r ==
            fixture.library.ratio(estimate.library_index) * estimate.x);
    }
  }
}

TEST_CASE("a star sweep degenerates to independent branch solves") {
  const int n = 5;
  Eigen::VectorXd x(n);
  x << 0.01, 0.013, 0.02, 0.008, 0.016;
  const ConductorLibrary library({0.9864});
  const RadialNetwork star =
      testutil::make_network(std::vector<int>(n, 0), 0.9864 * x, x);
  const SampleSet samples = noiseless_samples({"star", star, library}, 12, 319);

  const SweepResult swept = sweep(star.topology(), samples, library);
  for (int j = 1; j <= n; ++j) {
    BranchSamples direct = resize_branch(12);
    for (int k = 0; k < 12; ++k) {
      direct.dv(k) = samples.v0()(k) - samples.v()(k, j - 1);
      direct.p(k) = -samples.p()(k, j - 1);
      direct.q(k) = -samples.q()(k, j - 1);
      direct.v(k) = samples.v()(k, j - 1);
    }
    const BranchEstimate independent = solve_branch_lad(direct, library);
    CHECK(swept.estimates[j - 1].x == independent.x);
    CHECK(swept.estimates[j - 1].objective == independent.objective);
  }
}

TEST_CASE("forced impedances are honoured verbatim") {
  const Fixture fixture = builtin_fixture("feeder13");
  const SampleSet samples = noiseless_samples(fixture, 30, 321);
  const SweepResult plain = sweep(fixture.network.topology(), samples, fixture.library);

  SweepOptions forced;
  forced.forced[5] = {fixture.network.resistance(5), fixture.network.reactance(5)};
  const SweepResult pinned =
      sweep(fixture.network.topology(), samples, fixture.library, forced);
  CHECK(pinned.estimates[4].r == fixture.network.resistance(5));
  CHECK(pinned.estimates[4].x == fixture.network.reactance(5));
  CHECK(pinned.estimates[4].residuals.size() == 30);
  for (int j = 1; j <= 10; ++j) {
    if (j == 5) continue;
    CHECK(std::abs(pinned.estimates[j - 1].x - plain.estimates[j - 1].x) <=
          1e-9 * plain.estimates[j - 1].x);
  }

  SweepOptions bad_id;
  bad_id.forced[99] = {0.01, 0.01};
  CHECK_RAISES(Errc::invalid_argument,
               sweep(fixture.network.topology(), samples, fixture.library, bad_id));
  SweepOptions nonpositive;
  nonpositive.forced[3] = {0.0, 0.01};
  CHECK_RAISES(Errc::non_positive_impedance,
               sweep(fixture.network.topology(), samples, fixture.library, nonpositive));
}

TEST_CASE("branches without excitation fall back to the library consensus") {
  const Fixture fixture = builtin_fixture("feeder13");
  const LoadProfile loads = synthesize_loads(fixture.network, 30, 323);
  Eigen::MatrixXd p = loads.p, q = loads.q;
  p.col(1).setZero();  // bus 2 never draws power
  q.col(1).setZero();
  const SampleSet samples =
      generate_samples(fixture.network, p, q, loads.v0).measured;

  const SweepResult result = sweep(fixture.network.topology(), samples, fixture.library);
  const BranchEstimate& fallback = result.estimates[1];
  CHECK(fallback.confidence == EstimateConfidence::low);
  CHECK(fallback.x == 1e-6);
  CHECK(fallback.library_index == 5);  // twice in the deeper layers
  CHECK(fallback.r == fixture.library.ratio(5) * 1e-6);

  for (int j = 1; j <= 10; ++j) {
    if (j == 2) continue;
    CHECK(rel_err(result.estimates[j - 1].x, fixture.network.reactance(j)) <= 1e-6);
  }
}

TEST_CASE("orientation plumbing roots stage-one output") {
  const TreeTopology path = orient_tree(2, {{0, 1}, {1, 2}});
  CHECK(path.layers()[1] == std::vector<int>{1});
  CHECK(path.layers()[2] == std::vector<int>{2});
  CHECK_RAISES(Errc::unrooted_topology, orient_tree(2, {{0, 1}, {1, 2}, {0, 2}}));

  AdjacencyEstimate adjacency;
  adjacency.bus_count = 3;
  adjacency.edges = {{1, 2}, {2, 3}};
  adjacency.root_adjacent = {1};
  const TreeTopology tree = orient_adjacency(adjacency);
  CHECK(tree.parent(1) == 0);
  CHECK(tree.parent(2) == 1);
  CHECK(tree.parent(3) == 2);

  adjacency.root_adjacent.clear();
  CHECK_RAISES(Errc::unrooted_topology, orient_adjacency(adjacency));
}

TEST_CASE("sweep cost grows linearly with the branch count") {
  const ConductorLibrary library({1.0});
  const std::vector<int> sizes = {10, 50, 100, 200};
  const int K = 40;

  std::vector<SampleSet> datasets;
  std::vector<TreeTopology> trees;
  for (int n : sizes) {
    Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 0.002);
    std::vector<int> parents(n);
    for (int j = 0; j < n; ++j) parents[j] = j;  // chain
    const RadialNetwork chain = testutil::make_network(parents, x, x);
    Eigen::MatrixXd p = Eigen::MatrixXd::Constant(K, n, -8e-4);
    std::mt19937_64 rng(331 + n);
    for (int k = 0; k < K; ++k) {
      for (int j = 0; j < n; ++j) {
        p(k, j) *= std::uniform_real_distribution<double>(0.5, 1.5)(rng);
      }
    }
    const Eigen::MatrixXd q = 0.4 * p;
    datasets.push_back(
        generate_samples(chain, p, q, Eigen::VectorXd::Ones(K)).measured);
    trees.push_back(chain.topology());
  }

  auto timed_sweep = [&](int i) {
    const auto start = std::chrono::steady_clock::now();
    sweep(trees[i], datasets[i], library);
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
  };
  timed_sweep(3);  // warm up allocators and caches

  bool linear = false;
  for (int attempt = 0; attempt < 3 && !linear; ++attempt) {
    std::vector<double> t(sizes.size());
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      std::vector<double> reps = {timed_sweep(i), timed_sweep(i), timed_sweep(i)};
      std::sort(reps.begin(), reps.end());
      t[i] = reps[1];
    }
    // Least-squares line through (n, t); every point within 1.5x of the fit.
    double sn = 0, st = 0, snn = 0, snt = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      sn += sizes[i];
      st += t[i];
      snn += static_cast<double>(sizes[i]) * sizes[i];
      snt += sizes[i] * t[i];
    }
    const double m = static_cast<double>(sizes.size());
    const double slope = (m * snt - sn * st) / (m * snn - sn * sn);
    const double intercept = (st - slope * sn) / m;
    linear = true;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      const double fit = intercept + slope * sizes[i];
      if (!(fit > 0.0) || t[i] > 1.5 * fit || t[i] < fit / 1.5) linear = false;
    }
  }
  CHECK(linear);
}
