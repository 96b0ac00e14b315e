#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include "gridtwin/fixtures.hpp"
#include "gridtwin/network.hpp"
#include "helpers.hpp"

using namespace gridtwin;
using testutil::max_abs_diff;

namespace {

RadialNetwork path2(double x1 = 0.01, double x2 = 0.01, double ratio = 1.0) {
  Eigen::VectorXd x(2), r(2);
  x << x1, x2;
  r = ratio * x;
  return testutil::make_network({0, 1}, r, x);
}

}  // namespace

TEST_CASE("incidence of a two-branch path and its inverse") {
  const RadialNetwork net = path2();
  const TreeTopology& t = net.topology();

  Eigen::MatrixXd a_true(2, 2), b_true(2, 2);
  a_true << -1, 1, 0, -1;
  b_true << -1, -1, 0, -1;
  CHECK(max_abs_diff(t.incidence(), a_true) == 0.0);
  CHECK(max_abs_diff(t.incidence_inverse(), b_true) == 0.0);

  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);
  CHECK(max_abs_diff(t.incidence() * t.incidence_inverse(), eye) == 0.0);
  CHECK(max_abs_diff(t.incidence_inverse() * t.incidence(), eye) == 0.0);

  // Substation row: +1 exactly at the branches leaving bus 0.
  Eigen::VectorXd a0_true(2);
  a0_true << 1, 0;
  CHECK(max_abs_diff(t.root_incidence(), a0_true) == 0.0);
}

TEST_CASE("incidence inverse of a star is minus the identity") {
  Eigen::VectorXd x = Eigen::VectorXd::Constant(3, 0.02);
  const RadialNetwork net = testutil::make_network({0, 0, 0}, x, x);
  const TreeTopology& t = net.topology();
  CHECK(max_abs_diff(t.incidence_inverse(), -Eigen::MatrixXd::Identity(3, 3)) == 0.0);
  CHECK(max_abs_diff(t.root_incidence(), Eigen::VectorXd::Ones(3)) == 0.0);
}

TEST_CASE("inverse incidence marks exactly the root paths") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 24)(rng);
    const RadialNetwork net = testutil::random_network(rng, n);
    const TreeTopology& t = net.topology();
    const Eigen::MatrixXd b = t.incidence_inverse();
    for (int j = 1; j <= n; ++j) {
      std::set<int> on_path(t.path_to_root(j).begin(), t.path_to_root(j).end());
      for (int i = 1; i <= n; ++i) {
        const double expected = on_path.count(i) ? -1.0 : 0.0;
        CHECK(b(i - 1, j - 1) == expected);
      }
    }
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
    CHECK(max_abs_diff(t.incidence() * b, eye) == 0.0);
  }
}

TEST_CASE("subtree and path sums match the incidence algebra") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 30)(rng);
    const RadialNetwork net = testutil::random_network(rng, n);
    const TreeTopology& t = net.topology();
    Eigen::VectorXd values(n);
    for (int j = 0; j < n; ++j) {
      values(j) = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    }
    const Eigen::MatrixXd b = t.incidence_inverse();
    CHECK(max_abs_diff(t.subtree_sums(values), -b * values) <= 1e-12);
    CHECK(max_abs_diff(t.path_sums(values), -b.transpose() * values) <= 1e-12);
  }
}

TEST_CASE("layers partition the buses by depth") {
  std::mt19937_64 rng(43);
  const RadialNetwork net = testutil::random_network(rng, 25);
  const TreeTopology& t = net.topology();
  std::set<int> seen;
  for (int d = 1; d <= t.max_depth(); ++d) {
    CHECK(!t.layers()[d].empty());
    for (int bus : t.layers()[d]) {
      CHECK(t.depth(bus) == d);
      CHECK(seen.insert(bus).second);  // disjoint
    }
  }
  CHECK(static_cast<int>(seen.size()) == t.branch_count());
  CHECK(t.layers()[0].empty());
}

TEST_CASE("root-to-leaf order puts every parent first") {
  std::mt19937_64 rng(44);
  const RadialNetwork net = testutil::random_network(rng, 25);
  const TreeTopology& t = net.topology();
  std::vector<int> position(t.bus_count(), -1);
  const std::vector<int>& order = t.order_root_to_leaves();
  CHECK(static_cast<int>(order.size()) == t.branch_count());
  for (int i = 0; i < static_cast<int>(order.size()); ++i) position[order[i]] = i;
  for (int j = 1; j <= t.branch_count(); ++j) {
    CHECK(position[j] >= 0);
    if (t.parent(j) != 0) CHECK(position[t.parent(j)] < position[j]);
  }
}

TEST_CASE("weighted laplacian closed form on tiny networks") {
  const RadialNetwork one = testutil::single_branch(0.02, 0.02);
  Eigen::MatrixXd y1(1, 1);
  y1 << 50.0;
  CHECK(max_abs_diff(one.weighted_laplacian(), y1) <= 1e-9);

  const RadialNetwork two = path2(0.01, 0.01);
  Eigen::MatrixXd y2(2, 2);
  y2 << 200.0, -100.0, -100.0, 100.0;
  CHECK(max_abs_diff(two.weighted_laplacian(), y2) <= 1e-9);
}

TEST_CASE("laplacian accumulation equals the incidence product") {
  std::mt19937_64 rng(45);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 40)(rng);
    const RadialNetwork net = testutil::random_network(rng, n);
    const Eigen::MatrixXd a = net.topology().incidence();
    const Eigen::MatrixXd product =
        a * net.reactances().cwiseInverse().asDiagonal() * a.transpose();
    CHECK(max_abs_diff(net.weighted_laplacian(), product) <= 1e-10);
  }
}

TEST_CASE("ratio deviation closed form on a path") {
  const RadialNetwork net = path2(0.01, 0.01);
  Eigen::VectorXd d(2);
  d << -1.0, 1.0;  // ratios {1, 3} about their mean 2

  Eigen::MatrixXd expected(2, 2);
  expected << -1.0, -2.0, 0.0, 1.0;
  CHECK(max_abs_diff(net.ratio_deviation_matrix(d), expected) <= 1e-12);

  // Doubling the deviations doubles the matrix (linearity in diag scaling).
  CHECK(max_abs_diff(net.ratio_deviation_matrix(2.0 * d),
                     2.0 * net.ratio_deviation_matrix(d)) <= 1e-12);
  CHECK(net.ratio_deviation_matrix(2.0 * d).norm() ==
        doctest::Approx(2.0 * net.ratio_deviation_matrix(d).norm()).epsilon(1e-12));
}

TEST_CASE("ratio deviation equals the incidence product") {
  std::mt19937_64 rng(46);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 40)(rng);
    const RadialNetwork net = testutil::random_network(rng, n);
    Eigen::VectorXd d(n);
    for (int j = 0; j < n; ++j) {
      d(j) = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    }
    const TreeTopology& t = net.topology();
    const Eigen::MatrixXd product =
        t.incidence() * d.asDiagonal() * t.incidence_inverse();
    CHECK(max_abs_diff(net.ratio_deviation_matrix(d), product) <= 1e-10);
  }
}

TEST_CASE("heterogeneous laplacian decomposes into mean plus deviation") {
  std::mt19937_64 rng(47);
  const int n = 12;
  const RadialNetwork net = testutil::random_network(rng, n);
  const Eigen::VectorXd ratios = net.ratios();
  const double mean = ratios.mean();
  const TreeTopology& t = net.topology();
  const Eigen::MatrixXd phi =
      t.incidence() * ratios.asDiagonal() * t.incidence_inverse();
  const Eigen::MatrixXd via_deviation =
      mean * Eigen::MatrixXd::Identity(n, n) +
      net.ratio_deviation_matrix(ratios - Eigen::VectorXd::Constant(n, mean));
  CHECK(max_abs_diff(phi, via_deviation) <= 1e-12);
}

TEST_CASE("tree construction rejects malformed input") {
  CHECK_RAISES(Errc::cycle_detected, TreeTopology::from_parents({1}));
  CHECK_RAISES(Errc::cycle_detected, TreeTopology::from_parents({2, 1}));
  CHECK_RAISES(Errc::invalid_argument, TreeTopology::from_parents({0, 5}));

  const TreeTopology path = TreeTopology::from_edges(2, {{0, 1}, {1, 2}});
  CHECK(path.max_depth() == 2);
  CHECK(path.layers()[1] == std::vector<int>{1});
  CHECK(path.layers()[2] == std::vector<int>{2});

  CHECK_RAISES(Errc::not_a_tree, TreeTopology::from_edges(2, {{0, 1}}));
  CHECK_RAISES(Errc::not_a_tree, TreeTopology::from_edges(2, {{0, 1}, {1, 2}, {0, 2}}));
  CHECK_RAISES(Errc::not_a_tree, TreeTopology::from_edges(2, {{0, 1}, {0, 1}}));
}

TEST_CASE("network build validates buses and branches") {
  auto buses = [](int n) {
    std::vector<Bus> out;
    for (int i = 0; i <= n; ++i) out.push_back({i, "b" + std::to_string(i)});
    return out;
  };

  CHECK_RAISES(Errc::duplicate_downstream_bus,
               RadialNetwork::build(buses(2), {{1, 0, 0.01, 0.01}, {1, 0, 0.01, 0.01}}));
  CHECK_RAISES(Errc::disconnected,
               RadialNetwork::build(buses(2), {{1, 0, 0.01, 0.01}}));
  CHECK_RAISES(Errc::non_positive_impedance,
               RadialNetwork::build(buses(1), {{1, 0, 0.0, 0.01}}));
  CHECK_RAISES(Errc::non_positive_impedance,
               RadialNetwork::build(buses(1), {{1, 0, 0.01, -0.01}}));
  CHECK_RAISES(Errc::invalid_argument,
               RadialNetwork::build({{0, "sub"}, {5, "far"}}, {{1, 0, 0.01, 0.01}}));
}

TEST_CASE("conductor library nearest breaks ties downward") {
  const ConductorLibrary lib({1.0, 2.0});
  CHECK(lib.nearest(1.5) == 0);
  CHECK(lib.nearest(1.6) == 1);
  CHECK(lib.nearest(0.2) == 0);
  CHECK(lib.nearest(5.0) == 1);
  const ConductorLibrary feeder13({0.5153, 1.2840, 0.8124, 0.8112, 0.9864, 2.0655});
  CHECK(feeder13.nearest(0.8124) == 2);
  CHECK(feeder13.nearest(0.8112) == 3);
  CHECK(feeder13.nearest(2.5) == 5);
}

TEST_CASE("builtin fixtures expose the documented shapes") {
  const std::vector<std::string> names = builtin_fixture_names();
  REQUIRE(names == std::vector<std::string>{"feeder13", "feeder37", "feeder69"});

  const Fixture f13 = builtin_fixture("feeder13");
  CHECK(f13.network.branch_count() == 10);
  CHECK(f13.network.topology().max_depth() == 4);
  CHECK(f13.library.ratios() ==
        std::vector<double>{0.5153, 1.2840, 0.8124, 0.8112, 0.9864, 2.0655});

  const Fixture f37 = builtin_fixture("feeder37");
  CHECK(f37.network.branch_count() == 36);
  CHECK(f37.network.topology().max_depth() == 8);
  CHECK(f37.library.ratios() == std::vector<double>{1.4536, 1.6222, 2.7482, 1.9691});

  const Fixture f69 = builtin_fixture("feeder69");
  CHECK(f69.network.branch_count() == 66);
  CHECK(f69.network.topology().max_depth() == 26);
  CHECK(f69.library.ratios() ==
        std::vector<double>{0.4, 0.8, 0.9, 2.0, 2.9, 3.0, 3.1, 3.3, 3.4});

  // Every branch ratio sits exactly on a library entry.
  for (const auto& fixture : {f13, f37, f69}) {
    const Eigen::VectorXd ratios = fixture.network.ratios();
    for (int j = 0; j < ratios.size(); ++j) {
      const double entry = fixture.library.ratio(fixture.library.nearest(ratios(j)));
      CHECK(std::abs(ratios(j) - entry) <= 1e-12 * entry);
    }
  }

  CHECK_RAISES(Errc::invalid_argument, builtin_fixture("feeder99"));
}
