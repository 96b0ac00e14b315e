#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gridtwin/network.hpp"
#include "gridtwin/powerflow.hpp"

// Checks that the statement throws a gridtwin::Error with the given code.
#define CHECK_RAISES(expected, ...)                                 \
  do {                                                              \
    bool caught_expected_ = false;                                  \
    try {                                                           \
      __VA_ARGS__;                                                  \
    } catch (const gridtwin::Error& e_) {                           \
      caught_expected_ = true;                                      \
      CHECK_MESSAGE(e_.code() == (expected),                        \
                    "raised \"" << e_.what() << "\" instead");      \
    }                                                               \
    CHECK_MESSAGE(caught_expected_, "expected error " #expected     \
                                    " from: " #__VA_ARGS__);        \
  } while (0)

namespace testutil {

using namespace gridtwin;

inline double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

// Random rooted tree: the parent of branch j is drawn uniformly from the
// buses 0..j-1 that already exist, so every labelled tree shape is reachable.
inline std::vector<int> random_parents(std::mt19937_64& rng, int n) {
  std::vector<int> parents(n);
  for (int j = 1; j <= n; ++j) {
    parents[j - 1] = std::uniform_int_distribution<int>(0, j - 1)(rng);
  }
  return parents;
}

inline RadialNetwork make_network(const std::vector<int>& parents,
                                  const Eigen::VectorXd& r, const Eigen::VectorXd& x) {
  const int n = static_cast<int>(parents.size());
  std::vector<Bus> buses;
  buses.reserve(n + 1);
  for (int i = 0; i <= n; ++i) buses.push_back({i, "bus" + std::to_string(i)});
  std::vector<Branch> branches;
  branches.reserve(n);
  for (int j = 1; j <= n; ++j) {
    branches.push_back({j, parents[j - 1], r(j - 1), x(j - 1)});
  }
  return RadialNetwork::build(std::move(buses), std::move(branches));
}

inline RadialNetwork single_branch(double r, double x) {
  return make_network({0}, Eigen::VectorXd::Constant(1, r),
                      Eigen::VectorXd::Constant(1, x));
}

struct RandomNetworkOptions {
  double x_lo = 1e-3;
  double x_hi = 5e-2;
  double ratio_lo = 0.3;
  double ratio_hi = 3.5;
};

inline RadialNetwork random_network(std::mt19937_64& rng, int n,
                                    const RandomNetworkOptions& opt = {}) {
  const std::vector<int> parents = random_parents(rng, n);
  std::uniform_real_distribution<double> draw_x(opt.x_lo, opt.x_hi);
  std::uniform_real_distribution<double> draw_ratio(opt.ratio_lo, opt.ratio_hi);
  Eigen::VectorXd x(n), r(n);
  for (int j = 0; j < n; ++j) {
    x(j) = draw_x(rng);
    r(j) = draw_ratio(rng) * x(j);
  }
  return make_network(parents, r, x);
}

// Same tree and reactances with replaced per-branch ratios.
inline RadialNetwork with_ratios(const RadialNetwork& net, const Eigen::VectorXd& ratios) {
  const int n = net.branch_count();
  std::vector<int> parents(n);
  for (int j = 1; j <= n; ++j) parents[j - 1] = net.topology().parent(j);
  const Eigen::VectorXd x = net.reactances();
  return make_network(parents, (ratios.array() * x.array()).matrix(), x);
}

// K intervals that satisfy the loss-free linear voltage model exactly.  Load
// magnitudes shrink with n^2 so deep paths cannot drive v below zero.
inline SampleSet lindistflow_samples(const RadialNetwork& net, int K,
                                     std::mt19937_64& rng, double v0 = 1.0) {
  const int n = net.branch_count();
  const double cap = 3.0 / (static_cast<double>(n) * n + 10.0);
  std::uniform_real_distribution<double> magnitude(0.1 * cap, cap);
  std::uniform_real_distribution<double> power_factor(0.9, 0.99);
  Eigen::MatrixXd p(K, n), q(K, n), v(K, n);
  const Eigen::VectorXd v0s = Eigen::VectorXd::Constant(K, v0);
  for (int k = 0; k < K; ++k) {
    for (int j = 0; j < n; ++j) {
      const double mag = magnitude(rng);
      p(k, j) = -mag;
      q(k, j) = -mag * std::tan(std::acos(power_factor(rng)));
    }
    v.row(k) =
        solve_linearized(net, p.row(k).transpose(), q.row(k).transpose(), v0).transpose();
  }
  return SampleSet(std::move(p), std::move(q), std::move(v), v0s);
}

// Fresh scratch directory under the system temp root.
inline std::string temp_dir(const std::string& tag) {
  static int counter = 0;
  const auto path = std::filesystem::temp_directory_path() /
                    ("gridtwin_" + tag + "_" + std::to_string(++counter));
  std::filesystem::remove_all(path);
  std::filesystem::create_directories(path);
  return path.string();
}

}  // namespace testutil
