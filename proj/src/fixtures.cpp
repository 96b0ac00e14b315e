#include "gridtwin/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>

#include "gridtwin/common.hpp"

namespace gridtwin {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

RadialNetwork assemble(const std::vector<std::string>& names,
                       const std::vector<int>& parents, const std::vector<double>& x,
                       const std::vector<int>& ratio_index,
                       const ConductorLibrary& library) {
  const int n = static_cast<int>(parents.size());
  std::vector<Bus> buses;
  buses.reserve(n + 1);
  for (int i = 0; i <= n; ++i) buses.push_back({i, names[i]});
  std::vector<Branch> branches;
  branches.reserve(n);
  for (int j = 1; j <= n; ++j) {
    const double ratio = library.ratio(ratio_index[j - 1]);
    branches.push_back({j, parents[j - 1], ratio * x[j - 1], x[j - 1]});
  }
  return RadialNetwork::build(std::move(buses), std::move(branches));
}

Fixture make_feeder13() {
  // 11-bus chain-and-branch feeder (depth 4) with six conductor classes.
  ConductorLibrary library({0.5153, 1.2840, 0.8124, 0.8112, 0.9864, 2.0655});
  const std::vector<std::string> names = {"650", "632", "633", "645", "671", "646",
                                          "675", "680", "684", "611", "652"};
  const std::vector<int> parents = {0, 1, 1, 1, 3, 4, 4, 4, 8, 8};
  const std::vector<double> x = {0.02,  0.005, 0.006, 0.02,  0.005,
                                 0.006, 0.01,  0.005, 0.004, 0.0045};
  const std::vector<int> ratio_index = {0, 1, 2, 0, 2, 4, 0, 3, 5, 5};
  return {"feeder13", assemble(names, parents, x, ratio_index, library), library};
}

Fixture make_feeder37() {
  // 37-bus feeder analogue (depth 8) with four conductor classes.
  ConductorLibrary library({1.4536, 1.6222, 2.7482, 1.9691});
  const std::vector<int> parents = {0,  1,  1,  2,  2,  3,  3,  4,  5,  5,  6,  7,
                                    7,  8,  8,  9,  10, 11, 11, 12, 13, 14, 15, 15,
                                    16, 17, 18, 20, 20, 21, 23, 25, 27, 29, 30, 31};
  const int n = static_cast<int>(parents.size());
  std::vector<std::string> names(n + 1);
  names[0] = "799";
  for (int j = 1; j <= n; ++j) names[j] = std::to_string(700 + j);
  std::vector<double> x(n);
  std::vector<int> ratio_index(n);
  for (int j = 1; j <= n; ++j) {
    x[j - 1] = 0.004 + 0.0008 * ((j * 7) % 13);
    // Conductor classes by construction era: the near-substation third, the
    // middle third, and the outer third each share a class.
    ratio_index[j - 1] = (j <= 12) ? 1 : ((j <= 24) ? 0 : 3);
  }
  // A few end-of-line segments keep the heavy legacy conductor.
  ratio_index[33 - 1] = 2;
  ratio_index[35 - 1] = 2;
  ratio_index[36 - 1] = 2;
  return {"feeder37", assemble(names, parents, x, ratio_index, library), library};
}

Fixture make_feeder69() {
  // 67-bus feeder analogue: 26-bus trunk with seven laterals, nine
  // conductor classes.
  ConductorLibrary library({0.4, 0.8, 0.9, 2.0, 2.9, 3.0, 3.1, 3.3, 3.4});
  std::vector<int> parents(66);
  std::vector<char> trunk(67, 0);
  for (int j = 1; j <= 26; ++j) {
    parents[j - 1] = j - 1;
    trunk[j] = 1;
  }
  const std::vector<std::pair<int, std::pair<int, int>>> laterals = {
      {2, {27, 34}}, {3, {35, 38}},  {7, {39, 44}}, {8, {45, 49}},
      {10, {50, 52}}, {11, {53, 64}}, {12, {65, 66}}};
  for (const auto& [tap, range] : laterals) {
    int upstream = tap;
    for (int j = range.first; j <= range.second; ++j) {
      parents[j - 1] = upstream;
      upstream = j;
    }
  }
  const int n = static_cast<int>(parents.size());
  std::vector<std::string> names(n + 1);
  for (int i = 0; i <= n; ++i) names[i] = std::to_string(i);
  std::vector<double> x(n);
  std::vector<int> ratio_index(n);
  for (int j = 1; j <= n; ++j)
    x[j - 1] = trunk[j] ? 0.0012 + 0.0002 * (j % 5) : 0.002 + 0.00025 * (j % 7);
  // Conductor classes follow utility practice: a uniform trunk class and one
  // class per lateral, all drawn from the overhead family of the catalogue.
  auto set_range = [&](int lo, int hi, int cls) {
    for (int j = lo; j <= hi; ++j) ratio_index[j - 1] = cls;
  };
  set_range(1, 26, 5);   // trunk: 3.0
  set_range(27, 34, 4);  // 2.9
  set_range(35, 38, 6);  // 3.1
  set_range(39, 44, 7);  // 3.3
  set_range(45, 49, 4);  // 2.9
  set_range(50, 52, 6);  // 3.1
  set_range(53, 64, 5);  // 3.0
  set_range(65, 66, 8);  // 3.4
  return {"feeder69", assemble(names, parents, x, ratio_index, library), library};
}

}  // namespace

std::vector<std::string> builtin_fixture_names() {
  return {"feeder13", "feeder37", "feeder69"};
}

Fixture builtin_fixture(const std::string& name) {
  if (name == "feeder13") return make_feeder13();
  if (name == "feeder37") return make_feeder37();
  if (name == "feeder69") return make_feeder69();
  raise(Errc::invalid_argument, "unknown builtin fixture \"" + name + "\"");
}

LoadProfile synthesize_loads(const RadialNetwork& net, int intervals, std::uint64_t seed,
                             const LoadOptions& options) {
  require(intervals >= 0, Errc::invalid_argument, "interval count must be non-negative");
  require(options.scale >= 0.0 && std::isfinite(options.scale), Errc::invalid_argument,
          "load scale must be non-negative");
  require(options.magnitude_jitter >= 0.0, Errc::invalid_argument,
          "magnitude jitter must be non-negative");
  require(options.pf_min > 0.0 && options.pf_min <= options.pf_max &&
              options.pf_max <= 1.0,
          Errc::invalid_argument, "power-factor band must satisfy 0 < min <= max <= 1");
  require(options.pf_wobble >= 0.0, Errc::invalid_argument,
          "power-factor wobble must be non-negative");
  require(options.v0 > 0.0, Errc::invalid_argument,
          "substation squared voltage must be positive");
  require(options.v0_jitter >= 0.0, Errc::invalid_argument,
          "substation jitter must be non-negative");

  const int n = net.branch_count();

  // Per-bus base magnitudes, diurnal phases and power-factor habits,
  // independent of K.
  std::mt19937_64 base_rng(mix_seed(seed, 0x5eedULL));
  std::lognormal_distribution<double> share_dist(0.0, 0.6);
  std::uniform_real_distribution<double> phase_dist(0.0, kTwoPi);
  std::uniform_real_distribution<double> pf_dist(options.pf_min, options.pf_max);
  Eigen::VectorXd base(n), phase(n), pf_habit(n);
  for (int j = 0; j < n; ++j) base(j) = share_dist(base_rng);
  base *= options.scale / base.sum();
  for (int j = 0; j < n; ++j) phase(j) = phase_dist(base_rng);
  for (int j = 0; j < n; ++j) pf_habit(j) = pf_dist(base_rng);
  const double pf_floor = 0.5 * options.pf_min;
  const double pf_ceil = std::min(1.0, options.pf_max + options.pf_wobble);

  LoadProfile out;
  out.p.resize(intervals, n);
  out.q.resize(intervals, n);
  out.v0.resize(intervals);
  for (int k = 0; k < intervals; ++k) {
    std::mt19937_64 rng(mix_seed(seed, 1000003ULL + static_cast<std::uint64_t>(k)));
    std::lognormal_distribution<double> jitter_dist(0.0, options.magnitude_jitter);
    std::uniform_real_distribution<double> wobble_dist(-options.pf_wobble,
                                                       options.pf_wobble);
    const double clock = kTwoPi * static_cast<double>(k) / 96.0;  // 15-min cadence
    for (int j = 0; j < n; ++j) {
      const double shape = 0.7 + 0.3 * std::sin(clock + phase(j));
      double magnitude = base(j) * shape;
      if (options.magnitude_jitter > 0.0) magnitude *= jitter_dist(rng);
      double pf = pf_habit(j);
      if (options.pf_wobble > 0.0) pf = pf + wobble_dist(rng);
      pf = std::min(pf_ceil, std::max(pf_floor, pf));
      out.p(k, j) = -magnitude;
      out.q(k, j) = -magnitude * std::tan(std::acos(pf));
    }
    double v0 = options.v0;
    if (options.v0_jitter > 0.0) {
      std::normal_distribution<double> v0_dist(0.0, options.v0_jitter);
      v0 += v0_dist(rng);
    }
    require(v0 > 0.0, Errc::invalid_argument,
            "substation jitter produced a non-positive squared voltage");
    out.v0(k) = v0;
  }
  return out;
}

}  // namespace gridtwin
