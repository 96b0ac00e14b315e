#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "gridtwin/network.hpp"

namespace gridtwin {

// Built-in benchmark feeder with its conductor catalogue.
struct Fixture {
  std::string name;
  RadialNetwork network;
  ConductorLibrary library;
};

std::vector<std::string> builtin_fixture_names();
Fixture builtin_fixture(const std::string& name);

// Synthetic household-style demand: a per-bus base magnitude, a diurnal
// shape, and per-interval jitter.  Each bus gets a fixed power-factor
// habit drawn from [pf_min, pf_max]; individual intervals wobble around it
// by at most pf_wobble.  Loads are returned as negative injections.
struct LoadOptions {
  double scale = 1.0;             // multiplies every base magnitude
  double magnitude_jitter = 0.3;  // lognormal sigma of per-interval wobble
  double pf_min = 0.92;           // per-bus power-factor band
  double pf_max = 0.98;
  double pf_wobble = 0.02;        // per-interval half-width around the bus habit
  double v0 = 1.0;                // substation squared voltage
  double v0_jitter = 0.0;         // stddev of per-interval v0 wobble
};

struct LoadProfile {
  Eigen::MatrixXd p, q;  // K x n, negative injections
  Eigen::VectorXd v0;    // K
};

LoadProfile synthesize_loads(const RadialNetwork& net, int intervals, std::uint64_t seed,
                             const LoadOptions& options = {});

}  // namespace gridtwin
