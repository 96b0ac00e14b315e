#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gridtwin {

// Failure categories surfaced by the library.  Every gridtwin::Error carries
// one of these so callers (and the CLI) can react without string matching.
enum class Errc {
  invalid_argument,
  parse_error,
  io_error,
  // network construction
  cycle_detected,
  disconnected,
  duplicate_downstream_bus,
  non_positive_impedance,
  not_a_tree,
  // power flow
  non_convergence,
  missing_child_flow,
  zero_voltage,
  // estimation
  dimension_mismatch,
  too_few_samples,
  too_few_points,
  ill_conditioned,
  singular_normal_matrix,
  degenerate_row,
  no_cluster_found,
  all_candidates_degenerate,
  unrooted_topology,
  universe_mismatch,
  constant_row,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, Errc code, const std::string& message) {
  if (!condition) raise(code, message);
}

// Derives an independent 64-bit seed for stream `stream` of a run seeded with
// `seed` (splitmix64 finalizer).  Used so sample k always sees the same RNG
// state no matter how work is split across threads.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace gridtwin
