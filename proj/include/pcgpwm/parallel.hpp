#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <random>

namespace pcgpwm {

/// Worker count used by library-level parallel loops. Defaults to the
/// PCGPWM_THREADS environment variable, else 1.
int num_threads();
void set_num_threads(int n);

/// Runs body(i) for i in [0, n). Each index is visited exactly once; callers
/// write only to per-index output so results do not depend on scheduling.
/// The first exception thrown by any body is rethrown on the calling thread.
void parallel_for(Eigen::Index n, const std::function<void(Eigen::Index)>& body);

/// Counter-based seed derivation: one root seed, independent streams per
/// (subsystem, counter) pair.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream, std::uint64_t counter = 0);

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t root, std::uint64_t stream, std::uint64_t counter = 0) {
  return Rng(derive_seed(root, stream, counter));
}

/// Stream identifiers for derive_seed.
namespace stream {
inline constexpr std::uint64_t kDesign = 1;
inline constexpr std::uint64_t kLocations = 2;
inline constexpr std::uint64_t kMissingness = 3;
inline constexpr std::uint64_t kHoldout = 4;
inline constexpr std::uint64_t kHyperStart = 5;
inline constexpr std::uint64_t kSampler = 6;
}  // namespace stream

}  // namespace pcgpwm
