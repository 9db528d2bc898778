#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace drddp {

using Rng = std::mt19937_64;

// Named substreams. Every random draw in the library comes from one of these,
// seeded from the run's root seed.
namespace stream {
inline constexpr std::string_view kDataset = "dataset";
inline constexpr std::string_view kForward = "forward";
inline constexpr std::string_view kEvaluation = "evaluation";
inline constexpr std::string_view kBenchmark = "benchmark";
inline constexpr std::string_view kTune = "tune";
inline constexpr std::string_view kWorstCase = "worst-case";
}  // namespace stream

std::uint64_t splitmix64(std::uint64_t x);

// Mixes (root, label, index) into an independent 64-bit seed.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label, std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t root, std::string_view label, std::uint64_t index = 0) {
  return Rng(derive_seed(root, label, index));
}

}  // namespace drddp
