#pragma once

#include <array>
#include <cstdint>

namespace vxr {

// All randomness in the toolkit flows through this generator rather than
// <random> distributions, so that a (config, seed) pair reproduces byte-identical
// results on any platform and under any thread count.
//
// Generator: xoshiro256++, seeded through splitmix64. Independent streams are
// derived as stream(seed, tag, lane); every parallel lane (voxel, fold,
// replicate, sweep phase) owns its own stream.
class Rng {
public:
  explicit Rng(std::uint64_t seed);

  // Deterministic substream for (seed, tag, lane). Tags are component constants
  // (see stream_tag below); lanes index voxels / folds / replicates.
  static Rng stream(std::uint64_t seed, std::uint64_t tag, std::uint64_t lane = 0);

  std::uint64_t next_u64();

  // uniform double in [0, 1), 53-bit resolution
  double uniform();

  // uniform integer in [0, n), unbiased
  std::uint64_t uniform_below(std::uint64_t n);

  // standard normal (Marsaglia polar, one spare cached)
  double normal();

  // Gamma(shape, rate 1) via Marsaglia-Tsang; shape < 1 handled by boosting
  double gamma(double shape);

  // Inverse gamma with density proportional to x^{-shape-1} exp(-scale/x)
  double inv_gamma(double shape, double scale);

  // Fisher-Yates shuffle of [0, n) index vector helper lives at call sites.

private:
  std::array<std::uint64_t, 4> state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Derives a child seed for a component/lane pair; same mixing as Rng::stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t lane = 0);

// Stream tags used to derive independent substreams from one master seed.
namespace stream_tag {
inline constexpr std::uint64_t kFoldPlan = 0x01;
inline constexpr std::uint64_t kElasticNetCv = 0x02;
inline constexpr std::uint64_t kGibbs = 0x03;
inline constexpr std::uint64_t kSimulate = 0x04;
inline constexpr std::uint64_t kShuffle = 0x05;
inline constexpr std::uint64_t kExperiment = 0x06;
inline constexpr std::uint64_t kMarginalPrior = 0x07;
inline constexpr std::uint64_t kPairSampling = 0x08;
inline constexpr std::uint64_t kInnerSplit = 0x09;
inline constexpr std::uint64_t kChecks = 0x0a;
}  // namespace stream_tag

}  // namespace vxr
