#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <vector>

namespace mwq {

/// SplitMix64 step; used only to derive substream seeds.
std::uint64_t splitmix64(std::uint64_t& state);

/// Deterministic random stream. The engine is mt19937_64 (fully specified by
/// the standard) and every variate transform is implemented here, so two
/// builds produce bit-identical draw sequences for equal seeds.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : eng_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01();

  /// Standard normal via Box-Muller; pairs are cached.
  double normal();

  /// Complex draw with independent N(0, 1/2) parts, so E|z|^2 = 1.
  std::complex<double> complex_normal_unit();

  /// Poisson(mean): CDF inversion for mean < 10, rounded normal
  /// approximation above.
  long poisson(double mean);

 private:
  std::mt19937_64 eng_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

/// Master seed plus purpose-separated substreams, one per link for channel
/// noise and one per link for arrivals. Identical master seeds give
/// bit-identical trajectories for identical configurations.
struct RngStreams {
  std::uint64_t master_seed;
  std::vector<RandomStream> channel;
  std::vector<RandomStream> arrival;

  RngStreams(std::uint64_t seed, int link_count);

  /// Derives an independent stream from (master, purpose, index).
  static RandomStream derive(std::uint64_t master, std::uint64_t purpose,
                             std::uint64_t index);
};

}  // namespace mwq
