#include "mwq/rng.hpp"

#include <cmath>

namespace mwq {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double RandomStream::uniform01() {
  return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
}

double RandomStream::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_normal_;
  }
  // Box-Muller; reject u == 0 so the log is finite.
  double u = 0.0;
  do {
    u = uniform01();
  } while (u <= 0.0);
  double v = uniform01();
  double r = std::sqrt(-2.0 * std::log(u));
  double theta = 2.0 * M_PI * v;
  cached_normal_ = r * std::sin(theta);
  has_cached_ = true;
  return r * std::cos(theta);
}

std::complex<double> RandomStream::complex_normal_unit() {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  double re = normal() * kInvSqrt2;
  double im = normal() * kInvSqrt2;
  return {re, im};
}

long RandomStream::poisson(double mean) {
  if (mean <= 0.0) return 0;
  if (mean < 10.0) {
    double u = uniform01();
    double p = std::exp(-mean);
    double cdf = p;
    long k = 0;
    while (u > cdf && k < 1000) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
    }
    return k;
  }
  double draw = mean + std::sqrt(mean) * normal();
  return draw > 0.0 ? std::lround(draw) : 0;
}

RngStreams::RngStreams(std::uint64_t seed, int link_count) : master_seed(seed) {
  channel.reserve(link_count);
  arrival.reserve(link_count);
  for (int l = 0; l < link_count; ++l) {
    channel.push_back(derive(seed, 0, static_cast<std::uint64_t>(l)));
    arrival.push_back(derive(seed, 1, static_cast<std::uint64_t>(l)));
  }
}

RandomStream RngStreams::derive(std::uint64_t master, std::uint64_t purpose,
                                std::uint64_t index) {
  std::uint64_t s = master;
  std::uint64_t a = splitmix64(s);
  s ^= purpose * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL;
  std::uint64_t b = splitmix64(s);
  s ^= index * 0x9e3779b97f4a7c15ULL + 0x94d049bb133111ebULL;
  std::uint64_t c = splitmix64(s);
  return RandomStream(a ^ (b * 0x100000001b3ULL) ^ c);
}

}  // namespace mwq
