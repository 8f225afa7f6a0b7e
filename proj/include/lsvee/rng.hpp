#pragma once

#include <cstdint>
#include <random>
#include <unordered_map>

#include "lsvee/common.hpp"

namespace lsvee {

using RngStream = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mixSeed(std::uint64_t h, std::uint64_t v) {
  return splitmix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

// Operation tags for substream derivation.
enum class StreamOp : std::uint64_t {
  SampleObsReward = 1,
  RunEpisode = 2,
  McValuePrediction = 3,
  TdElimDraws = 4,
  OnDemandRollout = 5,
  Generator = 6,
  Baseline = 7,
};

// One master seed per run. Each (operation, path, invocation-counter) triple
// derives an independent substream, so the k-th call of an operation at a path
// sees the same randomness no matter how other calls interleave.
class RngFactory {
 public:
  explicit RngFactory(std::uint64_t masterSeed) : master_(masterSeed) {}

  RngStream stream(StreamOp op, std::uint64_t pathCode) {
    std::uint64_t key = mixSeed(static_cast<std::uint64_t>(op), pathCode);
    std::uint64_t invocation = counters_[key]++;
    std::uint64_t seed = mixSeed(mixSeed(mixSeed(master_, static_cast<std::uint64_t>(op)), pathCode), invocation);
    return RngStream(seed);
  }

  std::uint64_t masterSeed() const { return master_; }

 private:
  std::uint64_t master_;
  std::unordered_map<std::uint64_t, std::uint64_t> counters_;
};

// std::uniform_real_distribution and friends are not bit-stable across
// standard libraries; these are.
inline double u01(RngStream& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

inline int uniformInt(RngStream& g, int n) {
  // n is tiny everywhere this is used; modulo bias is ~n/2^64.
  return static_cast<int>(g() % static_cast<std::uint64_t>(n));
}

inline bool bernoulliDraw(RngStream& g, double p) { return u01(g) < p; }

}  // namespace lsvee
