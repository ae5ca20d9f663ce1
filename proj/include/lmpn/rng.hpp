#pragma once

// Splittable RNG streams: every (master seed, purpose, index) triple maps
// to an independent mt19937_64 via splitmix64 mixing, so episode i always
// sees the same stream regardless of evaluation order.

#include <cstdint>
#include <random>

namespace lmpn {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t purpose,
                                 std::uint64_t index = 0) {
  return splitmix64(splitmix64(master ^ purpose) ^ index);
}

inline std::mt19937_64 stream_rng(std::uint64_t master, std::uint64_t purpose,
                                  std::uint64_t index = 0) {
  return std::mt19937_64(derive_seed(master, purpose, index));
}

// Stream purposes, fixed for reproducibility of recorded runs.
namespace streams {
constexpr std::uint64_t kParamsInit = 0x01;
constexpr std::uint64_t kTrainEpisode = 0x02;
constexpr std::uint64_t kValEpisode = 0x03;
constexpr std::uint64_t kEvalEpisode = 0x04;
constexpr std::uint64_t kHoldoutSplit = 0x05;
constexpr std::uint64_t kVocabInit = 0x06;
constexpr std::uint64_t kExportEpisode = 0x07;
constexpr std::uint64_t kTsneInit = 0x08;
}  // namespace streams

}  // namespace lmpn
