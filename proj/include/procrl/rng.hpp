#ifndef PROCRL_RNG_HPP_
#define PROCRL_RNG_HPP_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace procrl {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based stream derivation: the same (seed, ids...) always yields the
// same engine, independent of scheduling order.
constexpr std::uint64_t stream_key(std::uint64_t seed,
                                   std::initializer_list<std::uint64_t> ids) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t id : ids) h = splitmix64(h ^ splitmix64(id + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng substream(std::uint64_t seed,
                     std::initializer_list<std::uint64_t> ids) {
  return Rng(stream_key(seed, ids));
}

// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [lo, hi].
inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<std::int64_t>(uniform01(rng) * static_cast<double>(span));
}

// Stream ids used by the pipeline stages, kept apart so that no two stages
// ever draw from the same substream.
enum class StreamTag : std::uint64_t {
  kTaskgen = 1,
  kSplit,
  kInit,
  kSft,
  kRollout,
  kPpo,
  kCollect,
  kPrmTrain,
  kEval,
  kSubsample,
};

inline std::uint64_t tag(StreamTag t) { return static_cast<std::uint64_t>(t); }

}  // namespace procrl

#endif  // PROCRL_RNG_HPP_
