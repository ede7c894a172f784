#pragma once

// Seed streams. Every random quantity in the library is drawn from an engine
// keyed by (master seed, experiment tag, stream index), so results do not
// depend on how streams are scheduled across worker threads.

#include <cstdint>
#include <random>
#include <string_view>

#include <boost/random/normal_distribution.hpp>

namespace cuefield {

using Engine = std::mt19937_64;

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// 64-bit key for stream `index` of experiment `tag` under `master`.
inline constexpr std::uint64_t stream_key(std::uint64_t master, std::string_view tag,
                                          std::uint64_t index) {
  std::uint64_t k = detail::splitmix64(master);
  k = detail::splitmix64(k ^ detail::fnv1a(tag));
  return detail::splitmix64(k ^ detail::splitmix64(index + 0x632be59bd9b4e019ULL));
}

inline Engine make_engine(std::uint64_t master, std::string_view tag = "",
                          std::uint64_t index = 0) {
  std::uint64_t key = stream_key(master, tag, index);
  std::seed_seq seq{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32),
                    static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(index)};
  return Engine(seq);
}

/// Standard normal draws (ziggurat).
class NormalSource {
 public:
  explicit NormalSource(Engine& eng) : eng_(&eng) {}
  double operator()() { return dist_(*eng_); }
  Engine& engine() { return *eng_; }

 private:
  Engine* eng_;
  boost::random::normal_distribution<double> dist_{0.0, 1.0};
};

/// Uniform on [0, 1).
inline double uniform01(Engine& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

}  // namespace cuefield
