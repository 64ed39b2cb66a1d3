#ifndef HTTN_RNG_HPP
#define HTTN_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace httn {

using Rng = std::mt19937_64;

namespace detail {
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}
}  // namespace detail

/// Counter-based sub-stream derivation: the seed of stream (name, a, b)
/// depends only on the master seed and its own coordinates, so adding a
/// new stream never shifts existing ones.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view stream, std::uint64_t a = 0,
                                    std::uint64_t b = 0) {
  std::uint64_t h = detail::splitmix64(master ^ detail::fnv1a(stream));
  h = detail::splitmix64(h ^ (a + 0x632be59bd9b4e019ULL));
  h = detail::splitmix64(h ^ (b + 0x85157af5ULL));
  return h;
}

inline Rng make_rng(std::uint64_t master, std::string_view stream, std::uint64_t a = 0, std::uint64_t b = 0) {
  return Rng(derive_seed(master, stream, a, b));
}

}  // namespace httn

#endif  // HTTN_RNG_HPP
