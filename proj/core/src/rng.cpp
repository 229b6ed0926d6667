#include "prise/rng.hpp"

#include <cmath>

#include "prise/errors.hpp"

namespace prise {

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (lo > hi) throw Error("uniform_int: empty range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(engine_());  // full 64-bit range
  const std::uint64_t limit = std::uint64_t(-1) - (std::uint64_t(-1) % span + 1) % span;
  std::uint64_t draw = engine_();
  while (draw > limit) draw = engine_();
  return lo + static_cast<std::int64_t>(draw % span);
}

double Rng::normal() {
  // Box-Muller; resample u1 away from 0 so log stays finite.
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

double Rng::gumbel() {
  double u = uniform();
  while (u <= 0.0) u = uniform();
  return -std::log(-std::log(u));
}

std::vector<std::int64_t> Rng::sample_without_replacement(std::int64_t n, std::int64_t k) {
  if (k > n) throw Error("sample_without_replacement: k exceeds population");
  std::vector<std::int64_t> pool(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
  std::vector<std::int64_t> out;
  out.reserve(static_cast<std::size_t>(k));
  for (std::int64_t i = 0; i < k; ++i) {
    const std::int64_t j = uniform_int(i, n - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    out.push_back(pool[static_cast<std::size_t>(i)]);
  }
  return out;
}

namespace {

std::uint64_t fnv1a_mix(std::uint64_t h, std::string_view text) {
  constexpr std::uint64_t kPrime = 1099511628211ull;
  for (const char c : text) {
    h ^= static_cast<std::uint8_t>(c);
    h *= kPrime;
  }
  return h;
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::string_view tag) {
  const std::uint64_t h = fnv1a_mix(14695981039346656037ull, tag);
  return splitmix(master ^ h);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index) {
  return splitmix(derive_seed(master, tag) + 0x9e3779b97f4a7c15ull * (index + 1));
}

}  // namespace prise
