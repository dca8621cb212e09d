#pragma once

// Splittable, label-addressed random streams.
//
// A stream is identified by (seed, path). Children are derived by hashing a
// label or index into the parent key, so the draws seen by child "episode/7"
// do not depend on how many values any sibling consumed. Within a stream the
// generator is SplitMix64 over a 64-bit counter, and every distribution below
// is implemented here so sequences are identical across standard libraries.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "lift/core.hpp"

namespace lift {

namespace detail {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace detail

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0) : seed_(seed), key_(detail::mix64(seed ^ detail::kGolden)) {}

  std::uint64_t seed() const { return seed_; }
  const std::vector<std::string>& path() const { return path_; }

  RngStream child(std::string_view label) const {
    RngStream c = *this;
    c.key_ = detail::mix64(key_ ^ detail::mix64(detail::fnv1a(label) + 0x632BE59BD9B4E019ULL));
    c.counter_ = 0;
    c.path_.emplace_back(label);
    return c;
  }

  RngStream child(std::uint64_t index) const {
    RngStream c = *this;
    c.key_ = detail::mix64(key_ ^ detail::mix64(index * detail::kGolden + 0xD1B54A32D192ED03ULL));
    c.counter_ = 0;
    c.path_.push_back("#" + std::to_string(index));
    return c;
  }

  RngStream child(std::string_view label, std::uint64_t index) const {
    return child(label).child(index);
  }

  std::uint64_t next_u64() {
    ++counter_;
    return detail::mix64(key_ + counter_ * detail::kGolden);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1].
  double uniform_open_closed() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Unbiased integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw InvalidArgument("uniform_index: n must be positive");
    const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  /// Box-Muller; consumes two uniforms per call.
  double normal(double mean = 0.0, double stddev = 1.0) {
    const double u1 = uniform_open_closed();
    const double u2 = uniform01();
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    return mean + stddev * z;
  }

  Vec normal_vec(std::size_t d, double stddev = 1.0) {
    Vec v(d);
    for (double& x : v) x = normal(0.0, stddev);
    return v;
  }

  Vec uniform_box(std::size_t d, double half_width) {
    Vec v(d);
    for (double& x : v) x = uniform(-half_width, half_width);
    return v;
  }

  /// Uniform in the closed Euclidean ball of radius r.
  Vec uniform_ball(std::size_t d, double r) {
    if (d == 0) return {};
    Vec dir;
    double n = 0.0;
    do {
      dir = normal_vec(d);
      n = norm(dir);
    } while (n < 1e-12);
    const double radius = r * std::pow(uniform01(), 1.0 / static_cast<double>(d));
    Vec out = scaled(dir, radius / n);
    return clip_ball(out, r);
  }

  /// Fisher-Yates shuffle of `items`.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::vector<std::string> path_;
};

}  // namespace lift
