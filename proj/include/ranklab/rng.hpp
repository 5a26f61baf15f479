#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

namespace ranklab {

/// Mixing function from SplitMix64; also used to derive stream keys.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Hash an ordered tuple of integers into a single 64-bit key.
inline std::uint64_t stream_key(std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (auto p : parts) h = mix64(h ^ mix64(p));
  return h;
}

/// Stream tags keep the random draws of different subsystems disjoint.
enum class Stream : std::uint64_t {
  users = 1,
  listings,
  tiebreak,
  search_shape,
  candidates,
  click_count,
  click_pick,
  request_count,
  request_pick,
  rerank,
  garble,
  mc_oracle,
  kmedoids,
  test_data,
};

/// Counter-based random stream: the state is a pure function of its key,
/// so draws do not depend on scheduling or on the order entities are visited.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t key) noexcept : state_(key) {}
  RandomStream(std::uint64_t seed, Stream tag, std::uint64_t a = 0, std::uint64_t b = 0) noexcept
      : state_(stream_key({seed, static_cast<std::uint64_t>(tag), a, b})) {}

  std::uint64_t next() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // (0, 1)
  double uniform_open() noexcept { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, n) (Lemire's multiply-shift with rejection).
  std::uint64_t below(std::uint64_t n) noexcept {
    if (n <= 1) return 0;
    unsigned __int128 m = static_cast<unsigned __int128>(next()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

  /// Standard Gumbel (extreme value type 1) draw.
  double gumbel() noexcept { return -std::log(-std::log(uniform_open())); }

  std::uint64_t poisson(double mean) noexcept {
    if (mean <= 0.0) return 0;
    if (mean > 60.0) {
      const double x = std::round(normal(mean, std::sqrt(mean)));
      return x < 0.0 ? 0 : static_cast<std::uint64_t>(x);
    }
    const double limit = std::exp(-mean);
    std::uint64_t k = 0;
    double p = uniform_open();
    while (p > limit) {
      ++k;
      p *= uniform_open();
    }
    return k;
  }

  std::uint64_t binomial(std::uint64_t n, double p) noexcept {
    std::uint64_t k = 0;
    for (std::uint64_t i = 0; i < n; ++i) k += bernoulli(p) ? 1 : 0;
    return k;
  }

  /// Index drawn with probability proportional to weights.
  std::size_t categorical(std::span<const double> weights) noexcept {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (u < weights[i]) return i;
      u -= weights[i];
    }
    return weights.empty() ? 0 : weights.size() - 1;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) noexcept {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Standalone uniform in [0,1) keyed by a tuple; used for shared draws such
/// as the status-quo tiebreak.
inline double keyed_uniform(std::initializer_list<std::uint64_t> parts) noexcept {
  return static_cast<double>(mix64(stream_key(parts)) >> 11) * 0x1.0p-53;
}

}  // namespace ranklab
