#pragma once
// Deterministic RNG built on SplitMix64. Streams are derived from a master
// seed by mixing in a stream id, so draws depend only on (seed, stream,
// position): parallel generation equals serial generation, and results are
// identical across platforms (no std::*_distribution involved).

#include <cmath>
#include <cstdint>

#include "vaedim/tensor.hpp"

namespace vaedim {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t mix64(std::uint64_t x) {
  return splitmix64(x);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  // Independent substream of a master seed; tag values are arbitrary.
  static Rng stream(std::uint64_t master, std::uint64_t tag) {
    return Rng(mix64(master ^ mix64(tag + 0x632be59bd9b4e019ull)));
  }

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform on (0,1]; never 0, so log(u) is finite.
  double uniform() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; the second draw of each pair is cached.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  std::size_t index(std::size_t n) {  // uniform on [0, n)
    return static_cast<std::size_t>(next_u64() % n);
  }

  Tensor normal_tensor(Shape shape, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = scale * normal();
    return t;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace vaedim
