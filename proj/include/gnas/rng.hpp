#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gnas/errors.hpp"

namespace gnas {

// Deterministic random stream. std::mt19937_64 has a fully specified state
// transition, so sequences are reproducible across platforms and standard
// libraries; the helpers below deliberately avoid std::*_distribution, whose
// output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53 bits of precision.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n), unbiased via rejection.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw ArgumentError("Rng::below: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  int index(std::size_t n) { return static_cast<int>(below(n)); }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Marsaglia polar; caches the spare deviate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  // Serializes the full stream state (engine plus spare deviate).
  std::string save_state() const {
    std::ostringstream out;
    out << engine_ << ' ' << (has_spare_ ? 1 : 0);
    if (has_spare_) {
      out.precision(17);
      out << ' ' << spare_;
    }
    return out.str();
  }

  void load_state(const std::string& text) {
    std::istringstream in(text);
    int spare_flag = 0;
    if (!(in >> engine_ >> spare_flag)) throw ParseError("Rng state: malformed");
    has_spare_ = spare_flag != 0;
    spare_ = 0.0;
    if (has_spare_ && !(in >> spare_)) throw ParseError("Rng state: missing spare value");
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Mixes a salt into a seed so independent subsystems get independent streams.
// SplitMix64 finalizer; stable across platforms.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace gnas
