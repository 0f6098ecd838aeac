#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace infocir {

using Vector = std::vector<float>;

inline double dot(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += double(a[i]) * double(b[i]);
  return acc;
}

inline double l2_norm(std::span<const float> a) { return std::sqrt(dot(a, a)); }

inline double l2_norm(std::span<const double> a) {
  double acc = 0.0;
  for (double x : a) acc += x * x;
  return std::sqrt(acc);
}

/// Cosine similarity in double precision. Zero vectors score 0.
inline double cosine(std::span<const float> a, std::span<const float> b) {
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

/// Normalizes a double accumulator and rounds it to f32. Returns an empty
/// vector when the input has zero norm.
inline Vector normalized_f32(std::span<const double> acc) {
  const double n = l2_norm(acc);
  if (n == 0.0 || !std::isfinite(n)) return {};
  Vector out(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(acc[i] / n);
  return out;
}

inline Vector normalized_f32(std::span<const float> v) {
  std::vector<double> acc(v.begin(), v.end());
  return normalized_f32(std::span<const double>(acc));
}

/// splitmix64 generator. All seeded randomness in the engine draws from this
/// so that outputs are byte-stable across standard libraries.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 bits.
  double uniform() { return double(next() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller (one value per call, second discarded).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

}  // namespace infocir
