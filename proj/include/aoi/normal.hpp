#pragma once

#include <cmath>
#include <limits>
#include <numbers>

namespace aoi {

/// Standard normal density.
template <typename Scalar>
inline Scalar std_normal_pdf(Scalar x) {
  constexpr Scalar inv_sqrt_2pi = Scalar(1) / std::sqrt(Scalar(2) * std::numbers::pi_v<Scalar>);
  return inv_sqrt_2pi * std::exp(Scalar(-0.5) * x * x);
}

/// Upper tail Pr(Z > x) of a standard normal, accurate to ~1e-16 absolute.
/// Accepts +-infinity.
template <typename Scalar>
inline Scalar std_normal_tail(Scalar x) {
  if (std::isinf(x)) return x > 0 ? Scalar(0) : Scalar(1);
  return Scalar(0.5) * std::erfc(x / std::numbers::sqrt2_v<Scalar>);
}

/// Lower cdf Pr(Z <= x).
template <typename Scalar>
inline Scalar std_normal_cdf(Scalar x) {
  return std_normal_tail(-x);
}

/// Pr(lo < Z <= hi), computed on the tail side that avoids cancellation.
template <typename Scalar>
inline Scalar std_normal_mass(Scalar lo, Scalar hi) {
  if (lo >= 0) return std_normal_tail(lo) - std_normal_tail(hi);
  if (hi <= 0) return std_normal_cdf(hi) - std_normal_cdf(lo);
  return Scalar(1) - std_normal_tail(hi) - std_normal_cdf(lo);
}

}  // namespace aoi
