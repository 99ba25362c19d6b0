#pragma once

// Independent reference computations and random case generators for tests.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "aoi/core.hpp"

namespace testing_support {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline double phi_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2 * M_PI); }
inline double tail(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

/// Adaptive Simpson on [a, b].
inline double simpson(const std::function<double(double)>& f, double a, double b, double tol = 1e-12, int depth = 48) {
  std::function<double(double, double, double, double, double, double, int)> rec =
      [&](double lo, double hi, double flo, double fmid, double fhi, double whole, int d) {
        const double mid = 0.5 * (lo + hi);
        const double lm = 0.5 * (lo + mid), rm = 0.5 * (mid + hi);
        const double flm = f(lm), frm = f(rm);
        const double left = (mid - lo) / 6 * (flo + 4 * flm + fmid);
        const double right = (hi - mid) / 6 * (fmid + 4 * frm + fhi);
        if (d <= 0 || std::abs(left + right - whole) <= 15 * tol) return left + right + (left + right - whole) / 15;
        return rec(lo, mid, flo, flm, fmid, left, d - 1) + rec(mid, hi, fmid, frm, fhi, right, d - 1);
      };
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return rec(a, b, fa, fm, fb, (b - a) / 6 * (fa + 4 * fm + fb), depth);
}

/// Pr(Z0 > a, Z1 > b) for standard normals with correlation rho in (-1, 1),
/// as a one-dimensional integral over Z0.
inline double bivariate_tail(double a, double b, double rho) {
  if (a == -kInf) return tail(b);
  if (b == -kInf) return tail(a);
  const double s = std::sqrt(1 - rho * rho);
  const double hi = std::max(a, 0.0) + 12;
  // Split at the point where the conditional tail switches regime.
  const double mid = std::clamp(b / std::max(rho, 1e-3), a, hi);
  auto f = [&](double u) { return phi_pdf(u) * tail((b - rho * u) / s); };
  return simpson(f, a, mid, 1e-14) + simpson(f, mid, hi, 1e-14);
}

/// Pr(Z0 > a0, Z1 > a1, Z2 > a2) for a Markov (OU-sampled) triple with lag-one
/// correlation rho: conditioning on Z1 leaves Z0 and Z2 independent.
inline double trivariate_ou_tail(double a0, double a1, double a2, double rho) {
  const double s = std::sqrt(1 - rho * rho);
  auto f = [&](double z1) {
    const double p0 = a0 == -kInf ? 1.0 : tail((a0 - rho * z1) / s);
    const double p2 = a2 == -kInf ? 1.0 : tail((a2 - rho * z1) / s);
    return phi_pdf(z1) * p0 * p2;
  };
  const double lo = a1 == -kInf ? -12.0 : a1;
  return simpson(f, lo, std::max(lo, 0.0) + 12, 1e-14);
}

/// Deterministic stream of cases for property tests.
class CaseGen {
 public:
  explicit CaseGen(std::uint64_t seed) : eng_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  long integer(long lo, long hi) { return std::uniform_int_distribution<long>(lo, hi)(eng_); }
  double normal() { return std::normal_distribution<double>()(eng_); }
  bool coin(double p = 0.5) { return uniform(0, 1) < p; }
  std::mt19937_64& engine() { return eng_; }

  std::vector<double> thresholds(std::size_t n, double lo, double hi, double p_minus_inf = 0) {
    std::vector<double> v(n);
    for (auto& x : v) x = coin(p_minus_inf) ? -kInf : uniform(lo, hi);
    return v;
  }

 private:
  std::mt19937_64 eng_;
};

/// Every delay equal to d.
class ConstantDelayOracle final : public aoi::JointTailOracle {
 public:
  explicit ConstantDelayOracle(double d) : d_(d) {}
  double joint_tail(aoi::IndexRange, std::span<const double> b) const override {
    for (double v : b)
      if (!(d_ > v)) return 0.0;
    return 1.0;
  }

 private:
  double d_;
};

/// Independent delays uniform on [lo, hi].
class UniformIidOracle final : public aoi::JointTailOracle {
 public:
  UniformIidOracle(double lo, double hi) : lo_(lo), hi_(hi) {}
  double joint_tail(aoi::IndexRange, std::span<const double> b) const override {
    double p = 1;
    for (double v : b) p *= std::clamp((hi_ - v) / (hi_ - lo_), 0.0, 1.0);
    return p;
  }

 private:
  double lo_, hi_;
};

}  // namespace testing_support
