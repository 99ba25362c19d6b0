#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>

#include "aoi/errors.hpp"

namespace aoi {

/// Gauss-Legendre nodes and weights on the reference interval [-1, 1].
template <typename Scalar>
struct GaussLegendre {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Vector nodes;
  Vector weights;
  /// Barycentric interpolation weights for the nodes.
  Vector bary;

  explicit GaussLegendre(int n) : nodes(n), weights(n), bary(n) {
    if (n < 1) throw InvalidArgument("GaussLegendre: need at least one node");
    for (int i = 0; i < n; ++i) {
      // Newton iteration on P_n from the Chebyshev-like initial guess.
      Scalar x = std::cos(std::numbers::pi_v<Scalar> * (Scalar(i) + Scalar(0.75)) / (Scalar(n) + Scalar(0.5)));
      Scalar dp = 0;
      for (int iter = 0; iter < 100; ++iter) {
        Scalar p0 = 1, p1 = x;
        for (int k = 2; k <= n; ++k) {
          const Scalar p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        if (n == 1) p0 = 1;
        dp = n * (x * p1 - p0) / (x * x - 1);
        const Scalar dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < Scalar(1e-15)) break;
      }
      // Recompute the derivative at the converged node.
      Scalar p0 = 1, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const Scalar p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1;
      dp = n * (x * p1 - p0) / (x * x - 1);
      nodes(n - 1 - i) = x;
      weights(n - 1 - i) = Scalar(2) / ((1 - x * x) * dp * dp);
    }
    for (int j = 0; j < n; ++j) {
      Scalar w = 1;
      for (int k = 0; k < n; ++k)
        if (k != j) w /= (nodes(j) - nodes(k));
      bary(j) = w;
    }
  }

  int size() const { return static_cast<int>(nodes.size()); }

  /// Node mapped to [lo, hi].
  Scalar node(int i, Scalar lo, Scalar hi) const {
    return Scalar(0.5) * (lo + hi) + Scalar(0.5) * (hi - lo) * nodes(i);
  }
  Scalar weight(int i, Scalar lo, Scalar hi) const { return Scalar(0.5) * (hi - lo) * weights(i); }

  /// Evaluates the polynomial interpolating `values` at the nodes mapped to
  /// [lo, hi], at point x.
  template <typename Derived>
  Scalar interpolate(const Eigen::MatrixBase<Derived>& values, Scalar lo, Scalar hi, Scalar x) const {
    const Scalar s = (2 * x - lo - hi) / (hi - lo);
    Scalar num = 0, den = 0;
    for (int j = 0; j < size(); ++j) {
      const Scalar d = s - nodes(j);
      if (d == 0) return values(j);
      const Scalar c = bary(j) / d;
      num += c * values(j);
      den += c;
    }
    return num / den;
  }
};

/// Brent's method for a bracketed root of f on [lo, hi]. Returns nullopt when
/// the endpoints do not bracket a sign change.
inline std::optional<double> brent_root(const std::function<double(double)>& f, double lo, double hi,
                                        double xtol = 1e-15, int max_iter = 300) {
  double a = lo, b = hi;
  double fa = f(a), fb = f(b);
  if (fa == 0) return a;
  if (fb == 0) return b;
  if ((fa > 0) == (fb > 0)) return std::nullopt;
  double c = a, fc = fa, d = b - a, e = d;
  for (int iter = 0; iter < max_iter; ++iter) {
    if ((fb > 0) == (fc > 0)) {
      c = a;
      fc = fa;
      d = e = b - a;
    }
    if (std::abs(fc) < std::abs(fb)) {
      a = b;
      b = c;
      c = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    const double tol = 2 * std::numeric_limits<double>::epsilon() * std::abs(b) + 0.5 * xtol;
    const double m = 0.5 * (c - b);
    if (std::abs(m) <= tol || fb == 0) return b;
    if (std::abs(e) >= tol && std::abs(fa) > std::abs(fb)) {
      double p, q, r;
      const double s = fb / fa;
      if (a == c) {
        p = 2 * m * s;
        q = 1 - s;
      } else {
        q = fa / fc;
        r = fb / fc;
        p = s * (2 * m * q * (q - r) - (b - a) * (r - 1));
        q = (q - 1) * (r - 1) * (s - 1);
      }
      if (p > 0)
        q = -q;
      else
        p = -p;
      if (2 * p < std::min(3 * m * q - std::abs(tol * q), std::abs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = m;
        e = m;
      }
    } else {
      d = m;
      e = m;
    }
    a = b;
    fa = fb;
    b += std::abs(d) > tol ? d : (m > 0 ? tol : -tol);
    fb = f(b);
  }
  return b;
}

}  // namespace aoi

namespace aoi {

/// Adaptive Gauss-Legendre integration of f on [a, b]: a 10-point panel is
/// accepted when it agrees with its two halves to within tol.
template <typename F>
double adaptive_integrate(const F& f, double a, double b, double tol = 1e-13, int max_depth = 40) {
  static const GaussLegendre<double> rule(10);
  auto panel = [&](double lo, double hi) {
    double s = 0;
    for (int i = 0; i < rule.size(); ++i) s += rule.weight(i, lo, hi) * f(rule.node(i, lo, hi));
    return s;
  };
  std::function<double(double, double, double, double, int)> recurse =
      [&](double lo, double hi, double whole, double eps, int depth) -> double {
    const double mid = 0.5 * (lo + hi);
    const double left = panel(lo, mid);
    const double right = panel(mid, hi);
    if (depth >= max_depth || std::abs(left + right - whole) <= eps) return left + right;
    return recurse(lo, mid, left, 0.5 * eps, depth + 1) + recurse(mid, hi, right, 0.5 * eps, depth + 1);
  };
  return recurse(a, b, panel(a, b), tol, 0);
}

}  // namespace aoi
