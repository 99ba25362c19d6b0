#include "aoi/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "aoi/errors.hpp"

namespace aoi {

namespace {

constexpr double kGridRelTol = 1e-12;

void require_time(double t, const char* what) {
  if (!std::isfinite(t) || t < 0) throw InvalidArgument(std::string(what) + " must be finite and non-negative");
}

void require_tau(double tau) {
  if (!std::isfinite(tau) || tau <= 0) throw InvalidArgument("tau must be finite and positive");
}

}  // namespace

GenerationSchedule::GenerationSchedule(double tau) : tau_(tau) { require_tau(tau); }

TimeDecomposition decompose_time(double t, double tau) {
  require_time(t, "t");
  require_tau(tau);
  const double ratio = t / tau;
  long k = static_cast<long>(std::floor(ratio));
  // Snap times that sit within rounding of a generation instant onto it.
  const double nearest = std::round(ratio);
  if (std::abs(ratio - nearest) <= kGridRelTol * std::max(1.0, ratio)) k = static_cast<long>(nearest);
  double phi = t - static_cast<double>(k) * tau;
  if (std::abs(phi) <= kGridRelTol * std::max(tau, t)) phi = 0;
  if (phi < 0) {
    --k;
    phi += tau;
  }
  if (phi >= tau) {
    ++k;
    phi -= tau;
  }
  if (phi < 0 || phi >= tau) phi = 0;
  return {t, k, phi};
}

namespace {

// floor((x - phi) / tau) with the same grid snapping as decompose_time, so
// that x exactly on an atom n * tau + phi_t lands in the right branch.
long periods_below(double x, double phi, double tau) {
  const double ratio = (x - phi) / tau;
  const double nearest = std::round(ratio);
  if (std::abs(ratio - nearest) <= kGridRelTol * std::max(1.0, std::abs(ratio))) return static_cast<long>(nearest);
  return static_cast<long>(std::floor(ratio));
}

long theta_from(const TimeDecomposition& td, double x, double tau) {
  if (x < td.phi) return td.k + 1;
  return std::max(0L, td.k - periods_below(x, td.phi, tau));
}

}  // namespace

long theta(double t, double x, double tau) {
  require_time(x, "x");
  return theta_from(decompose_time(t, tau), x, tau);
}

PointMassOracle::PointMassOracle(std::vector<double> delays) : delays_(std::move(delays)) {}

double PointMassOracle::joint_tail(IndexRange range, std::span<const double> thresholds) const {
  if (range.empty()) return 1.0;
  if (range.first < 0 || static_cast<std::size_t>(range.last) >= delays_.size())
    throw EvaluationError("point-mass oracle: index range exceeds delay sequence");
  if (thresholds.size() != range.size()) throw InvalidArgument("point-mass oracle: threshold count mismatch");
  for (std::size_t j = 0; j < range.size(); ++j)
    if (!(delays_[static_cast<std::size_t>(range.first) + j] > thresholds[j])) return 0.0;
  return 1.0;
}

std::vector<double> arrival_thresholds(const TimeDecomposition& td, IndexRange range, double tau) {
  std::vector<double> b;
  b.reserve(range.size());
  for (long i = range.first; i <= range.last; ++i) b.push_back(static_cast<double>(td.k - i) * tau + td.phi);
  return b;
}

namespace {

double checked_tail(const JointTailOracle& oracle, IndexRange range, std::span<const double> b) {
  const double p = oracle.joint_tail(range, b);
  if (!std::isfinite(p) || p < -1e-12 || p > 1 + 1e-12) throw EvaluationError("oracle returned a value outside [0, 1]");
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace

double aoi_ccdf(double t, double x, const GenerationSchedule& schedule, const JointTailOracle& oracle) {
  require_time(x, "x");
  const double tau = schedule.tau();
  const TimeDecomposition td = decompose_time(t, tau);
  if (x < td.phi) return 1.0;
  const IndexRange range{theta_from(td, x, tau), td.k};
  const auto b = arrival_thresholds(td, range, tau);
  return checked_tail(oracle, range, b);
}

double AoiSupport::total_mass() const {
  double s = p_infinity;
  for (double m : masses) s += m;
  return s;
}

AoiSupport aoi_support(double t, const GenerationSchedule& schedule, std::span<const double> d_min,
                       const JointTailOracle& oracle) {
  const double tau = schedule.tau();
  const TimeDecomposition td = decompose_time(t, tau);
  if (d_min.size() < static_cast<std::size_t>(td.k + 1))
    throw InvalidArgument("aoi_support: d_min must cover packets 0..k_t");

  AoiSupport out;
  out.t = t;
  out.j_star = td.k + 1;
  for (long j = 0; j <= td.k; ++j) {
    if (d_min[static_cast<std::size_t>(td.k - j)] < static_cast<double>(j) * tau + td.phi) {
      out.j_star = j;
      break;
    }
  }

  // Pr(A_t >= n tau + phi) = tail([k-n+1, k]); Pr(A_t > n tau + phi) = tail([k-n, k]).
  auto tail_of_newest = [&](long count) {
    const IndexRange range{td.k - count + 1, td.k};
    const auto b = arrival_thresholds(td, range, tau);
    return checked_tail(oracle, range, b);
  };
  double above = tail_of_newest(out.j_star);
  for (long n = out.j_star; n <= td.k; ++n) {
    const double beyond = tail_of_newest(n + 1);
    out.atoms.push_back(static_cast<double>(n) * tau + td.phi);
    out.masses.push_back(std::max(0.0, above - beyond));
    above = beyond;
  }
  out.p_infinity = above;
  return out;
}

std::vector<double> aoi_path(std::span<const double> delays, const GenerationSchedule& schedule,
                             std::span<const double> t_grid) {
  const double tau = schedule.tau();
  if (!std::is_sorted(t_grid.begin(), t_grid.end())) throw InvalidArgument("aoi_path: t_grid must be sorted");
  for (double d : delays)
    if (!(d >= 0)) throw InvalidArgument("aoi_path: delays must be non-negative");
  std::vector<double> ages;
  ages.reserve(t_grid.size());
  if (t_grid.empty()) return ages;
  const TimeDecomposition last = decompose_time(t_grid.back(), tau);
  if (delays.size() < static_cast<std::size_t>(last.k + 1))
    throw InvalidArgument("aoi_path: delay sequence too short for the time horizon");

  for (double t : t_grid) {
    const TimeDecomposition td = decompose_time(t, tau);
    double age = kInfiniteAge;
    for (long n = td.k; n >= 0; --n) {
      const double gen = schedule.generation_time(static_cast<std::size_t>(n));
      if (gen + delays[static_cast<std::size_t>(n)] <= t) {
        age = t - gen;
        break;
      }
    }
    ages.push_back(age);
  }
  return ages;
}

}  // namespace aoi
