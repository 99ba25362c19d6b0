#pragma once

// Model-agnostic AoI machinery: time decomposition on the generation grid,
// the transient CCDF assembled from a joint-tail oracle, the finite atom
// support of A_t, and sample-path reconstruction from delay sequences.

#include <Eigen/Dense>

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace aoi {

/// Age value used when no packet has reached the monitor yet.
inline constexpr double kInfiniteAge = std::numeric_limits<double>::infinity();

inline bool is_infinite_age(double age) { return age == kInfiniteAge; }

/// Packets are generated at n * tau, n = 0, 1, ...
class GenerationSchedule {
 public:
  explicit GenerationSchedule(double tau);

  double tau() const { return tau_; }
  double generation_time(std::size_t n) const { return static_cast<double>(n) * tau_; }

 private:
  double tau_;
};

/// t = k * tau + phi with 0 <= phi < tau.
struct TimeDecomposition {
  double t = 0;
  long k = 0;
  double phi = 0;
};

TimeDecomposition decompose_time(double t, double tau);

/// First packet index that must still be in flight for A_t > x:
/// max(0, ceil((t - x) / tau)); equals k_t + 1 exactly when x < phi_t.
long theta(double t, double x, double tau);

/// Inclusive index range [first, last] of packets; empty when first > last.
struct IndexRange {
  long first = 0;
  long last = -1;

  bool empty() const { return first > last; }
  std::size_t size() const { return empty() ? 0 : static_cast<std::size_t>(last - first + 1); }
};

/// Joint tail law of the delay sequence:
///   tail(range, b) = Pr(D_i > b_{i - first} for all i in range).
/// Implementations must be reentrant.
class JointTailOracle {
 public:
  virtual ~JointTailOracle() = default;
  virtual double joint_tail(IndexRange range, std::span<const double> thresholds) const = 0;
};

/// Degenerate oracle for one fixed delay realisation.
class PointMassOracle final : public JointTailOracle {
 public:
  explicit PointMassOracle(std::vector<double> delays);
  double joint_tail(IndexRange range, std::span<const double> thresholds) const override;

 private:
  std::vector<double> delays_;
};

/// Thresholds b_i = (k_t - i) * tau + phi_t for i in range.
std::vector<double> arrival_thresholds(const TimeDecomposition& td, IndexRange range, double tau);

/// Pr(A_t > x).
double aoi_ccdf(double t, double x, const GenerationSchedule& schedule, const JointTailOracle& oracle);

struct AoiSupport {
  double t = 0;
  long j_star = 0;
  /// Candidate finite ages n * tau + phi_t, n = j_star..k_t, increasing.
  std::vector<double> atoms;
  std::vector<double> masses;
  double p_infinity = 0;

  double total_mass() const;
};

/// Finite support of A_t. d_min[i] is the left endpoint of the support of D_i.
AoiSupport aoi_support(double t, const GenerationSchedule& schedule, std::span<const double> d_min,
                       const JointTailOracle& oracle);

/// Sampled AoI path A_t = t - J_t * tau with J_t the newest arrived packet.
/// Arrivals exactly at t count as arrived.
std::vector<double> aoi_path(std::span<const double> delays, const GenerationSchedule& schedule,
                             std::span<const double> t_grid);

}  // namespace aoi
