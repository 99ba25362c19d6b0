#pragma once

// Exact CCDF surfaces and the statistics derived from them.

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aoi/core.hpp"
#include "aoi/gauss_model.hpp"
#include "aoi/orthant.hpp"
#include "aoi/outputs_types.hpp"

namespace aoi {

/// Joint tail of the delays D_i = g(Z_{i tau}) under the model's driver.
class GaussianDelayOracle final : public JointTailOracle {
 public:
  GaussianDelayOracle(DelayModel model, QuadratureSpec spec = {});
  double joint_tail(IndexRange range, std::span<const double> thresholds) const override;

 private:
  DelayModel model_;
  QuadratureSpec spec_;
};

/// Left endpoints of the delay supports D_0..D_{n-1} (all equal to x_min).
std::vector<double> delay_support_minimum(const DelayModel& model, std::size_t n);

/// Pr(D_1 > g(phi), ..., D_c > g((c-1) tau + phi)) style run probabilities
/// for one phase: entry c is the probability that the c newest packets
/// generated before a time with phase phi are all still in flight.
/// Entry 0 is 1.
Eigen::VectorXd phase_run_probabilities(const DelayModel& model, double phi, long max_count,
                                        const QuadratureSpec& spec);

/// Exact Pr(A_t > x) for one cell.
double exact_ccdf(const DelayModel& model, double t, double x, const QuadratureSpec& spec = {});

/// Exact CCDF over a grid. Cells sharing a phase are computed from one run of
/// the recursion, so cells at t and t + tau with t >= x are identical.
CcdfGrid exact_ccdf_grid(const DelayModel& model, std::span<const double> t_grid, std::span<const double> x_grid,
                         const QuadratureSpec& spec = {}, unsigned threads = 1);

struct HeatmapGrid {
  Eigen::VectorXd t_values;
  Eigen::VectorXd x_values;
  /// Pr(A_t > x) - Pr(A_t > x + delta), clamped at 0.
  Eigen::MatrixXd mass;
  double delta = 0.02;
};

/// Mass in (x, x + delta] for every grid x whose x + delta is also on the grid.
HeatmapGrid heatmap(const CcdfGrid& grid, double delta);

/// (1/tau) * integral over t in [x, x + tau] of cell(t) by the composite
/// midpoint rule with n_nodes nodes (n_nodes >= 8); panels are split where the
/// phase t mod tau equals one of break_phases.
double time_average(const std::function<double(double)>& cell, double x, double tau, int n_nodes,
                    std::span<const double> break_phases = {});

/// (1/tau) * integral over t in [x, x + tau] of Pr(A_t > x), by a composite
/// midpoint rule with n_phase_nodes nodes (split at the phase where a delay
/// threshold crosses x_min).
double time_averaged_ccdf(const DelayModel& model, double x, const QuadratureSpec& spec = {},
                          int n_phase_nodes = 64);

struct TimeAveragedCcdf {
  Eigen::VectorXd x_values;
  Eigen::VectorXd values;
  int phase_nodes = 64;
};

/// Time-averaged CCDF as a function of x, backed by smooth interpolants of
/// the run probabilities over the phase. Cheap to evaluate at many x.
class PhaseProfile {
 public:
  PhaseProfile(const DelayModel& model, const QuadratureSpec& spec = {}, int nodes_per_panel = 12,
               unsigned threads = 1);
  ~PhaseProfile();
  PhaseProfile(PhaseProfile&&) noexcept;
  PhaseProfile& operator=(PhaseProfile&&) noexcept;

  /// Time-averaged Pr(A > x).
  double ccdf_avg(double x);
  TimeAveragedCcdf table(std::span<const double> x_values);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

inline const std::vector<double> kDefaultPercentileLevels{0.10, 0.25, 0.50, 0.75, 0.90};

struct PercentileRow {
  std::vector<double> levels;
  /// Age at each level; kInfiniteAge when beyond the search ceiling.
  std::vector<double> values;
  std::vector<bool> ceiling_exceeded;
};

/// Default x ceiling for percentile search: 50 tau + 20 * mean delay.
double percentile_ceiling(const DelayModel& model);

/// inf{x >= 0 : ccdf_avg(x) <= 1 - p} for each level p, by doubling from
/// tau and bisecting to 1e-6 tau. ccdf_avg must be non-increasing.
PercentileRow generalized_inverse(const std::function<double(double)>& ccdf_avg, std::span<const double> levels,
                                 double tau, double ceiling);

/// inf{x >= 0 : time-averaged Pr(A > x) <= 1 - p} for each level p.
PercentileRow percentiles(const DelayModel& model, std::span<const double> levels, const QuadratureSpec& spec = {},
                          std::optional<double> ceiling = std::nullopt, unsigned threads = 1);

struct DominanceReport {
  bool holds = true;
  double max_violation = 0;
  double t_at_max = 0;
  double x_at_max = 0;
  std::size_t cells = 0;
};

/// Checks low(t, x) <= high(t, x) + tol everywhere.
DominanceReport dominance_check(const CcdfGrid& low, const CcdfGrid& high, double tol);

}  // namespace aoi
