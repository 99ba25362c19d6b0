#pragma once

// Delay model X_t = g(Z_t): a monotone link g applied to a stationary
// standard Gaussian driver Z, sampled at the generation instants.

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "aoi/core.hpp"

namespace aoi {

enum class LinkKind { ShiftedLognormal, CensoredNormal };

std::string_view to_string(LinkKind kind);
LinkKind link_kind_from_string(std::string_view name);

/// g(z) = x_min + exp(mu_hat + s_hat z)   (shifted lognormal)
/// g(z) = max(x_min, mu_hat + s_hat z)    (censored normal)
struct LinkFunction {
  LinkKind kind = LinkKind::ShiftedLognormal;
  double x_min = 0;
  double mu_hat = 0;
  double s_hat = 1;

  /// Throws InvalidArgument unless s_hat > 0 and x_min >= 0 (finite values).
  void validate() const;
};

inline constexpr double kDefaultMaxDelay = 1e12;

/// Delay for driver value z, saturated at max_delay.
double g_apply(const LinkFunction& link, double z, double max_delay = kDefaultMaxDelay);

/// Generalised inverse inf{z : g(z) > y}; -infinity when g(Z) > y surely.
double g_inverse(const LinkFunction& link, double y);

struct Moments {
  double mean = 0;
  double sd = 0;
};

Moments marginal_moments(const LinkFunction& link);

struct CalibrationTarget {
  double mu = 1;
  double s = 0.75;
  double x_min = 0.5;
};

/// (mu_hat, s_hat) matching the mean and standard deviation of g(Z).
std::pair<double, double> calibrate_marginal(const CalibrationTarget& target, LinkKind kind);

/// Cov[g(Z_0), g(Z_1)] for standard normals with correlation rho.
double lag_covariance(const LinkFunction& link, double rho);

/// kappa with sigma(c) / sigma(0) = exp(-1) under the autocorrelation
/// exp(-kappa t) of the driver.
double calibrate_kappa(const LinkFunction& link, double c);

/// OU transition over dt from state z: (mean, variance).
template <typename Scalar>
inline std::pair<Scalar, Scalar> ou_transition(Scalar z, Scalar dt, Scalar kappa) {
  const Scalar decay = std::exp(-kappa * dt);
  return {z * decay, -std::expm1(Scalar(-2) * kappa * dt)};
}

enum class CorrelationKind { Ou, Iid, Frozen };

std::string_view to_string(CorrelationKind kind);

struct CorrelationMode {
  CorrelationKind kind = CorrelationKind::Ou;
  double kappa = 0;
  /// Time constant the kappa was calibrated from, when known.
  std::optional<double> c;

  static CorrelationMode ou(double kappa, std::optional<double> c = std::nullopt);
  static CorrelationMode iid() { return {CorrelationKind::Iid, 0, 0.0}; }
  static CorrelationMode frozen() { return {CorrelationKind::Frozen, 0, std::numeric_limits<double>::infinity()}; }

  /// Lag-one correlation of the sampled driver, e^{-kappa tau}.
  double lag_one_correlation(double tau) const;
};

struct DelayModel {
  LinkFunction link;
  CorrelationMode correlation;
  GenerationSchedule schedule{1.0};

  void validate() const;
};

/// One-line human-readable summary of a model.
std::string describe_model(const DelayModel& model);

/// Gaussian thresholds a_i = g^{-1}((k_t - i) tau + phi_t) for
/// i = theta_t(x)..k_t. Requires x >= phi_t.
Eigen::VectorXd thresholds(double t, double x, const GenerationSchedule& schedule, const LinkFunction& link);

}  // namespace aoi
