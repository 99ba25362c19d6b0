#include "aoi/gauss_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "aoi/errors.hpp"
#include "aoi/normal.hpp"
#include "aoi/numerics.hpp"

namespace aoi {

std::string_view to_string(LinkKind kind) {
  return kind == LinkKind::ShiftedLognormal ? "shifted-lognormal" : "censored-normal";
}

LinkKind link_kind_from_string(std::string_view name) {
  if (name == "shifted-lognormal" || name == "lognormal") return LinkKind::ShiftedLognormal;
  if (name == "censored-normal" || name == "censored") return LinkKind::CensoredNormal;
  throw InvalidArgument("unknown link kind '" + std::string(name) + "'");
}

std::string_view to_string(CorrelationKind kind) {
  switch (kind) {
    case CorrelationKind::Ou:
      return "ou";
    case CorrelationKind::Iid:
      return "iid";
    case CorrelationKind::Frozen:
      return "frozen";
  }
  return "ou";
}

void LinkFunction::validate() const {
  if (!std::isfinite(x_min) || x_min < 0) throw InvalidArgument("link: x_min must be finite and >= 0");
  if (!std::isfinite(mu_hat)) throw InvalidArgument("link: mu_hat must be finite");
  if (!std::isfinite(s_hat) || s_hat <= 0) throw InvalidArgument("link: s_hat must be finite and > 0");
}

double g_apply(const LinkFunction& link, double z, double max_delay) {
  if (!std::isfinite(z)) throw InvalidArgument("g_apply: z must be finite");
  double y = 0;
  if (link.kind == LinkKind::ShiftedLognormal)
    y = link.x_min + std::exp(link.mu_hat + link.s_hat * z);
  else
    y = std::max(link.x_min, link.mu_hat + link.s_hat * z);
  return std::min(y, max_delay);
}

double g_inverse(const LinkFunction& link, double y) {
  if (std::isnan(y) || y < 0) throw InvalidArgument("g_inverse: y must be >= 0");
  constexpr double ninf = -std::numeric_limits<double>::infinity();
  if (link.kind == LinkKind::ShiftedLognormal) {
    if (y <= link.x_min) return ninf;
    return (std::log(y - link.x_min) - link.mu_hat) / link.s_hat;
  }
  if (y < link.x_min) return ninf;
  return (y - link.mu_hat) / link.s_hat;
}

namespace {

// Moments of the standardized excess (W - a)^+ for W ~ N(0, 1).
struct Excess {
  double m1;  // E[(W - a)^+]
  double e2;  // E[((W - a)^+)^2]
};

Excess excess_moments(double a) {
  const double pdf = std_normal_pdf(a);
  if (a <= 3) {
    const double tail = std_normal_tail(a);
    return {pdf - a * tail, (1 + a * a) * tail - a * pdf};
  }
  // Mills-ratio continued fraction R = 1/(a + 1/(a + 2/(a + ...))), kept in
  // a form without the 1 - a R cancellation.
  double t = 0, t2 = 0;
  for (int n = 200; n >= 1; --n) {
    t = n / (a + t);
    if (n == 2) t2 = t;
  }
  const double q = t;
  return {pdf * q / (a + q), pdf * (t2 / (a + t2)) / (a + q)};
}

double excess_variance(double a) {
  if (a >= 0) {
    const Excess e = excess_moments(a);
    return e.e2 - e.m1 * e.m1;
  }
  // (W - a)^+ = (W - a) + (a - W)^+; expand around the linear part.
  const double b = -a;
  const Excess e = excess_moments(b);
  return 1 + (e.e2 - e.m1 * e.m1) - 2 * std_normal_tail(b);
}

// Cov[(W0 - a)^+, (W1 - a)^+] for a >= 0 via the conditional mean of the
// second factor given W0.
double excess_covariance_upper(double a, double rho) {
  const Excess e = excess_moments(a);
  if (rho >= 1) return e.e2 - e.m1 * e.m1;
  // W1 = -W0: the two excesses over a >= 0 are never positive together.
  if (rho <= -1) return -e.m1 * e.m1;
  const double sc = std::sqrt((1 - rho) * (1 + rho));
  auto integrand = [&](double w) {
    const double cond = sc * excess_moments((a - rho * w) / sc).m1;
    return (w - a) * cond * std_normal_pdf(w);
  };
  double lo = a, hi = std::max(a, 0.0) + 12.0;
  double total = 0;
  // Split where the conditional factor switches on, which is sharp for rho near 1.
  if (rho > 0) {
    const double w_star = a / rho;
    if (w_star > lo && w_star < hi) {
      total += adaptive_integrate(integrand, lo, w_star, 1e-15);
      lo = w_star;
    }
  }
  total += adaptive_integrate(integrand, lo, hi, 1e-15);
  return total - e.m1 * e.m1;
}

double excess_covariance(double a, double rho) {
  if (a >= 0) return excess_covariance_upper(a, rho);
  const double b = -a;
  return rho * (1 - 2 * std_normal_tail(b)) + excess_covariance_upper(b, rho);
}

}  // namespace

Moments marginal_moments(const LinkFunction& link) {
  link.validate();
  if (link.kind == LinkKind::ShiftedLognormal) {
    const double s2 = link.s_hat * link.s_hat;
    const double mean = link.x_min + std::exp(link.mu_hat + 0.5 * s2);
    const double var = std::expm1(s2) * std::exp(2 * link.mu_hat + s2);
    return {mean, std::sqrt(var)};
  }
  const double a = (link.x_min - link.mu_hat) / link.s_hat;
  const double mean_excess = a < 0 ? -a + excess_moments(-a).m1 : excess_moments(a).m1;
  return {link.x_min + link.s_hat * mean_excess, link.s_hat * std::sqrt(std::max(0.0, excess_variance(a)))};
}

std::pair<double, double> calibrate_marginal(const CalibrationTarget& target, LinkKind kind) {
  if (!std::isfinite(target.mu) || !std::isfinite(target.s) || !std::isfinite(target.x_min) || target.x_min < 0)
    throw CalibrationFailure("calibration target must be finite with x_min >= 0");
  if (!(target.mu > target.x_min)) throw CalibrationFailure("calibration target needs mu > x_min");
  if (!(target.s > 0)) throw CalibrationFailure("calibration target needs s > 0 for a stochastic link");
  const double excess = target.mu - target.x_min;

  if (kind == LinkKind::ShiftedLognormal) {
    const double r = target.s / excess;
    const double s2 = std::log1p(r * r);
    return {std::log(excess) - 0.5 * s2, std::sqrt(s2)};
  }

  // The ratio sd / mean-excess of s_hat (W - a)^+ depends on the censoring
  // point a only and increases with it; solve for a, then scale.
  auto mean_excess = [](double a) { return a < 0 ? -a + excess_moments(-a).m1 : excess_moments(a).m1; };
  const double wanted = target.s / excess;
  auto f = [&](double a) { return std::sqrt(std::max(0.0, excess_variance(a))) / mean_excess(a) - wanted; };
  const auto a = brent_root(f, -1e6, 30.0, 1e-15);
  if (!a) throw CalibrationFailure("censored-normal calibration: target sd/mean ratio is not attainable");
  const double s_hat = excess / mean_excess(*a);
  const double mu_hat = target.x_min - *a * s_hat;
  LinkFunction check{kind, target.x_min, mu_hat, s_hat};
  const Moments m = marginal_moments(check);
  if (std::abs(m.mean - target.mu) > 1e-10 * std::abs(target.mu) ||
      std::abs(m.sd - target.s) > 1e-10 * target.s)
    throw CalibrationFailure("censored-normal calibration did not converge");
  return {mu_hat, s_hat};
}

double lag_covariance(const LinkFunction& link, double rho) {
  link.validate();
  if (!(std::abs(rho) <= 1)) throw InvalidArgument("lag_covariance: |rho| must be <= 1");
  if (rho == 0) return 0;
  if (link.kind == LinkKind::ShiftedLognormal) {
    const double s2 = link.s_hat * link.s_hat;
    return std::exp(2 * link.mu_hat + s2) * std::expm1(s2 * rho);
  }
  const double a = (link.x_min - link.mu_hat) / link.s_hat;
  const double cov = link.s_hat * link.s_hat * excess_covariance(a, rho);
  if (!std::isfinite(cov)) throw EvaluationError("lag_covariance: quadrature failure");
  return cov;
}

double calibrate_kappa(const LinkFunction& link, double c) {
  if (!std::isfinite(c) || c <= 0) throw CalibrationFailure("calibrate_kappa: c must be finite and > 0");
  const double var = lag_covariance(link, 1.0);
  if (!(var > 0)) throw CalibrationFailure("calibrate_kappa: link has zero variance");
  const double target = std::exp(-1.0);
  auto f = [&](double rho) { return lag_covariance(link, rho) / var - target; };
  const auto rho = brent_root(f, 0.0, 1.0, 1e-16);
  if (!rho || *rho <= 0 || *rho >= 1) throw CalibrationFailure("calibrate_kappa: bracketing failed");
  return -std::log(*rho) / c;
}

CorrelationMode CorrelationMode::ou(double kappa, std::optional<double> c) {
  if (!std::isfinite(kappa) || kappa <= 0) throw InvalidArgument("ou correlation needs kappa > 0");
  return {CorrelationKind::Ou, kappa, c};
}

double CorrelationMode::lag_one_correlation(double tau) const {
  switch (kind) {
    case CorrelationKind::Iid:
      return 0;
    case CorrelationKind::Frozen:
      return 1;
    case CorrelationKind::Ou:
      return std::exp(-kappa * tau);
  }
  return 0;
}

void DelayModel::validate() const {
  link.validate();
  if (correlation.kind == CorrelationKind::Ou && !(correlation.kappa > 0 && std::isfinite(correlation.kappa)))
    throw InvalidArgument("delay model: ou mode needs kappa > 0");
}

std::string describe_model(const DelayModel& m) {
  std::ostringstream os;
  os << to_string(m.link.kind) << "(x_min=" << m.link.x_min << ", mu_hat=" << m.link.mu_hat
     << ", s_hat=" << m.link.s_hat << "), " << to_string(m.correlation.kind);
  if (m.correlation.kind == CorrelationKind::Ou) os << "(kappa=" << m.correlation.kappa << ")";
  os << ", tau=" << m.schedule.tau();
  return os.str();
}

Eigen::VectorXd thresholds(double t, double x, const GenerationSchedule& schedule, const LinkFunction& link) {
  const double tau = schedule.tau();
  const TimeDecomposition td = decompose_time(t, tau);
  if (x < td.phi) throw InvalidArgument("thresholds: x < phi_t has no thresholds (ccdf is 1)");
  const long first = theta(t, x, tau);
  Eigen::VectorXd a(td.k - first + 1);
  for (long i = first; i <= td.k; ++i) a(i - first) = g_inverse(link, static_cast<double>(td.k - i) * tau + td.phi);
  return a;
}

}  // namespace aoi
