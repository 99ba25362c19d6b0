#pragma once

// Run configuration for the aoi_lab command line.
//
// Precedence, lowest first: built-in defaults, --config file, --set overrides
// in the order given, then the dedicated --seed / --out flags.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "aoi/gauss_model.hpp"
#include "aoi/orthant.hpp"

namespace aoi::cli {

/// Malformed or inconsistent configuration (exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// start, start + step, ... up to stop (inclusive within half a step).
struct GridSpec {
  double start = 0;
  double stop = 0;
  double step = 1;

  std::vector<double> values() const;
  bool operator==(const GridSpec&) const = default;
};

struct LinkConfig {
  LinkKind kind = LinkKind::ShiftedLognormal;
  double x_min = 0.5;
  std::optional<double> mu = 1.0;
  std::optional<double> s = 0.75;
  std::optional<double> mu_hat;
  std::optional<double> s_hat;

  bool targets() const { return mu.has_value(); }
  bool operator==(const LinkConfig&) const = default;
};

struct CorrelationConfig {
  CorrelationKind mode = CorrelationKind::Ou;
  /// Time constant; 0 and +inf select the iid and frozen limits.
  std::optional<double> c = 10.0;
  std::optional<double> kappa;

  bool operator==(const CorrelationConfig&) const = default;
};

struct SimulationConfig {
  std::uint64_t n_paths = 100000;
  std::uint64_t seed = 1;
  /// Sample paths written by `simulate`.
  std::uint64_t sample_paths = 500;

  bool operator==(const SimulationConfig&) const = default;
};

struct CompareConfig {
  std::vector<double> kappas{0.05, 0.1, 0.5};
  double z_max = 3;
  double z_fraction = 0.99;
  double dominance_tol = 1e-6;

  bool operator==(const CompareConfig&) const = default;
};

/// Cross product of the listed values; an empty list keeps the base value.
struct SweepConfig {
  std::vector<LinkKind> link;
  std::vector<double> c;
  std::vector<double> tau;
  std::vector<double> s;

  bool empty() const { return link.empty() && c.empty() && tau.empty() && s.empty(); }
  bool operator==(const SweepConfig&) const = default;
};

struct RunConfig {
  LinkConfig link;
  CorrelationConfig correlation;
  double tau = 2.0;
  GridSpec t_grid{0, 10, 0.04};
  // Odd multiples of delta/2, so atoms on the t grid's lattice fall strictly inside bins.
  GridSpec x_grid{0.01, 9.99, 0.02};
  double delta = 0.02;
  QuadratureSpec quadrature;
  SimulationConfig simulation;
  CompareConfig compare;
  SweepConfig sweep;
  std::vector<double> levels{0.10, 0.25, 0.50, 0.75, 0.90};
  std::string output = "out";

  /// Throws ConfigError on inconsistent settings.
  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& config);

/// Applies `key.path=value` to a config tree. The value is read as JSON when
/// it parses, as a list when it contains commas, else as a string;
/// `null` removes the key.
void apply_override(nlohmann::json& tree, const std::string& assignment);

/// Defaults, then the file at `path` (if any), then the overrides.
RunConfig load_config(const std::optional<std::string>& path, const std::vector<std::string>& overrides);

/// Time constant as written in CSV: `0`, `inf`, or a number.
std::string format_c(double c);

struct ResolvedModel {
  DelayModel model;
  /// Label for the c column; empty when kappa was given directly.
  std::string c_label;
  /// Marginal standard deviation (the target when calibrated).
  double s = 0;
};

/// Calibrates as needed and builds the delay model. Throws CalibrationFailure.
ResolvedModel resolve_model(const RunConfig& config);

}  // namespace aoi::cli
