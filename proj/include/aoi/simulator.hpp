#pragma once

// Exact Monte-Carlo simulation of delay and AoI paths on the generation grid.

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "aoi/gauss_model.hpp"
#include "aoi/outputs_types.hpp"
#include "aoi/rng.hpp"

namespace aoi {

/// Stationary OU driver at n consecutive generation instants:
/// Z_0 ~ N(0, 1), Z_{i+1} = rho Z_i + sqrt(1 - rho^2) xi_i.
Eigen::VectorXd sample_ou_on_grid(double kappa, double tau, std::size_t n, std::uint64_t seed);

/// Driver sampled under any correlation mode, drawing from `gen`.
Eigen::VectorXd sample_driver(const CorrelationMode& mode, double tau, std::size_t n, SplitMix64& gen);

struct SimConfig {
  DelayModel model;
  double horizon = 0;
  std::uint64_t n_paths = 1;
  std::uint64_t seed = 0;
  std::vector<double> t_grid;
  std::vector<double> x_grid;
  unsigned threads = 1;

  void validate() const;
};

struct EmpiricalCcdf {
  CcdfGrid grid;
  Eigen::MatrixXd std_error;
  /// Per t: paths with no arrival yet (infinite age).
  std::vector<std::uint64_t> infinite_count;
  std::uint64_t n_paths = 0;
};

/// Delays of one simulated path; path i always uses stream i of the seed.
std::vector<double> simulate_delays(const SimConfig& config, std::uint64_t path);

EmpiricalCcdf simulate_empirical_ccdf(const SimConfig& config);

/// AoI sample paths on the t grid for the first `n_paths` paths (rows = paths).
Eigen::MatrixXd simulate_aoi_paths(const SimConfig& config, std::uint64_t n_paths);

}  // namespace aoi
