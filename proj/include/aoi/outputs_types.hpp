#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>

namespace aoi {

enum class GridKind { Exact, Empirical };

/// Pr(A_t > x) on a (t, x) grid; rows are t, columns are x.
struct CcdfGrid {
  Eigen::VectorXd t_values;
  Eigen::VectorXd x_values;
  Eigen::MatrixXd p;
  GridKind kind = GridKind::Exact;
  std::string model_description;
  std::optional<std::uint64_t> seed;
};

}  // namespace aoi
