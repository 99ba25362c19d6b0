#pragma once

// CSV serialisation and atomic file output.

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

#include "aoi/outputs.hpp"

namespace aoi {

/// 12 significant digits; infinities as `inf` / `-inf`.
std::string format_number(double v);

/// Writes through a temporary sibling file and renames it into place.
/// Throws IoError naming the path on failure.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string ccdf_csv(const CcdfGrid& grid);
/// `t,x,stderr` companion of an empirical grid.
std::string stderr_csv(const CcdfGrid& grid, const Eigen::MatrixXd& std_error);
std::string heatmap_csv(const HeatmapGrid& heat);
std::string timeavg_csv(const TimeAveragedCcdf& avg);

struct PercentileRecord {
  std::string link;
  /// Time constant as written: `0`, `inf`, a number, or empty when kappa was given directly.
  std::string c;
  double tau = 0;
  double s = 0;
  std::vector<double> values;
};

/// Header `link,c,tau,s,p10,p25,p50,p75,p90` for the default levels; one
/// `p<100 level>` column per level.
std::string percentiles_csv(const std::vector<PercentileRecord>& rows,
                            const std::vector<double>& levels = kDefaultPercentileLevels);

/// `path,t,age` rows, one per path and grid time.
std::string paths_csv(const Eigen::VectorXd& t_values, const Eigen::MatrixXd& ages);

}  // namespace aoi
