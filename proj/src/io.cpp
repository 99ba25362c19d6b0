#include "aoi/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <system_error>

#include <unistd.h>

#include "aoi/errors.hpp"

namespace aoi {

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      fs::remove(tmp, ec);
      throw IoError("write failed for " + path.string());
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignore;
    fs::remove(tmp, ignore);
    throw IoError("cannot move output into place at " + path.string() + ": " + ec.message());
  }
}

namespace {

std::string grid_csv(const char* header, const Eigen::VectorXd& t, const Eigen::VectorXd& x, const Eigen::MatrixXd& v) {
  std::string out = header;
  out += '\n';
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      out += format_number(t(i));
      out += ',';
      out += format_number(x(j));
      out += ',';
      out += format_number(v(i, j));
      out += '\n';
    }
  }
  return out;
}

}  // namespace

std::string ccdf_csv(const CcdfGrid& grid) { return grid_csv("t,x,ccdf", grid.t_values, grid.x_values, grid.p); }

std::string stderr_csv(const CcdfGrid& grid, const Eigen::MatrixXd& std_error) {
  return grid_csv("t,x,stderr", grid.t_values, grid.x_values, std_error);
}

std::string heatmap_csv(const HeatmapGrid& heat) { return grid_csv("t,x,pmf", heat.t_values, heat.x_values, heat.mass); }

std::string timeavg_csv(const TimeAveragedCcdf& avg) {
  std::string out = "x,ccdf_avg\n";
  for (Eigen::Index i = 0; i < avg.x_values.size(); ++i)
    out += format_number(avg.x_values(i)) + ',' + format_number(avg.values(i)) + '\n';
  return out;
}

std::string percentiles_csv(const std::vector<PercentileRecord>& rows, const std::vector<double>& levels) {
  std::string out = "link,c,tau,s";
  for (double p : levels) {
    char buf[32];
    std::snprintf(buf, sizeof buf, ",p%.10g", 100 * p);
    out += buf;
  }
  out += '\n';
  for (const auto& r : rows) {
    out += r.link + ',' + r.c + ',' + format_number(r.tau) + ',' + format_number(r.s);
    for (double v : r.values) out += ',' + format_number(v);
    out += '\n';
  }
  return out;
}

std::string paths_csv(const Eigen::VectorXd& t_values, const Eigen::MatrixXd& ages) {
  std::string out = "path,t,age\n";
  for (Eigen::Index p = 0; p < ages.rows(); ++p)
    for (Eigen::Index i = 0; i < t_values.size(); ++i)
      out += std::to_string(p) + ',' + format_number(t_values(i)) + ',' + format_number(ages(p, i)) + '\n';
  return out;
}

}  // namespace aoi
