#include "aoi/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "aoi/errors.hpp"
#include "aoi/parallel.hpp"

namespace aoi {

Eigen::VectorXd sample_driver(const CorrelationMode& mode, double tau, std::size_t n, SplitMix64& gen) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(static_cast<Eigen::Index>(n));
  if (n == 0) return z;
  z(0) = normal(gen);
  const double rho = mode.lag_one_correlation(tau);
  const double innovation = std::sqrt(std::max(0.0, (1 - rho) * (1 + rho)));
  for (std::size_t i = 1; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    switch (mode.kind) {
      case CorrelationKind::Frozen:
        z(k) = z(0);
        break;
      case CorrelationKind::Iid:
        z(k) = normal(gen);
        break;
      case CorrelationKind::Ou:
        z(k) = rho * z(k - 1) + innovation * normal(gen);
        break;
    }
  }
  return z;
}

Eigen::VectorXd sample_ou_on_grid(double kappa, double tau, std::size_t n, std::uint64_t seed) {
  if (!(tau > 0)) throw InvalidArgument("sample_ou_on_grid: tau must be > 0");
  SplitMix64 gen(stream_seed(seed, 0));
  return sample_driver(CorrelationMode::ou(kappa), tau, n, gen);
}

void SimConfig::validate() const {
  model.validate();
  if (n_paths < 1) throw InvalidArgument("simulation: n_paths must be >= 1");
  if (!std::is_sorted(t_grid.begin(), t_grid.end()) || !std::is_sorted(x_grid.begin(), x_grid.end()))
    throw InvalidArgument("simulation: grids must be sorted");
  if (!t_grid.empty() && (t_grid.front() < 0 || horizon < t_grid.back()))
    throw InvalidArgument("simulation: horizon must cover the t grid");
}

namespace {

std::size_t packet_count(const SimConfig& config) {
  return static_cast<std::size_t>(decompose_time(config.horizon, config.model.schedule.tau()).k) + 1;
}

}  // namespace

std::vector<double> simulate_delays(const SimConfig& config, std::uint64_t path) {
  SplitMix64 gen(stream_seed(config.seed, path));
  const Eigen::VectorXd z = sample_driver(config.model.correlation, config.model.schedule.tau(), packet_count(config), gen);
  std::vector<double> delays(static_cast<std::size_t>(z.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i) delays[static_cast<std::size_t>(i)] = g_apply(config.model.link, z(i));
  return delays;
}

EmpiricalCcdf simulate_empirical_ccdf(const SimConfig& config) {
  config.validate();
  const std::size_t nt = config.t_grid.size(), nx = config.x_grid.size();
  const std::uint64_t chunk = 256;
  const std::uint64_t chunks = (config.n_paths + chunk - 1) / chunk;
  const auto workers = static_cast<unsigned>(std::clamp<std::uint64_t>(config.threads, 1, chunks));
  // Worker w takes chunks w, w + workers, ...; integer counts make the
  // reduction independent of the worker count.
  using Counts = Eigen::Matrix<std::uint64_t, Eigen::Dynamic, Eigen::Dynamic>;
  // hist(i, n): paths whose age at t_i exceeds exactly the first n grid x values.
  std::vector<Counts> partial(workers, Counts::Zero(static_cast<Eigen::Index>(nt), static_cast<Eigen::Index>(nx + 1)));
  std::vector<std::vector<std::uint64_t>> partial_inf(workers, std::vector<std::uint64_t>(nt, 0));

  parallel_for(workers, workers, [&](std::size_t w) {
    Counts& counts = partial[w];
    auto& inf = partial_inf[w];
    for (std::uint64_t c = w; c < chunks; c += workers) {
      const std::uint64_t end = std::min<std::uint64_t>(config.n_paths, (c + 1) * chunk);
      for (std::uint64_t path = c * chunk; path < end; ++path) {
        const auto delays = simulate_delays(config, path);
        const auto ages = aoi_path(delays, config.model.schedule, config.t_grid);
        for (std::size_t i = 0; i < nt; ++i) {
          if (is_infinite_age(ages[i])) ++inf[i];
          // x_grid is sorted: A > x holds for a prefix of the columns.
          const auto it = std::lower_bound(config.x_grid.begin(), config.x_grid.end(), ages[i]);
          ++counts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(it - config.x_grid.begin()));
        }
      }
    }
  });

  Counts hist = Counts::Zero(static_cast<Eigen::Index>(nt), static_cast<Eigen::Index>(nx + 1));
  std::vector<std::uint64_t> inf_total(nt, 0);
  for (unsigned w = 0; w < workers; ++w) {
    hist += partial[w];
    for (std::size_t i = 0; i < nt; ++i) inf_total[i] += partial_inf[w][i];
  }
  // Count of A > x_j is the number of paths exceeding more than j columns.
  Counts total(static_cast<Eigen::Index>(nt), static_cast<Eigen::Index>(nx));
  for (Eigen::Index i = 0; i < total.rows(); ++i) {
    std::uint64_t above = 0;
    for (Eigen::Index j = static_cast<Eigen::Index>(nx) - 1; j >= 0; --j) {
      above += hist(i, j + 1);
      total(i, j) = above;
    }
  }

  EmpiricalCcdf out;
  out.n_paths = config.n_paths;
  out.infinite_count = std::move(inf_total);
  out.grid.kind = GridKind::Empirical;
  out.grid.seed = config.seed;
  out.grid.model_description = describe_model(config.model);
  out.grid.t_values = Eigen::Map<const Eigen::VectorXd>(config.t_grid.data(), static_cast<Eigen::Index>(nt));
  out.grid.x_values = Eigen::Map<const Eigen::VectorXd>(config.x_grid.data(), static_cast<Eigen::Index>(nx));
  const double n = static_cast<double>(config.n_paths);
  out.grid.p = total.cast<double>() / n;
  out.std_error = (out.grid.p.array() * (1 - out.grid.p.array()) / n).sqrt().matrix();
  return out;
}

Eigen::MatrixXd simulate_aoi_paths(const SimConfig& config, std::uint64_t n_paths) {
  config.validate();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n_paths), static_cast<Eigen::Index>(config.t_grid.size()));
  for (std::uint64_t path = 0; path < n_paths; ++path) {
    const auto ages = aoi_path(simulate_delays(config, path), config.model.schedule, config.t_grid);
    for (std::size_t i = 0; i < ages.size(); ++i) out(static_cast<Eigen::Index>(path), static_cast<Eigen::Index>(i)) = ages[i];
  }
  return out;
}

}  // namespace aoi
