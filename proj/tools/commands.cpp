#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>

#include "aoi/errors.hpp"
#include "aoi/outputs.hpp"
#include "aoi/parallel.hpp"
#include "aoi/simulator.hpp"

namespace aoi::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

json quadrature_json(const QuadratureSpec& q) {
  return {{"m", q.m}, {"L", q.L}, {"rule", q.rule == QuadratureRule::GaussLegendre ? "gauss-legendre" : "trapezoid"}};
}

json model_json(const ResolvedModel& r) {
  json j{{"description", describe_model(r.model)},
         {"link", std::string(to_string(r.model.link.kind))},
         {"x_min", r.model.link.x_min},
         {"mu_hat", r.model.link.mu_hat},
         {"s_hat", r.model.link.s_hat},
         {"mode", std::string(to_string(r.model.correlation.kind))},
         {"tau", r.model.schedule.tau()}};
  if (r.model.correlation.kind == CorrelationKind::Ou) j["kappa"] = r.model.correlation.kappa;
  return j;
}

void write_meta(const RunContext& ctx, const std::string& command, Clock::time_point start, json extra = json::object()) {
  json meta{{"command", command},
            {"engine_version", AOI_LAB_VERSION},
            {"config", config_to_json(ctx.config)},
            {"seed", ctx.config.simulation.seed},
            {"quadrature", quadrature_json(ctx.config.quadrature)},
            {"threads", ctx.threads},
            {"wall_time_s", std::chrono::duration<double>(Clock::now() - start).count()}};
  meta.update(extra);
  write_file_atomic(fs::path(ctx.config.output) / "meta.json", meta.dump(2) + "\n");
}

void write_output(const RunContext& ctx, const char* name, const std::string& content) {
  write_file_atomic(fs::path(ctx.config.output) / name, content);
}

PercentileRecord make_record(const ResolvedModel& r, const PercentileRow& row) {
  return {std::string(to_string(r.model.link.kind)), r.c_label, r.model.schedule.tau(), r.s, row.values};
}

}  // namespace

SweepResult run_sweep(const RunConfig& config, unsigned threads) {
  config.validate();
  const std::vector<std::optional<LinkKind>> links =
      config.sweep.link.empty() ? std::vector<std::optional<LinkKind>>{std::nullopt}
                                : std::vector<std::optional<LinkKind>>(config.sweep.link.begin(), config.sweep.link.end());
  auto or_base = [](const std::vector<double>& v) {
    return v.empty() ? std::vector<std::optional<double>>{std::nullopt}
                     : std::vector<std::optional<double>>(v.begin(), v.end());
  };
  SweepResult result;
  for (const auto& link : links) {
    for (const auto& s : or_base(config.sweep.s)) {
      for (const auto& tau : or_base(config.sweep.tau)) {
        for (const auto& c : or_base(config.sweep.c)) {
          RunConfig row = config;
          if (link) row.link.kind = *link;
          if (s) row.link.s = *s;
          if (tau) row.tau = *tau;
          if (c) {
            row.correlation.mode = CorrelationKind::Ou;
            row.correlation.c = *c;
            row.correlation.kappa.reset();
          }
          std::string label = std::string(to_string(row.link.kind)) + " tau=" + format_number(row.tau);
          if (c) label += " c=" + format_c(*c);
          if (s) label += " s=" + format_number(*s);
          try {
            const ResolvedModel r = resolve_model(row);
            const PercentileRow p = percentiles(r.model, row.levels, row.quadrature, std::nullopt, threads);
            result.rows.push_back(make_record(r, p));
          } catch (const std::exception& e) {
            result.failures.push_back(label + ": " + e.what());
          }
        }
      }
    }
  }
  return result;
}

CompareReport run_compare(const RunConfig& config, unsigned threads) {
  const ResolvedModel r = resolve_model(config);
  const auto t = config.t_grid.values();
  const auto x = config.x_grid.values();
  const CcdfGrid exact = exact_ccdf_grid(r.model, t, x, config.quadrature, threads);

  SimConfig sim;
  sim.model = r.model;
  sim.horizon = t.back();
  sim.n_paths = config.simulation.n_paths;
  sim.seed = config.simulation.seed;
  sim.t_grid = t;
  sim.x_grid = x;
  sim.threads = threads;
  const EmpiricalCcdf emp = simulate_empirical_ccdf(sim);

  CompareReport rep;
  rep.diagnostics = json::array();
  const double n = static_cast<double>(sim.n_paths);
  std::size_t within = 0;
  for (Eigen::Index i = 0; i < exact.p.rows(); ++i) {
    for (Eigen::Index j = 0; j < exact.p.cols(); ++j) {
      const double p = exact.p(i, j), q = emp.grid.p(i, j);
      const double se = std::sqrt(p * (1 - p) / n);
      const double z = se > 0 ? std::abs(p - q) / se : (p == q ? 0.0 : std::numeric_limits<double>::infinity());
      rep.max_z = std::max(rep.max_z, z);
      if (z <= config.compare.z_max) {
        ++within;
      } else if (rep.diagnostics.size() < 50) {
        rep.diagnostics.push_back(
            {{"t", t[static_cast<std::size_t>(i)]}, {"x", x[static_cast<std::size_t>(j)]}, {"exact", p}, {"empirical", q},
             {"z", format_number(z)}});
      }
    }
  }
  rep.cells = static_cast<std::size_t>(exact.p.size());
  rep.fraction_within = static_cast<double>(within) / static_cast<double>(rep.cells);
  bool ok = rep.fraction_within >= config.compare.z_fraction;

  // Weakest to strongest dependence: iid, kappa descending, frozen.
  std::vector<std::pair<std::string, CorrelationMode>> ladder{{"iid", CorrelationMode::iid()}};
  std::vector<double> kappas = config.compare.kappas;
  std::sort(kappas.rbegin(), kappas.rend());
  for (double k : kappas) ladder.emplace_back("kappa=" + format_number(k), CorrelationMode::ou(k));
  ladder.emplace_back("frozen", CorrelationMode::frozen());
  std::vector<CcdfGrid> grids;
  for (const auto& [name, mode] : ladder) {
    DelayModel m = r.model;
    m.correlation = mode;
    grids.push_back(exact_ccdf_grid(m, t, x, config.quadrature, threads));
  }
  rep.dominance = json::array();
  for (std::size_t k = 0; k + 1 < grids.size(); ++k) {
    const DominanceReport d = dominance_check(grids[k], grids[k + 1], config.compare.dominance_tol);
    ok = ok && d.holds;
    rep.dominance.push_back({{"low", ladder[k].first},
                             {"high", ladder[k + 1].first},
                             {"holds", d.holds},
                             {"max_violation", d.max_violation},
                             {"t", d.t_at_max},
                             {"x", d.x_at_max}});
  }
  rep.passed = ok;
  return rep;
}

int cmd_calibrate(const RunContext& ctx) {
  const auto start = Clock::now();
  const RunConfig& c = ctx.config;
  if (!c.link.targets()) throw ConfigError("calibrate needs target moments link.mu and link.s");
  const ResolvedModel r = resolve_model(c);
  const Moments got = marginal_moments(r.model.link);
  json out{{"link", std::string(to_string(r.model.link.kind))},
           {"x_min", r.model.link.x_min},
           {"mu_hat", r.model.link.mu_hat},
           {"s_hat", r.model.link.s_hat},
           {"mean_residual", got.mean - *c.link.mu},
           {"sd_residual", got.sd - *c.link.s}};
  if (r.model.correlation.kind == CorrelationKind::Ou) {
    out["kappa"] = r.model.correlation.kappa;
    if (r.model.correlation.c) {
      const double cc = *r.model.correlation.c;
      const double ratio = lag_covariance(r.model.link, std::exp(-r.model.correlation.kappa * cc)) /
                           lag_covariance(r.model.link, 1.0);
      out["c"] = cc;
      out["ratio_residual"] = ratio - std::exp(-1.0);
    }
  } else {
    out["mode"] = std::string(to_string(r.model.correlation.kind));
  }
  *ctx.out << out.dump(2) << "\n";
  write_output(ctx, "calibration.json", out.dump(2) + "\n");
  write_meta(ctx, "calibrate", start, {{"model", model_json(r)}});
  return kExitOk;
}

int cmd_exact(const RunContext& ctx) {
  const auto start = Clock::now();
  const RunConfig& c = ctx.config;
  const ResolvedModel r = resolve_model(c);
  const auto t = c.t_grid.values();
  const auto x = c.x_grid.values();
  const CcdfGrid grid = exact_ccdf_grid(r.model, t, x, c.quadrature, ctx.threads);
  const HeatmapGrid heat = heatmap(grid, c.delta);
  PhaseProfile profile(r.model, c.quadrature, 12, ctx.threads);
  const TimeAveragedCcdf avg = profile.table(x);
  const PercentileRow row = generalized_inverse([&](double v) { return profile.ccdf_avg(v); }, c.levels,
                                                r.model.schedule.tau(), percentile_ceiling(r.model));

  write_output(ctx, "ccdf.csv", ccdf_csv(grid));
  write_output(ctx, "heatmap.csv", heatmap_csv(heat));
  write_output(ctx, "timeavg.csv", timeavg_csv(avg));
  write_output(ctx, "percentiles.csv", percentiles_csv({make_record(r, row)}, c.levels));
  json flags = json::array();
  for (std::size_t i = 0; i < row.levels.size(); ++i)
    if (row.ceiling_exceeded[i]) flags.push_back(row.levels[i]);
  write_meta(ctx, "exact", start,
             {{"model", model_json(r)}, {"timeavg_phase_nodes", avg.phase_nodes}, {"ceiling_exceeded", flags}});
  *ctx.out << "exact: " << grid.p.size() << " cells written to " << c.output << "\n";
  return kExitOk;
}

int cmd_simulate(const RunContext& ctx) {
  const auto start = Clock::now();
  const RunConfig& c = ctx.config;
  const ResolvedModel r = resolve_model(c);
  SimConfig sim;
  sim.model = r.model;
  sim.t_grid = c.t_grid.values();
  sim.x_grid = c.x_grid.values();
  sim.horizon = sim.t_grid.back();
  sim.n_paths = c.simulation.n_paths;
  sim.seed = c.simulation.seed;
  sim.threads = ctx.threads;
  const EmpiricalCcdf emp = simulate_empirical_ccdf(sim);
  const Eigen::MatrixXd paths = simulate_aoi_paths(sim, c.simulation.sample_paths);

  write_output(ctx, "ccdf.csv", ccdf_csv(emp.grid));
  write_output(ctx, "stderr.csv", stderr_csv(emp.grid, emp.std_error));
  write_output(ctx, "paths.csv", paths_csv(emp.grid.t_values, paths));
  write_meta(ctx, "simulate", start, {{"model", model_json(r)}, {"n_paths", emp.n_paths}});
  *ctx.out << "simulate: " << emp.n_paths << " paths written to " << c.output << "\n";
  return kExitOk;
}

int cmd_compare(const RunContext& ctx) {
  const auto start = Clock::now();
  const CompareReport rep = run_compare(ctx.config, ctx.threads);
  json report{{"max_z", format_number(rep.max_z)},
              {"fraction_within", rep.fraction_within},
              {"cells", rep.cells},
              {"z_max", ctx.config.compare.z_max},
              {"z_fraction", ctx.config.compare.z_fraction},
              {"cells_over_z_max", rep.diagnostics},
              {"dominance", rep.dominance},
              {"passed", rep.passed}};
  write_output(ctx, "compare.json", report.dump(2) + "\n");
  write_meta(ctx, "compare", start);
  *ctx.out << "compare: " << (rep.passed ? "PASS" : "FAIL") << " fraction |z|<=" << ctx.config.compare.z_max << " = "
           << rep.fraction_within << ", max |z| = " << format_number(rep.max_z) << "\n";
  for (const auto& d : rep.dominance)
    *ctx.out << "  dominance " << d["low"].get<std::string>() << " <= " << d["high"].get<std::string>() << ": "
             << (d["holds"].get<bool>() ? "holds" : "VIOLATED") << " (max violation "
             << format_number(d["max_violation"].get<double>()) << ")\n";
  if (!rep.passed) {
    for (const auto& d : rep.diagnostics)
      *ctx.err << "  cell t=" << d["t"] << " x=" << d["x"] << " exact=" << d["exact"] << " empirical=" << d["empirical"]
               << " z=" << d["z"].get<std::string>() << "\n";
    return kExitAcceptance;
  }
  return kExitOk;
}

int cmd_sweep(const RunContext& ctx) {
  const auto start = Clock::now();
  const SweepResult res = run_sweep(ctx.config, ctx.threads);
  write_output(ctx, "percentiles.csv", percentiles_csv(res.rows, ctx.config.levels));
  write_meta(ctx, "sweep", start, {{"rows", res.rows.size()}, {"failures", res.failures}});
  for (const auto& f : res.failures) *ctx.err << "sweep row failed: " << f << "\n";
  *ctx.out << "sweep: " << res.rows.size() << " rows written to " << ctx.config.output << "\n";
  return res.failures.empty() ? kExitOk : kExitPartialSweep;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"aoi_lab: age of information under correlated packet delays"};
  app.require_subcommand(1, 1);
  std::optional<std::string> config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "JSON configuration file (or an earlier meta.json)");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "simulation seed");
  app.add_option("--threads", threads, "worker threads (default: AOI_LAB_THREADS or all cores)")
      ->check(CLI::PositiveNumber);
  app.add_option("--set", overrides, "override a config key: key.path=value (repeatable)")->take_all();

  using Command = int (*)(const RunContext&);
  const std::vector<std::tuple<const char*, const char*, Command>> commands{
      {"calibrate", "fit link parameters and kappa to target moments", cmd_calibrate},
      {"exact", "exact CCDF grid, heat map, time average and percentiles", cmd_exact},
      {"simulate", "Monte-Carlo CCDF and sample paths", cmd_simulate},
      {"compare", "exact vs simulation z-scores and dominance checks", cmd_compare},
      {"sweep", "percentile rows over the sweep cross product", cmd_sweep},
  };
  for (const auto& [name, help, fn] : commands) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  Command command = nullptr;
  std::string name;
  for (const auto& [n, help, fn] : commands) {
    if (app.got_subcommand(n)) {
      command = fn;
      name = n;
    }
  }

  try {
    RunContext ctx;
    ctx.config = load_config(config_path, overrides);
    if (seed) ctx.config.simulation.seed = *seed;
    if (out_dir) ctx.config.output = *out_dir;
    ctx.config.validate();
    ctx.threads = threads.value_or(default_thread_count());
    ctx.out = &out;
    ctx.err = &err;
    return command(ctx);
  } catch (const ConfigError& e) {
    err << "aoi_lab " << name << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const CalibrationFailure& e) {
    err << "aoi_lab " << name << ": calibration failed: " << e.what() << "\n";
    return kExitCalibration;
  } catch (const std::invalid_argument& e) {
    err << "aoi_lab " << name << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "aoi_lab " << name << ": " << e.what() << "\n";
    return kExitEvaluation;
  }
}

}  // namespace aoi::cli
