#include "run_config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "aoi/errors.hpp"
#include "aoi/io.hpp"

namespace aoi::cli {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double to_number(const json& v, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "+inf" || s == "infinity" || s == "Infinity") return kInf;
  }
  throw ConfigError("config: " + key + " must be a number");
}

json from_number(double v) {
  if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
  return v;
}

std::uint64_t to_u64(const json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  throw ConfigError("config: " + key + " must be a non-negative integer");
}

std::vector<double> to_numbers(const json& v, const std::string& key) {
  if (!v.is_array()) return {to_number(v, key)};
  std::vector<double> out;
  for (const auto& e : v) out.push_back(to_number(e, key));
  return out;
}

json from_numbers(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(from_number(x));
  return a;
}

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError("config: " + where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, _] : obj.items())
    if (!ok.count(k)) throw ConfigError("config: unknown key " + (where.empty() ? k : where + "." + k));
}

LinkKind parse_link_kind(const json& v) {
  if (!v.is_string()) throw ConfigError("config: link kind must be a string");
  try {
    return link_kind_from_string(v.get<std::string>());
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

CorrelationKind parse_mode(const std::string& s) {
  if (s == "ou") return CorrelationKind::Ou;
  if (s == "iid") return CorrelationKind::Iid;
  if (s == "frozen") return CorrelationKind::Frozen;
  throw ConfigError("config: correlation.mode must be ou, iid or frozen");
}

QuadratureRule parse_rule(const std::string& s) {
  if (s == "gauss-legendre") return QuadratureRule::GaussLegendre;
  if (s == "trapezoid") return QuadratureRule::Trapezoid;
  throw ConfigError("config: quadrature.rule must be gauss-legendre or trapezoid");
}

GridSpec parse_grid(const json& j, const std::string& key) {
  check_keys(j, key, {"start", "stop", "step"});
  GridSpec g;
  if (!j.contains("start") || !j.contains("stop") || !j.contains("step"))
    throw ConfigError("config: " + key + " needs start, stop and step");
  g.start = to_number(j["start"], key + ".start");
  g.stop = to_number(j["stop"], key + ".stop");
  g.step = to_number(j["step"], key + ".step");
  return g;
}

json grid_json(const GridSpec& g) { return {{"start", g.start}, {"stop", g.stop}, {"step", g.step}}; }

bool finite_positive(double v) { return std::isfinite(v) && v > 0; }

json parse_scalar_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
  }
  if (text.find(',') != std::string::npos) {
    json arr = json::array();
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) arr.push_back(parse_scalar_text(item));
    return arr;
  }
  return text;
}

}  // namespace

std::vector<double> GridSpec::values() const {
  if (!finite_positive(step)) throw ConfigError("grid: step must be positive");
  if (!(std::isfinite(start) && std::isfinite(stop)) || stop < start) throw ConfigError("grid: need start <= stop");
  const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 0.5)) + 1;
  if (n > 10'000'000) throw ConfigError("grid: too many points");
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = start + static_cast<double>(i) * step;
  return v;
}

void RunConfig::validate() const {
  if (!(std::isfinite(link.x_min) && link.x_min >= 0)) throw ConfigError("config: link.x_min must be >= 0");
  const bool targets = link.mu || link.s;
  const bool direct = link.mu_hat || link.s_hat;
  if (targets == direct) throw ConfigError("config: give exactly one of link.{mu, s} or link.{mu_hat, s_hat}");
  if (targets && !(link.mu && link.s)) throw ConfigError("config: link.mu and link.s go together");
  if (direct && !(link.mu_hat && link.s_hat)) throw ConfigError("config: link.mu_hat and link.s_hat go together");
  switch (correlation.mode) {
    case CorrelationKind::Ou:
      if (correlation.c.has_value() == correlation.kappa.has_value())
        throw ConfigError("config: ou mode needs exactly one of correlation.c or correlation.kappa");
      if (correlation.c && !(*correlation.c >= 0)) throw ConfigError("config: correlation.c must be >= 0");
      if (correlation.kappa && !finite_positive(*correlation.kappa))
        throw ConfigError("config: correlation.kappa must be > 0");
      break;
    case CorrelationKind::Iid:
    case CorrelationKind::Frozen:
      if (correlation.kappa) throw ConfigError("config: correlation.kappa only applies to ou mode");
      if (correlation.c && *correlation.c != (correlation.mode == CorrelationKind::Iid ? 0.0 : kInf))
        throw ConfigError("config: correlation.c contradicts the mode");
      break;
  }
  if (!finite_positive(tau)) throw ConfigError("config: tau must be > 0");
  if (!finite_positive(delta)) throw ConfigError("config: delta must be > 0");
  for (const auto* g : {&t_grid, &x_grid}) {
    if (!(g->start >= 0)) throw ConfigError("config: grid start must be >= 0");
    (void)g->values();
  }
  try {
    quadrature.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (simulation.n_paths == 0) throw ConfigError("config: simulation.n_paths must be >= 1");
  double prev = 0;
  for (double p : levels) {
    if (!(p > prev && p < 1)) throw ConfigError("config: levels must be increasing within (0, 1)");
    prev = p;
  }
  if (levels.empty()) throw ConfigError("config: levels must not be empty");
  for (double k : compare.kappas)
    if (!finite_positive(k)) throw ConfigError("config: compare.kappas must be > 0");
  if (!(compare.z_max > 0) || !(compare.z_fraction > 0 && compare.z_fraction <= 1) || !(compare.dominance_tol >= 0))
    throw ConfigError("config: compare thresholds out of range");
  for (double c : sweep.c)
    if (!(c >= 0)) throw ConfigError("config: sweep.c values must be >= 0 (inf allowed)");
  for (double t : sweep.tau)
    if (!finite_positive(t)) throw ConfigError("config: sweep.tau values must be > 0");
  // Infeasible s values fail their own rows at calibration.
  for (double s : sweep.s)
    if (!std::isfinite(s)) throw ConfigError("config: sweep.s values must be finite");
  if (!sweep.s.empty() && !targets) throw ConfigError("config: sweep.s needs a target-calibrated link (mu, s)");
  if (output.empty()) throw ConfigError("config: output must not be empty");
}

RunConfig config_from_json(const json& j) {
  check_keys(j, "", {"link", "correlation", "tau", "t_grid", "x_grid", "delta", "quadrature", "simulation", "compare",
                     "sweep", "levels", "output"});
  RunConfig c;
  c.link.mu.reset();
  c.link.s.reset();
  c.correlation.c.reset();
  try {
    if (j.contains("link")) {
      const auto& l = j["link"];
      check_keys(l, "link", {"kind", "x_min", "mu", "s", "mu_hat", "s_hat"});
      if (l.contains("kind")) c.link.kind = parse_link_kind(l["kind"]);
      if (l.contains("x_min")) c.link.x_min = to_number(l["x_min"], "link.x_min");
      if (l.contains("mu")) c.link.mu = to_number(l["mu"], "link.mu");
      if (l.contains("s")) c.link.s = to_number(l["s"], "link.s");
      if (l.contains("mu_hat")) c.link.mu_hat = to_number(l["mu_hat"], "link.mu_hat");
      if (l.contains("s_hat")) c.link.s_hat = to_number(l["s_hat"], "link.s_hat");
    }
    if (j.contains("correlation")) {
      const auto& r = j["correlation"];
      check_keys(r, "correlation", {"mode", "c", "kappa"});
      if (r.contains("mode")) c.correlation.mode = parse_mode(r["mode"].get<std::string>());
      if (r.contains("c")) c.correlation.c = to_number(r["c"], "correlation.c");
      if (r.contains("kappa")) c.correlation.kappa = to_number(r["kappa"], "correlation.kappa");
    }
    if (j.contains("tau")) c.tau = to_number(j["tau"], "tau");
    if (j.contains("t_grid")) c.t_grid = parse_grid(j["t_grid"], "t_grid");
    if (j.contains("x_grid")) c.x_grid = parse_grid(j["x_grid"], "x_grid");
    if (j.contains("delta")) c.delta = to_number(j["delta"], "delta");
    if (j.contains("quadrature")) {
      const auto& q = j["quadrature"];
      check_keys(q, "quadrature", {"m", "L", "rule"});
      if (q.contains("m")) c.quadrature.m = static_cast<int>(to_u64(q["m"], "quadrature.m"));
      if (q.contains("L")) c.quadrature.L = to_number(q["L"], "quadrature.L");
      if (q.contains("rule")) c.quadrature.rule = parse_rule(q["rule"].get<std::string>());
    }
    if (j.contains("simulation")) {
      const auto& s = j["simulation"];
      check_keys(s, "simulation", {"n_paths", "seed", "sample_paths"});
      if (s.contains("n_paths")) c.simulation.n_paths = to_u64(s["n_paths"], "simulation.n_paths");
      if (s.contains("seed")) c.simulation.seed = to_u64(s["seed"], "simulation.seed");
      if (s.contains("sample_paths")) c.simulation.sample_paths = to_u64(s["sample_paths"], "simulation.sample_paths");
    }
    if (j.contains("compare")) {
      const auto& m = j["compare"];
      check_keys(m, "compare", {"kappas", "z_max", "z_fraction", "dominance_tol"});
      if (m.contains("kappas")) c.compare.kappas = to_numbers(m["kappas"], "compare.kappas");
      if (m.contains("z_max")) c.compare.z_max = to_number(m["z_max"], "compare.z_max");
      if (m.contains("z_fraction")) c.compare.z_fraction = to_number(m["z_fraction"], "compare.z_fraction");
      if (m.contains("dominance_tol")) c.compare.dominance_tol = to_number(m["dominance_tol"], "compare.dominance_tol");
    }
    if (j.contains("sweep")) {
      const auto& s = j["sweep"];
      check_keys(s, "sweep", {"link", "c", "tau", "s"});
      if (s.contains("link")) {
        const json links = s["link"].is_array() ? s["link"] : json::array({s["link"]});
        for (const auto& l : links) c.sweep.link.push_back(parse_link_kind(l));
      }
      if (s.contains("c")) c.sweep.c = to_numbers(s["c"], "sweep.c");
      if (s.contains("tau")) c.sweep.tau = to_numbers(s["tau"], "sweep.tau");
      if (s.contains("s")) c.sweep.s = to_numbers(s["s"], "sweep.s");
    }
    if (j.contains("levels")) c.levels = to_numbers(j["levels"], "levels");
    if (j.contains("output")) {
      if (!j["output"].is_string()) throw ConfigError("config: output must be a string");
      c.output = j["output"].get<std::string>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

json config_to_json(const RunConfig& c) {
  json link{{"kind", std::string(to_string(c.link.kind))}, {"x_min", c.link.x_min}};
  if (c.link.mu) link["mu"] = *c.link.mu;
  if (c.link.s) link["s"] = *c.link.s;
  if (c.link.mu_hat) link["mu_hat"] = *c.link.mu_hat;
  if (c.link.s_hat) link["s_hat"] = *c.link.s_hat;
  json corr{{"mode", std::string(to_string(c.correlation.mode))}};
  if (c.correlation.c) corr["c"] = from_number(*c.correlation.c);
  if (c.correlation.kappa) corr["kappa"] = *c.correlation.kappa;
  json sweep = json::object();
  if (!c.sweep.link.empty()) {
    sweep["link"] = json::array();
    for (auto k : c.sweep.link) sweep["link"].push_back(std::string(to_string(k)));
  }
  if (!c.sweep.c.empty()) sweep["c"] = from_numbers(c.sweep.c);
  if (!c.sweep.tau.empty()) sweep["tau"] = from_numbers(c.sweep.tau);
  if (!c.sweep.s.empty()) sweep["s"] = from_numbers(c.sweep.s);
  return {
      {"link", link},
      {"correlation", corr},
      {"tau", c.tau},
      {"t_grid", grid_json(c.t_grid)},
      {"x_grid", grid_json(c.x_grid)},
      {"delta", c.delta},
      {"quadrature",
       {{"m", c.quadrature.m},
        {"L", c.quadrature.L},
        {"rule", c.quadrature.rule == QuadratureRule::GaussLegendre ? "gauss-legendre" : "trapezoid"}}},
      {"simulation",
       {{"n_paths", c.simulation.n_paths}, {"seed", c.simulation.seed}, {"sample_paths", c.simulation.sample_paths}}},
      {"compare",
       {{"kappas", from_numbers(c.compare.kappas)},
        {"z_max", c.compare.z_max},
        {"z_fraction", c.compare.z_fraction},
        {"dominance_tol", c.compare.dominance_tol}}},
      {"sweep", sweep},
      {"levels", c.levels},
      {"output", c.output},
  };
}

void apply_override(json& tree, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const json value = parse_scalar_text(assignment.substr(eq + 1));
  json* node = &tree;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw ConfigError("--set: malformed key '" + key + "'");
    parts.push_back(part);
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) throw ConfigError("--set: '" + key + "' descends into a non-object");
    node = &(*node)[parts[i]];
    if (node->is_null()) *node = json::object();
  }
  if (!node->is_object()) throw ConfigError("--set: '" + key + "' descends into a non-object");
  (*node)[parts.back()] = value;
}

RunConfig load_config(const std::optional<std::string>& path, const std::vector<std::string>& overrides) {
  json user = json::object();
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot read config file " + *path);
    try {
      user = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
      throw ConfigError("config file " + *path + ": " + e.what());
    }
    // A meta.json from an earlier run carries its configuration under "config".
    if (user.is_object() && user.contains("config") && user.contains("engine_version")) user = user["config"];
    if (!user.is_object()) throw ConfigError("config file " + *path + " must hold a JSON object");
  }
  for (const auto& o : overrides) apply_override(user, o);

  json base = config_to_json(RunConfig{});
  // A parameter group given by the user replaces the default group.
  if (user.contains("link") && user["link"].is_object()) {
    const auto& l = user["link"];
    if (l.contains("mu_hat") || l.contains("s_hat")) {
      base["link"].erase("mu");
      base["link"].erase("s");
    }
  }
  if (user.contains("correlation") && user["correlation"].is_object()) {
    const auto& r = user["correlation"];
    const bool degenerate = r.contains("mode") && r["mode"].is_string() && r["mode"].get<std::string>() != "ou";
    if (r.contains("kappa") || degenerate) base["correlation"].erase("c");
  }
  base.merge_patch(user);
  return config_from_json(base);
}

std::string format_c(double c) {
  if (c == 0) return "0";
  return format_number(c);
}

ResolvedModel resolve_model(const RunConfig& config) {
  config.validate();
  ResolvedModel r;
  LinkFunction link;
  link.kind = config.link.kind;
  link.x_min = config.link.x_min;
  if (config.link.targets()) {
    const auto [mu_hat, s_hat] = calibrate_marginal({*config.link.mu, *config.link.s, config.link.x_min}, link.kind);
    link.mu_hat = mu_hat;
    link.s_hat = s_hat;
    r.s = *config.link.s;
  } else {
    link.mu_hat = *config.link.mu_hat;
    link.s_hat = *config.link.s_hat;
    link.validate();
    r.s = marginal_moments(link).sd;
  }
  r.model.link = link;
  r.model.schedule = GenerationSchedule(config.tau);
  const auto& corr = config.correlation;
  CorrelationKind mode = corr.mode;
  if (mode == CorrelationKind::Ou && corr.c) {
    if (*corr.c == 0) mode = CorrelationKind::Iid;
    if (std::isinf(*corr.c)) mode = CorrelationKind::Frozen;
  }
  switch (mode) {
    case CorrelationKind::Iid:
      r.model.correlation = CorrelationMode::iid();
      r.c_label = "0";
      break;
    case CorrelationKind::Frozen:
      r.model.correlation = CorrelationMode::frozen();
      r.c_label = "inf";
      break;
    case CorrelationKind::Ou:
      if (corr.c) {
        r.model.correlation = CorrelationMode::ou(calibrate_kappa(link, *corr.c), *corr.c);
        r.c_label = format_c(*corr.c);
      } else {
        r.model.correlation = CorrelationMode::ou(*corr.kappa);
      }
      break;
  }
  r.model.validate();
  return r;
}

}  // namespace aoi::cli
