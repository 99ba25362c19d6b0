#include "aoi/outputs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "aoi/errors.hpp"
#include "aoi/normal.hpp"
#include "aoi/numerics.hpp"
#include "aoi/parallel.hpp"

namespace aoi {

namespace {

constexpr double kNegligible = 1e-300;

// Driver mode after resolving degenerate OU correlations.
struct EffectiveDriver {
  CorrelationKind kind;
  double rho = 0;
};

EffectiveDriver effective_driver(const DelayModel& model) {
  if (model.correlation.kind != CorrelationKind::Ou) return {model.correlation.kind, 0};
  const double rho = model.correlation.lag_one_correlation(model.schedule.tau());
  if (!(rho > 0)) return {CorrelationKind::Iid, 0};
  if (!(rho < 1)) return {CorrelationKind::Frozen, 1};
  return {CorrelationKind::Ou, rho};
}

// Run probabilities for one phase phi. Entry c is
// Pr(Z_j > g^{-1}(j tau + phi), j = 0..c-1): the c newest packets generated
// before a time with phase phi are all late. The reversed order is valid
// because the sampled stationary OU chain is time reversible.
class PhaseRun {
 public:
  PhaseRun(const DelayModel& model, double phi, const QuadratureSpec& spec)
      : link_(model.link), driver_(effective_driver(model)), tau_(model.schedule.tau()), phi_(phi), spec_(spec) {
    if (driver_.kind == CorrelationKind::Ou) chain_.emplace(driver_.rho, spec_);
  }

  void extend_to(long count) {
    while (static_cast<long>(values_.size()) <= count) values_.push_back(next());
  }

  double at(long count) {
    extend_to(count);
    return values_[static_cast<std::size_t>(count)];
  }

  const std::vector<double>& values() const { return values_; }

 private:
  double next() {
    if (done_) return 0;
    const long j = static_cast<long>(values_.size()) - 1;
    const double a = g_inverse(link_, static_cast<double>(j) * tau_ + phi_);
    const double last = values_.back();
    double p = 0;
    switch (driver_.kind) {
      case CorrelationKind::Iid:
        p = last * std_normal_tail(a);
        break;
      case CorrelationKind::Frozen:
        // Thresholds are non-decreasing in j, so the newest one dominates.
        p = std_normal_tail(a);
        break;
      case CorrelationKind::Ou:
        // Beyond the truncation the prefix is below Pr(Z > L); report 0.
        if (a >= spec_.L) {
          p = 0;
          break;
        }
        p = last * chain_->advance(a);
        break;
    }
    if (!(p > kNegligible)) {
      done_ = true;
      p = 0;
    }
    return p;
  }

  LinkFunction link_;
  EffectiveDriver driver_;
  double tau_, phi_;
  QuadratureSpec spec_;
  std::optional<OuChain> chain_;
  std::vector<double> values_{1.0};
  bool done_ = false;
};

long cell_count(const TimeDecomposition& td, double t, double x, double tau) {
  return td.k - theta(t, x, tau) + 1;
}

std::string cell_name(double t, double x) {
  std::ostringstream os;
  os.precision(12);
  os << "(t=" << t << ", x=" << x << ")";
  return os.str();
}

// Phase of the delay-threshold breakpoint: j tau + phi = x_min for some j.
double breakpoint_phase(const DelayModel& model) {
  const double tau = model.schedule.tau();
  double r = std::fmod(model.link.x_min, tau);
  if (r < 0) r += tau;
  if (r >= tau * (1 - 1e-12)) r = 0;
  return r;
}

void require_grid(std::span<const double> values, const char* what) {
  for (double v : values)
    if (!std::isfinite(v) || v < 0) throw InvalidArgument(std::string("grid: ") + what + " values must be finite and >= 0");
}

}  // namespace

GaussianDelayOracle::GaussianDelayOracle(DelayModel model, QuadratureSpec spec)
    : model_(std::move(model)), spec_(spec) {
  model_.validate();
  spec_.validate();
}

double GaussianDelayOracle::joint_tail(IndexRange range, std::span<const double> thresholds) const {
  if (range.empty()) return 1.0;
  if (thresholds.size() != range.size()) throw InvalidArgument("gaussian oracle: threshold count mismatch");
  Eigen::VectorXd a(static_cast<Eigen::Index>(thresholds.size()));
  for (std::size_t i = 0; i < thresholds.size(); ++i) a(static_cast<Eigen::Index>(i)) = g_inverse(model_.link, thresholds[i]);
  const EffectiveDriver driver = effective_driver(model_);
  switch (driver.kind) {
    case CorrelationKind::Iid:
      return orthant_iid(a);
    case CorrelationKind::Frozen:
      return orthant_frozen(a);
    case CorrelationKind::Ou:
      if (a.maxCoeff() >= spec_.L) return 0.0;
      return ou_orthant(a, driver.rho, spec_);
  }
  return 0.0;
}

std::vector<double> delay_support_minimum(const DelayModel& model, std::size_t n) {
  return std::vector<double>(n, model.link.x_min);
}

Eigen::VectorXd phase_run_probabilities(const DelayModel& model, double phi, long max_count,
                                        const QuadratureSpec& spec) {
  model.validate();
  spec.validate();
  if (max_count < 0) throw InvalidArgument("phase_run_probabilities: max_count must be >= 0");
  if (!(phi >= 0 && phi < model.schedule.tau())) throw InvalidArgument("phase_run_probabilities: phi must lie in [0, tau)");
  PhaseRun run(model, phi, spec);
  run.extend_to(max_count);
  return Eigen::Map<const Eigen::VectorXd>(run.values().data(), max_count + 1);
}

double exact_ccdf(const DelayModel& model, double t, double x, const QuadratureSpec& spec) {
  model.validate();
  spec.validate();
  if (!std::isfinite(x) || x < 0) throw InvalidArgument("exact_ccdf: x must be finite and >= 0");
  const double tau = model.schedule.tau();
  const TimeDecomposition td = decompose_time(t, tau);
  const long count = cell_count(td, t, x, tau);
  if (count == 0) return 1.0;
  try {
    PhaseRun run(model, td.phi, spec);
    return run.at(count);
  } catch (const EvaluationError& e) {
    throw EvaluationError("exact ccdf failed at " + cell_name(t, x) + ": " + e.what());
  }
}

CcdfGrid exact_ccdf_grid(const DelayModel& model, std::span<const double> t_grid, std::span<const double> x_grid,
                         const QuadratureSpec& spec, unsigned threads) {
  model.validate();
  spec.validate();
  require_grid(t_grid, "t");
  require_grid(x_grid, "x");
  const double tau = model.schedule.tau();
  const auto nt = static_cast<Eigen::Index>(t_grid.size());
  const auto nx = static_cast<Eigen::Index>(x_grid.size());

  CcdfGrid out;
  out.t_values = Eigen::Map<const Eigen::VectorXd>(t_grid.data(), nt);
  out.x_values = Eigen::Map<const Eigen::VectorXd>(x_grid.data(), nx);
  out.p.resize(nt, nx);
  out.kind = GridKind::Exact;
  out.model_description = describe_model(model);

  // Group rows by phase; one recursion serves every cell of a class.
  struct PhaseClass {
    double phi;
    long max_count = 0;
    Eigen::Index t_first = 0, x_first = 0;
    std::vector<double> values;
  };
  std::vector<TimeDecomposition> td(static_cast<std::size_t>(nt));
  std::vector<std::size_t> order(static_cast<std::size_t>(nt));
  for (Eigen::Index i = 0; i < nt; ++i) {
    td[static_cast<std::size_t>(i)] = decompose_time(t_grid[static_cast<std::size_t>(i)], tau);
    order[static_cast<std::size_t>(i)] = static_cast<std::size_t>(i);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return td[a].phi < td[b].phi; });
  const double phase_tol = 1e-12 * std::max(tau, 1.0);
  std::vector<PhaseClass> classes;
  std::vector<std::size_t> class_of(static_cast<std::size_t>(nt));
  for (std::size_t i : order) {
    if (classes.empty() || td[i].phi - classes.back().phi > phase_tol) classes.push_back(PhaseClass{td[i].phi, 0, 0, 0, {}});
    class_of[i] = classes.size() - 1;
  }
  Eigen::MatrixXi counts(nt, nx);
  for (Eigen::Index i = 0; i < nt; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    auto& cls = classes[class_of[ui]];
    for (Eigen::Index j = 0; j < nx; ++j) {
      const long c = cell_count(td[ui], t_grid[ui], x_grid[static_cast<std::size_t>(j)], tau);
      counts(i, j) = static_cast<int>(c);
      if (c > cls.max_count) {
        cls.max_count = c;
        cls.t_first = i;
        cls.x_first = j;
      }
    }
  }

  parallel_for(classes.size(), threads, [&](std::size_t c) {
    auto& cls = classes[c];
    try {
      PhaseRun run(model, cls.phi, spec);
      run.extend_to(cls.max_count);
      cls.values = run.values();
    } catch (const EvaluationError& e) {
      throw EvaluationError("exact ccdf grid failed near " +
                            cell_name(t_grid[static_cast<std::size_t>(cls.t_first)],
                                      x_grid[static_cast<std::size_t>(cls.x_first)]) +
                            ": " + e.what());
    }
  });

  for (Eigen::Index i = 0; i < nt; ++i) {
    const auto& values = classes[class_of[static_cast<std::size_t>(i)]].values;
    for (Eigen::Index j = 0; j < nx; ++j) out.p(i, j) = values[static_cast<std::size_t>(counts(i, j))];
  }
  return out;
}

HeatmapGrid heatmap(const CcdfGrid& grid, double delta) {
  if (!(delta > 0) || !std::isfinite(delta)) throw InvalidArgument("heatmap: delta must be positive");
  const Eigen::VectorXd& xs = grid.x_values;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  for (Eigen::Index j = 0; j < xs.size(); ++j) {
    const double target = xs(j) + delta;
    const double tol = 1e-9 * std::max(1.0, std::abs(target));
    for (Eigen::Index k = j + 1; k < xs.size(); ++k) {
      if (std::abs(xs(k) - target) <= tol) {
        pairs.emplace_back(j, k);
        break;
      }
    }
  }
  if (pairs.empty()) throw GridMismatch("heatmap: no x value has x + delta on the grid");
  HeatmapGrid out;
  out.delta = delta;
  out.t_values = grid.t_values;
  out.x_values.resize(static_cast<Eigen::Index>(pairs.size()));
  out.mass.resize(grid.p.rows(), out.x_values.size());
  for (std::size_t c = 0; c < pairs.size(); ++c) {
    const auto col = static_cast<Eigen::Index>(c);
    out.x_values(col) = xs(pairs[c].first);
    out.mass.col(col) = (grid.p.col(pairs[c].first) - grid.p.col(pairs[c].second)).cwiseMax(0.0);
  }
  return out;
}

double time_average(const std::function<double(double)>& cell, double x, double tau, int n_nodes,
                    std::span<const double> break_phases) {
  if (!std::isfinite(x) || x < 0) throw InvalidArgument("time_average: x must be finite and >= 0");
  if (!(tau > 0) || !std::isfinite(tau)) throw InvalidArgument("time_average: tau must be positive");
  if (n_nodes < 8) throw InvalidArgument("time_average: need at least 8 phase nodes");

  // Window t in [x, x + tau], split where the phase of t crosses a breakpoint.
  std::vector<double> cuts{x, x + tau};
  for (double phase : break_phases) {
    double t = std::floor((x - phase) / tau) * tau + phase;
    while (t <= x) t += tau;
    if (t < x + tau) cuts.push_back(t);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end(),
                         [&](double a, double b) { return std::abs(a - b) <= 1e-14 * std::max(1.0, x + tau); }),
             cuts.end());
  const int panels = static_cast<int>(cuts.size()) - 1;
  if (n_nodes < panels) throw InvalidArgument("time_average: fewer nodes than panels");

  double sum = 0;
  int used = 0;
  for (int p = 0; p < panels; ++p) {
    const double lo = cuts[static_cast<std::size_t>(p)], hi = cuts[static_cast<std::size_t>(p) + 1];
    const int remaining_panels = panels - p - 1;
    int n = p + 1 == panels ? n_nodes - used : static_cast<int>(std::lround(n_nodes * (hi - lo) / tau));
    n = std::clamp(n, 1, n_nodes - used - remaining_panels);
    used += n;
    const double h = (hi - lo) / n;
    for (int i = 0; i < n; ++i) sum += h * cell(lo + (i + 0.5) * h);
  }
  return sum / tau;
}

double time_averaged_ccdf(const DelayModel& model, double x, const QuadratureSpec& spec, int n_phase_nodes) {
  model.validate();
  spec.validate();
  const double breaks[] = {breakpoint_phase(model), 0.0};
  return time_average([&](double t) { return exact_ccdf(model, t, x, spec); }, x, model.schedule.tau(), n_phase_nodes,
                      breaks);
}

struct PhaseProfile::Impl {
  DelayModel model;
  QuadratureSpec spec;
  double tau;
  int q;
  unsigned threads;
  GaussLegendre<double> rule;
  struct Panel {
    double lo, hi;
    std::vector<PhaseRun> runs;
  };
  std::vector<Panel> panels;
  long available = 0;

  Impl(const DelayModel& m, const QuadratureSpec& s, int nodes, unsigned th)
      : model(m), spec(s), tau(m.schedule.tau()), q(nodes), threads(th), rule(nodes) {
    model.validate();
    spec.validate();
    const double b = breakpoint_phase(model);
    std::vector<double> edges{0.0, tau};
    if (b > 0) edges.push_back(b);
    // Grade toward the breakpoint from the right, where thresholds leave -inf.
    for (int k = 1; k <= 6; ++k) edges.push_back(b + (tau - b) * std::pow(0.25, k));
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    for (std::size_t e = 0; e + 1 < edges.size(); ++e) {
      Panel p{edges[e], edges[e + 1], {}};
      p.runs.reserve(static_cast<std::size_t>(q));
      for (int i = 0; i < q; ++i) p.runs.emplace_back(model, rule.node(i, p.lo, p.hi), spec);
      panels.push_back(std::move(p));
    }
  }

  void ensure(long count) {
    if (count <= available) return;
    const long target = std::max(count, available + available / 4 + 4);
    const std::size_t per = static_cast<std::size_t>(q);
    parallel_for(panels.size() * per, threads,
                 [&](std::size_t i) { panels[i / per].runs[i % per].extend_to(target); });
    available = target;
  }

  // Integral of P(phi, count) over phi in [lo, hi] within one panel.
  double partial(const Panel& p, long count, double lo, double hi) const {
    if (hi <= lo) return 0;
    Eigen::VectorXd v(q);
    for (int i = 0; i < q; ++i) v(i) = p.runs[static_cast<std::size_t>(i)].values()[static_cast<std::size_t>(count)];
    if (lo <= p.lo && hi >= p.hi) {
      double s = 0;
      for (int i = 0; i < q; ++i) s += rule.weight(i, p.lo, p.hi) * v(i);
      return s;
    }
    double s = 0;
    for (int i = 0; i < q; ++i)
      s += rule.weight(i, lo, hi) * std::clamp(rule.interpolate(v, p.lo, p.hi, rule.node(i, lo, hi)), 0.0, 1.0);
    return s;
  }

  double integral(long count, double lo, double hi) const {
    double s = 0;
    for (const auto& p : panels) s += partial(p, count, std::max(lo, p.lo), std::min(hi, p.hi));
    return s;
  }

  double ccdf_avg(double x) {
    if (!std::isfinite(x)) return x > 0 ? 0.0 : 1.0;
    if (x < 0) return 1.0;
    const TimeDecomposition d = decompose_time(x, tau);
    const long n = d.k;
    ensure(n + 1);
    const double v = (integral(n + 1, 0, d.phi) + integral(n, d.phi, tau)) / tau;
    return std::clamp(v, 0.0, 1.0);
  }
};

PhaseProfile::PhaseProfile(const DelayModel& model, const QuadratureSpec& spec, int nodes_per_panel, unsigned threads)
    : impl_(std::make_unique<Impl>(model, spec, nodes_per_panel, threads)) {}
PhaseProfile::~PhaseProfile() = default;
PhaseProfile::PhaseProfile(PhaseProfile&&) noexcept = default;
PhaseProfile& PhaseProfile::operator=(PhaseProfile&&) noexcept = default;

double PhaseProfile::ccdf_avg(double x) { return impl_->ccdf_avg(x); }

TimeAveragedCcdf PhaseProfile::table(std::span<const double> x_values) {
  require_grid(x_values, "x");
  TimeAveragedCcdf out;
  out.x_values = Eigen::Map<const Eigen::VectorXd>(x_values.data(), static_cast<Eigen::Index>(x_values.size()));
  out.values.resize(out.x_values.size());
  out.phase_nodes = impl_->q * static_cast<int>(impl_->panels.size());
  for (Eigen::Index i = 0; i < out.x_values.size(); ++i) out.values(i) = ccdf_avg(out.x_values(i));
  return out;
}

double percentile_ceiling(const DelayModel& model) {
  return 50 * model.schedule.tau() + 20 * marginal_moments(model.link).mean;
}

PercentileRow generalized_inverse(const std::function<double(double)>& ccdf_avg, std::span<const double> levels,
                                 double tau, double ceiling) {
  for (double p : levels)
    if (!(p > 0 && p < 1)) throw InvalidArgument("percentiles: levels must lie in (0, 1)");
  if (!(ceiling > 0)) throw InvalidArgument("percentiles: ceiling must be positive");
  if (!(tau > 0)) throw InvalidArgument("percentiles: tau must be positive");
  const double tol = 1e-6 * tau;

  PercentileRow row;
  row.levels.assign(levels.begin(), levels.end());
  for (double p : levels) {
    const double target = 1 - p;
    if (ccdf_avg(0) <= target) {
      row.values.push_back(0);
      row.ceiling_exceeded.push_back(false);
      continue;
    }
    double lo = 0, hi = std::min(ceiling, tau);
    bool beyond = false;
    while (ccdf_avg(hi) > target) {
      if (hi >= ceiling) {
        beyond = true;
        break;
      }
      lo = hi;
      hi = std::min(ceiling, 2 * hi);
    }
    if (beyond) {
      row.values.push_back(kInfiniteAge);
      row.ceiling_exceeded.push_back(true);
      continue;
    }
    while (hi - lo > tol) {
      const double mid = 0.5 * (lo + hi);
      (ccdf_avg(mid) > target ? lo : hi) = mid;
    }
    row.values.push_back(hi);
    row.ceiling_exceeded.push_back(false);
  }
  return row;
}

PercentileRow percentiles(const DelayModel& model, std::span<const double> levels, const QuadratureSpec& spec,
                          std::optional<double> ceiling, unsigned threads) {
  PhaseProfile profile(model, spec, 12, threads);
  return generalized_inverse([&](double x) { return profile.ccdf_avg(x); }, levels, model.schedule.tau(),
                             ceiling.value_or(percentile_ceiling(model)));
}

DominanceReport dominance_check(const CcdfGrid& low, const CcdfGrid& high, double tol) {
  auto same = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return a.size() == b.size() && (a.size() == 0 || (a - b).cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, a.cwiseAbs().maxCoeff()));
  };
  if (!same(low.t_values, high.t_values) || !same(low.x_values, high.x_values) || low.p.rows() != high.p.rows() ||
      low.p.cols() != high.p.cols())
    throw GridMismatch("dominance_check: grids differ");
  DominanceReport r;
  r.cells = static_cast<std::size_t>(low.p.size());
  for (Eigen::Index i = 0; i < low.p.rows(); ++i) {
    for (Eigen::Index j = 0; j < low.p.cols(); ++j) {
      const double v = low.p(i, j) - high.p(i, j);
      if (v > r.max_violation) {
        r.max_violation = v;
        r.t_at_max = low.t_values(i);
        r.x_at_max = low.x_values(j);
      }
    }
  }
  r.holds = r.max_violation <= tol;
  return r;
}

}  // namespace aoi
