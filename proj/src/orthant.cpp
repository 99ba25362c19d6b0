#include "aoi/orthant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "aoi/errors.hpp"
#include "aoi/normal.hpp"
#include "aoi/numerics.hpp"
#include "aoi/parallel.hpp"
#include "aoi/rng.hpp"

namespace aoi {

void QuadratureSpec::validate() const {
  if (m < 16) throw InvalidArgument("quadrature: m must be >= 16");
  if (!std::isfinite(L) || L < 4) throw InvalidArgument("quadrature: L must be >= 4");
}

namespace {

// Gaussian factors below exp(-kCut^2 / 2) ~ 2.6e-18 are dropped.
constexpr double kCut = 9.0;
// Largest standardized width integrated by one sub-panel.
constexpr double kPieceWidth = 2.0;
constexpr int kGaussPanelNodes = 8;

// Node layout inside one panel, on the reference interval [-1, 1].
struct PanelRule {
  Eigen::VectorXd x, w, bary;

  static PanelRule gauss(int q) {
    const GaussLegendre<double> gl(q);
    return {gl.nodes, gl.weights, gl.bary};
  }

  static PanelRule trapezoid() {
    PanelRule r;
    r.x = Eigen::Vector2d(-1, 1);
    r.w = Eigen::Vector2d(1, 1);
    r.bary = Eigen::Vector2d(-0.5, 0.5);
    return r;
  }

  int size() const { return static_cast<int>(x.size()); }

  double interpolate(const double* values, double lo, double hi, double u) const {
    const double s = (2 * u - lo - hi) / (hi - lo);
    double num = 0, den = 0;
    for (int j = 0; j < size(); ++j) {
      const double d = s - x(j);
      if (d == 0) return values[j];
      const double c = bary(j) / d;
      num += c * values[j];
      den += c;
    }
    return num / den;
  }
};

const GaussLegendre<double>& piece_rule() {
  static const GaussLegendre<double> rule(10);
  return rule;
}

// A sharp transition in the density (smoothed truncation edge).
struct Feature {
  double center;
  double width;
};

// Density of the current conditional state on panels covering [edges.front(), edges.back()].
struct StateGrid {
  std::vector<double> edges;
  Eigen::VectorXd nodes, weights, density;
  std::vector<Feature> features;
  double lower = 0;    // start of support (truncation point or -L)
  bool truncated = false;

  int panels() const { return static_cast<int>(edges.size()) - 1; }
};

}  // namespace

struct OuChain::Impl {
  double rho;
  double sigma;
  QuadratureSpec spec;
  PanelRule rule;
  double base_width;
  StateGrid state;
  bool has_state = false;
  bool has_pending = false;
  double pending = 0;
  std::size_t stage_count = 0;

  Impl(double rho_, const QuadratureSpec& spec_) : rho(rho_), spec(spec_) {
    spec.validate();
    if (!(rho > 0 && rho < 1)) throw InvalidArgument("ou_orthant: rho must lie in (0, 1)");
    sigma = std::sqrt((1 - rho) * (1 + rho));
    if (spec.rule == QuadratureRule::GaussLegendre) {
      rule = PanelRule::gauss(kGaussPanelNodes);
      base_width = 2 * spec.L / std::max(1, spec.m / kGaussPanelNodes);
    } else {
      rule = PanelRule::trapezoid();
      base_width = 2 * spec.L / (spec.m - 1);
    }
  }

  void fill_nodes(StateGrid& g) const {
    const int q = rule.size();
    const int p = g.panels();
    g.nodes.resize(p * q);
    g.weights.resize(p * q);
    for (int k = 0; k < p; ++k) {
      const double lo = g.edges[k], hi = g.edges[k + 1];
      for (int j = 0; j < q; ++j) {
        g.nodes(k * q + j) = 0.5 * (lo + hi) + 0.5 * (hi - lo) * rule.x(j);
        g.weights(k * q + j) = 0.5 * (hi - lo) * rule.w(j);
      }
    }
  }

  // Panel edges over [lower, L]: uniform base panels plus graded refinement
  // around each feature.
  StateGrid make_grid(double lower, std::vector<Feature> features) const {
    const double hi = spec.L;
    struct Mark {
      double pos, scale;
    };
    std::vector<Mark> marks;
    const int base = std::max(1, static_cast<int>(std::ceil((hi - lower) / base_width - 1e-9)));
    const double h = (hi - lower) / base;
    for (int i = 0; i <= base; ++i) marks.push_back({i == base ? hi : lower + h * i, h});

    std::vector<Feature> kept;
    for (const Feature& f : features) {
      if (f.width >= 4 * base_width) continue;
      if (f.center + kCut * f.width <= lower || f.center - kCut * f.width >= hi) continue;
      kept.push_back(f);
    }
    for (const Feature& f : kept) {
      if (f.center > lower && f.center < hi) marks.push_back({f.center, 0.5 * f.width});
      for (double d = 0.5 * f.width; d < h; d *= 2) {
        for (double s : {-1.0, 1.0}) {
          const double p = f.center + s * d;
          if (p > lower && p < hi) marks.push_back({p, d});
        }
      }
    }
    std::sort(marks.begin(), marks.end(), [](const Mark& a, const Mark& b) { return a.pos < b.pos; });

    // Drop marks crowding a finer neighbour; the end points always stay.
    std::vector<Mark> merged{marks.front()};
    for (std::size_t i = 1; i < marks.size(); ++i) {
      const Mark& m = marks[i];
      const Mark& last = merged.back();
      const double gap = m.pos - last.pos;
      if (gap <= 0) continue;
      if (gap >= 0.5 * std::min(last.scale, m.scale)) {
        merged.push_back(m);
      } else if (m.pos == hi) {
        if (merged.size() > 1)
          merged.back() = m;
        else
          merged.push_back(m);
      }
    }
    StateGrid g;
    for (const Mark& m : merged) g.edges.push_back(m.pos);
    g.lower = lower;
    g.features = std::move(kept);
    fill_nodes(g);
    return g;
  }

  // Integrates density(u) * weight(u) over the current state, where the
  // weight varies on the scale of one standardized unit of
  // v(u) = (rho u - shift) / sigma and vanishes for v < -kCut (and also for
  // v > kCut when `two_sided`).
  template <typename Weight>
  double integrate_state(double shift, bool two_sided, const Weight& weight) const {
    const StateGrid& g = state;
    const int q = rule.size();
    const auto& pr = piece_rule();
    const double u_lo_cut = (shift - kCut * sigma) / rho;
    const double u_hi_cut = (shift + kCut * sigma) / rho;
    const double piece = kPieceWidth * sigma / rho;
    double total = 0;
    for (int k = 0; k < g.panels(); ++k) {
      const double lo = g.edges[k], hi = g.edges[k + 1];
      if (hi <= u_lo_cut) continue;
      if (two_sided && lo >= u_hi_cut) continue;
      const double* vals = g.density.data() + k * q;
      const bool inside_flat = lo >= u_hi_cut;  // one-sided weight ~ 1 here
      if (inside_flat || hi - lo <= piece) {
        for (int j = 0; j < q; ++j) total += g.weights(k * q + j) * vals[j] * weight(g.nodes(k * q + j));
        continue;
      }
      // Resolve the weight's transition region with small pieces.
      const double a = std::max(lo, u_lo_cut);
      const double b = std::min(hi, u_hi_cut);
      auto add_piece = [&](double plo, double phi) {
        if (phi <= plo) return;
        for (int j = 0; j < pr.size(); ++j) {
          const double u = pr.node(j, plo, phi);
          total += pr.weight(j, plo, phi) * rule.interpolate(vals, lo, hi, u) * weight(u);
        }
      };
      if (b > a) {
        const int pieces = std::max(1, static_cast<int>(std::ceil((b - a) / piece)));
        const double step = (b - a) / pieces;
        for (int i = 0; i < pieces; ++i) add_piece(a + step * i, i + 1 == pieces ? b : a + step * (i + 1));
      }
      if (!two_sided && hi > b) add_piece(std::max(a, b), hi);
    }
    return total;
  }

  // Pr(Z_next > a | state) = E[ Phi((rho U - a) / sigma) ].
  double tail_factor(double a) const {
    if (a == -std::numeric_limits<double>::infinity()) return state.weights.dot(state.density);
    return integrate_state(a, false, [&](double u) { return std_normal_cdf((rho * u - a) / sigma); });
  }

  // Propagated (unnormalized) density at y: E[ phi((y - rho U) / sigma) / sigma ].
  double propagate_at(double y) const {
    const double inv = 1 / sigma;
    return integrate_state(y, true, [&](double u) { return std_normal_pdf((y - rho * u) * inv) * inv; });
  }

  std::vector<Feature> propagated_features() const {
    std::vector<Feature> out;
    if (state.truncated) out.push_back({rho * state.lower, sigma});
    for (const Feature& f : state.features)
      out.push_back({rho * f.center, std::sqrt(rho * rho * f.width * f.width + sigma * sigma)});
    return out;
  }

  StateGrid propagate_to(double lower, double normalizer) const {
    StateGrid next = make_grid(lower, propagated_features());
    next.density.resize(next.nodes.size());
    for (Eigen::Index j = 0; j < next.nodes.size(); ++j) next.density(j) = propagate_at(next.nodes(j)) / normalizer;
    return next;
  }

  double lower_for(double a) const {
    if (a >= spec.L) throw QuadratureFailure("threshold " + std::to_string(a) + " lies beyond the truncation L");
    return std::max(a, -spec.L);
  }

  void start(double a) {
    const double lower = lower_for(a);
    state = make_grid(lower, {});
    state.truncated = a > -spec.L;
    const double mass = std_normal_tail(a);
    state.density.resize(state.nodes.size());
    for (Eigen::Index j = 0; j < state.nodes.size(); ++j) state.density(j) = std_normal_pdf(state.nodes(j)) / mass;
    has_state = true;
  }

  void materialize_pending(double factor) {
    StateGrid next = propagate_to(lower_for(pending), factor);
    next.truncated = pending > -spec.L;
    state = std::move(next);
    has_pending = false;
  }

  double pending_factor = 1;

  bool dead = false;

  double advance(double a) {
    if (std::isnan(a)) throw InvalidArgument("ou_orthant: NaN threshold");
    if (dead) {
      ++stage_count;
      return 0.0;
    }
    if (!has_state) {
      lower_for(a);
      start(a);
      ++stage_count;
      const double p0 = std_normal_tail(a);
      dead = p0 <= 0;
      return p0;
    }
    if (has_pending) materialize_pending(pending_factor);
    lower_for(a);
    const double factor = std::clamp(tail_factor(a), 0.0, 1.0);
    pending = a;
    pending_factor = factor;
    has_pending = factor > 0;
    dead = !has_pending;
    ++stage_count;
    return factor;
  }
};

OuChain::OuChain(double rho, const QuadratureSpec& spec) : impl_(std::make_unique<Impl>(rho, spec)) {}
OuChain::~OuChain() = default;
OuChain::OuChain(OuChain&&) noexcept = default;
OuChain& OuChain::operator=(OuChain&&) noexcept = default;

double OuChain::advance(double a) { return impl_->advance(a); }

std::size_t OuChain::stages() const { return impl_->stage_count; }

ConditionalTail OuChain::next_state() const {
  Impl& im = *impl_;
  ConditionalTail out;
  if (!im.has_state) {
    // Unconditioned stationary law.
    StateGrid g = im.make_grid(-im.spec.L, {});
    out.nodes = g.nodes;
    out.weights = g.weights;
    out.density = out.nodes.unaryExpr([](double y) { return std_normal_pdf(y); });
    out.tail = out.nodes.unaryExpr([](double y) { return std_normal_tail(y); });
    return out;
  }
  // Work on a copy so the chain itself is untouched.
  Impl copy(im.rho, im.spec);
  copy.state = im.state;
  copy.has_state = true;
  copy.has_pending = im.has_pending;
  copy.pending = im.pending;
  copy.pending_factor = im.pending_factor;
  if (copy.has_pending) copy.materialize_pending(copy.pending_factor);
  StateGrid g = copy.propagate_to(-im.spec.L, 1.0);
  out.nodes = g.nodes;
  out.weights = g.weights;
  out.density = g.density;
  out.tail.resize(g.nodes.size());
  for (Eigen::Index j = 0; j < g.nodes.size(); ++j) out.tail(j) = copy.tail_factor(g.nodes(j));
  return out;
}

double ou_orthant(const Eigen::Ref<const Eigen::VectorXd>& a, double rho, const QuadratureSpec& spec) {
  const Eigen::VectorXd prefixes = ou_orthant_prefixes(a, rho, spec, false);
  return prefixes.size() == 0 ? 1.0 : prefixes(prefixes.size() - 1);
}

Eigen::VectorXd ou_orthant_prefixes(const Eigen::Ref<const Eigen::VectorXd>& a, double rho,
                                    const QuadratureSpec& spec, bool saturate_beyond_truncation) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(a.size());
  OuChain chain(rho, spec);
  double p = 1;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (saturate_beyond_truncation && a(i) >= spec.L) break;
    p *= chain.advance(a(i));
    out(i) = p;
    if (p <= 1e-300) {
      out.tail(a.size() - i - 1).setZero();
      break;
    }
  }
  return out;
}

ConditionalTail conditional_tail(const Eigen::Ref<const Eigen::VectorXd>& a, double rho, const QuadratureSpec& spec) {
  OuChain chain(rho, spec);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (chain.advance(a(i)) <= 0) throw EvaluationError("conditional_tail: conditioning event has probability 0");
  }
  return chain.next_state();
}

double orthant_iid(const Eigen::Ref<const Eigen::VectorXd>& a) {
  double p = 1;
  for (Eigen::Index i = 0; i < a.size(); ++i) p *= std_normal_tail(a(i));
  return p;
}

double orthant_frozen(const Eigen::Ref<const Eigen::VectorXd>& a) {
  if (a.size() == 0) return 1.0;
  return std_normal_tail(a.maxCoeff());
}

CovarianceSpec::CovarianceSpec(std::vector<double> times, std::function<double(double)> autocov)
    : times_(std::move(times)), autocov_(std::move(autocov)) {
  const auto n = static_cast<Eigen::Index>(times_.size());
  sigma_.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) sigma_(i, j) = autocov_(std::abs(times_[i] - times_[j]));
}

CovarianceSpec CovarianceSpec::ou_grid(std::size_t n, double rho) {
  std::vector<double> times(n);
  for (std::size_t i = 0; i < n; ++i) times[i] = static_cast<double>(i);
  return CovarianceSpec(std::move(times), [rho](double lag) { return std::pow(rho, lag); });
}

namespace {

// Triangular-type factor F with F F^T = Sigma from a pivoted LDL^T.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& sigma) {
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(sigma);
  if (ldlt.info() != Eigen::Success) throw FactorizationFailure("covariance factorization failed");
  Eigen::VectorXd d = ldlt.vectorD();
  const double scale = std::max(1.0, d.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (d(i) < -1e-10 * scale) throw FactorizationFailure("covariance matrix is not positive semi-definite");
    d(i) = std::sqrt(std::max(0.0, d(i)));
  }
  Eigen::MatrixXd lower = ldlt.matrixL();
  Eigen::MatrixXd f = lower * d.asDiagonal();
  return ldlt.transpositionsP().transpose() * f;
}

constexpr std::uint64_t kMcBlock = 1 << 14;

}  // namespace

MonteCarloEstimate mvn_orthant_mc(const CovarianceSpec& cov, const Eigen::Ref<const Eigen::VectorXd>& a,
                                  std::uint64_t n_samples, std::uint64_t seed, unsigned threads) {
  const Eigen::MatrixXd& sigma = cov.matrix();
  if (a.size() != sigma.rows()) throw InvalidArgument("mvn_orthant_mc: threshold size mismatch");
  if (n_samples == 0) throw InvalidArgument("mvn_orthant_mc: need at least one sample");
  const Eigen::MatrixXd factor = psd_factor(sigma);
  const Eigen::Index dim = a.size();
  const std::uint64_t blocks = (n_samples + kMcBlock - 1) / kMcBlock;
  std::vector<std::uint64_t> hits(blocks, 0);
  const Eigen::VectorXd thr = a;
  parallel_for(blocks, threads, [&](std::size_t b) {
    SplitMix64 gen(stream_seed(seed, b));
    std::normal_distribution<double> normal;
    const std::uint64_t begin = b * kMcBlock;
    const std::uint64_t end = std::min(n_samples, begin + kMcBlock);
    Eigen::VectorXd xi(dim), z(dim);
    std::uint64_t count = 0;
    for (std::uint64_t s = begin; s < end; ++s) {
      for (Eigen::Index i = 0; i < dim; ++i) xi(i) = normal(gen);
      z.noalias() = factor * xi;
      if ((z.array() > thr.array()).all()) ++count;
    }
    hits[b] = count;
  });
  std::uint64_t total = 0;
  for (auto h : hits) total += h;
  const double n = static_cast<double>(n_samples);
  const double p = static_cast<double>(total) / n;
  return {p, std::sqrt(p * (1 - p) / n)};
}

}  // namespace aoi
