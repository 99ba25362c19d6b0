#pragma once

// Gaussian orthant probabilities Pr(Z_i > a_i for all i).
//
// For the stationary OU chain sampled every tau (lag-one correlation rho) the
// probability factors as Pr(Z_0 > a_0) * prod_i Pr(Z_i > a_i | Z_0 > a_0, ...,
// Z_{i-1} > a_{i-1}). The conditional law of the newest state is carried as a
// density on a truncated grid and pushed through the exact transition kernel
// N(rho u, 1 - rho^2) one step at a time, so an n-dimensional integral costs
// n one-dimensional propagations.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace aoi {

enum class QuadratureRule { Trapezoid, GaussLegendre };

/// Discretisation of the conditional-density recursion.
struct QuadratureSpec {
  /// Base node count per stage over [-L, L]; refinement may add nodes.
  int m = 400;
  /// Truncation half-width in standard-normal units.
  double L = 8.0;
  QuadratureRule rule = QuadratureRule::GaussLegendre;

  void validate() const;
  bool operator==(const QuadratureSpec&) const = default;
};

/// Conditional law of Z_n given Z_i > a_i for i < n, on a node grid.
struct ConditionalTail {
  Eigen::VectorXd nodes;
  /// psi_n at the nodes.
  Eigen::VectorXd density;
  /// Pr(Z_n > node | past events).
  Eigen::VectorXd tail;
  /// Quadrature weights matching `nodes`, for integrating the density.
  Eigen::VectorXd weights;
};

/// Stateful forward recursion over one chain; used by the orthant routines and
/// by grid engines that need every prefix probability of one threshold run.
class OuChain {
 public:
  OuChain(double rho, const QuadratureSpec& spec);
  ~OuChain();
  OuChain(OuChain&&) noexcept;
  OuChain& operator=(OuChain&&) noexcept;

  /// Adds the next threshold and returns the conditional factor
  /// Pr(Z_n > a | earlier events); the first call returns Pr(Z_0 > a).
  /// Throws QuadratureFailure when a >= L.
  double advance(double a);

  /// Conditional law of the next (not yet thresholded) state on [-L, L].
  ConditionalTail next_state() const;

  std::size_t stages() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Pr(Z_i > a_i, i = 0..n-1) for the OU chain with lag-one correlation rho in
/// (0, 1). Entries may be -infinity. Returns 1 for an empty vector.
double ou_orthant(const Eigen::Ref<const Eigen::VectorXd>& a, double rho, const QuadratureSpec& spec = {});

/// All prefix probabilities: entry j is the orthant probability of a_0..a_j.
/// With `saturate_beyond_truncation`, a threshold >= L ends the recursion and
/// that prefix and all later ones are reported as 0 (their true value is below
/// Pr(Z > L)); otherwise it throws QuadratureFailure.
Eigen::VectorXd ou_orthant_prefixes(const Eigen::Ref<const Eigen::VectorXd>& a, double rho,
                                    const QuadratureSpec& spec = {}, bool saturate_beyond_truncation = false);

/// Conditional law of Z_n given Z_i > a_i for the n = a.size() leading states.
ConditionalTail conditional_tail(const Eigen::Ref<const Eigen::VectorXd>& a, double rho,
                                 const QuadratureSpec& spec = {});

/// Independent coordinates: prod_i Pr(Z > a_i).
double orthant_iid(const Eigen::Ref<const Eigen::VectorXd>& a);

/// Fully correlated coordinates (Z_i = Z_0): Pr(Z > max_i a_i).
double orthant_frozen(const Eigen::Ref<const Eigen::VectorXd>& a);

/// Covariance of a stationary Gaussian sampled at `times`:
/// Sigma_ij = autocov(|t_i - t_j|).
class CovarianceSpec {
 public:
  CovarianceSpec(std::vector<double> times, std::function<double(double)> autocov);

  /// Equally spaced OU samples with lag-one correlation rho.
  static CovarianceSpec ou_grid(std::size_t n, double rho);

  const std::vector<double>& times() const { return times_; }
  const Eigen::MatrixXd& matrix() const { return sigma_; }

 private:
  std::vector<double> times_;
  std::function<double(double)> autocov_;
  Eigen::MatrixXd sigma_;
};

struct MonteCarloEstimate {
  double estimate = 0;
  double std_error = 0;
};

/// Monte-Carlo estimate of Pr(Z > a componentwise) for Z ~ N(0, Sigma).
/// Deterministic given seed; sample block b always draws from stream b.
MonteCarloEstimate mvn_orthant_mc(const CovarianceSpec& cov, const Eigen::Ref<const Eigen::VectorXd>& a,
                                  std::uint64_t n_samples, std::uint64_t seed, unsigned threads = 1);

}  // namespace aoi
