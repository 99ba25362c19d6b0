#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "aoi/errors.hpp"
#include "aoi/normal.hpp"
#include "aoi/orthant.hpp"
#include "support.hpp"

using namespace aoi;
using testing_support::bivariate_tail;
using testing_support::CaseGen;
using testing_support::kInf;
using testing_support::tail;
using testing_support::trivariate_ou_tail;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Eigen::VectorXd vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

TEST(NormalTail, Examples) {
  EXPECT_EQ(std_normal_tail(0.0), 0.5);
  EXPECT_EQ(std_normal_tail(-kInf), 1.0);
  EXPECT_EQ(std_normal_tail(kInf), 0.0);
  EXPECT_NEAR(std_normal_tail(1.96), 0.0249979, 1e-7);
  EXPECT_NEAR(std_normal_tail(1.96), 0.024997895148220435, 1e-15);
  EXPECT_NEAR(std_normal_tail(-3.0), 1 - 0.0013498980316301, 1e-14);
}

TEST(OuOrthant, Examples) {
  EXPECT_NEAR(ou_orthant(vec({0, 0}), 0.5), 1.0 / 3.0, 1e-8);
  EXPECT_NEAR(ou_orthant(vec({-kInf, -kInf, -kInf}), 0.3), 1.0, 1e-12);
  EXPECT_EQ(ou_orthant(Eigen::VectorXd(0), 0.3), 1.0);
  EXPECT_NEAR(ou_orthant(vec({1.1}), 0.3), tail(1.1), 1e-15);
}

TEST(OuOrthant, BivariateClosedForm) {
  for (int k = 1; k <= 9; ++k) {
    const double rho = 0.1 * k;
    EXPECT_NEAR(ou_orthant(vec({0, 0}), rho), 0.25 + std::asin(rho) / (2 * std::numbers::pi), 1e-9) << rho;
  }
}

TEST(OuOrthant, BivariateAgainstIntegralOracle) {
  CaseGen gen(31);
  for (int i = 0; i < 60; ++i) {
    const double a = gen.uniform(-2.5, 2.5), b = gen.uniform(-2.5, 2.5);
    const double rho = gen.uniform(0.02, 0.98);
    EXPECT_NEAR(ou_orthant(vec({a, b}), rho), bivariate_tail(a, b, rho), 1e-9)
        << "a=" << a << " b=" << b << " rho=" << rho;
  }
}

TEST(OuOrthant, TrivariateAgainstIntegralOracle) {
  CaseGen gen(32);
  for (int i = 0; i < 30; ++i) {
    const auto a = gen.thresholds(3, -2, 2, 0.15);
    const double rho = gen.uniform(0.05, 0.97);
    EXPECT_NEAR(ou_orthant(vec(a), rho), trivariate_ou_tail(a[0], a[1], a[2], rho), 1e-8)
        << a[0] << "," << a[1] << "," << a[2] << " rho=" << rho;
  }
}

TEST(OuOrthant, DegenerateLimits) {
  CaseGen gen(33);
  for (int i = 0; i < 100; ++i) {
    const auto a = vec(gen.thresholds(static_cast<std::size_t>(gen.integer(1, 6)), -2, 2));
    EXPECT_NEAR(ou_orthant(a, 1e-6), orthant_iid(a), 1e-4);
    EXPECT_NEAR(ou_orthant(a, 1 - 1e-6), orthant_frozen(a), 1e-3);
  }
}

TEST(OuOrthant, AppendingVacuousThresholdIsNeutral) {
  CaseGen gen(34);
  for (int i = 0; i < 60; ++i) {
    const std::size_t n = static_cast<std::size_t>(gen.integer(1, 6));
    auto a = gen.thresholds(n, -2, 2.5, 0.2);
    const double rho = gen.uniform(0.01, 0.99);
    const double base = ou_orthant(vec(a), rho);
    a.push_back(-kInf);
    EXPECT_NEAR(ou_orthant(vec(a), rho), base, 1e-8);
  }
}

TEST(OuOrthant, MonotoneInThresholdsAndCorrelation) {
  CaseGen gen(35);
  for (int i = 0; i < 80; ++i) {
    const std::size_t n = static_cast<std::size_t>(gen.integer(2, 6));
    auto a = gen.thresholds(n, -2, 2);
    const double rho = gen.uniform(0.05, 0.9);
    const double p = ou_orthant(vec(a), rho);
    // Slepian: every correlation rho^|i-j| grows with rho.
    EXPECT_LE(p, ou_orthant(vec(a), rho + gen.uniform(0.01, 0.09)) + 1e-10);
    const std::size_t j = static_cast<std::size_t>(gen.integer(0, static_cast<long>(n) - 1));
    a[j] += gen.uniform(0.01, 1);
    EXPECT_LE(ou_orthant(vec(a), rho), p + 1e-10);
  }
}

TEST(OuOrthant, PrefixesMatchSeparateCalls) {
  const auto a = vec({0.3, -0.5, 1.2, -kInf, 0.8});
  const auto pre = ou_orthant_prefixes(a, 0.6);
  for (Eigen::Index j = 0; j < a.size(); ++j) EXPECT_NEAR(pre(j), ou_orthant(a.head(j + 1), 0.6), 1e-14);
}

TEST(OuOrthant, ThresholdBeyondTruncation) {
  EXPECT_THROW(ou_orthant(vec({0, 8.5}), 0.5), QuadratureFailure);
  const auto pre = ou_orthant_prefixes(vec({0, 8.5, 0}), 0.5, {}, true);
  EXPECT_NEAR(pre(0), 0.5, 1e-15);
  EXPECT_EQ(pre(1), 0.0);
  EXPECT_EQ(pre(2), 0.0);
  EXPECT_THROW(ou_orthant(vec({0, 0}), 1.0), InvalidArgument);
  EXPECT_THROW(ou_orthant(vec({0, 0}), 0.0), InvalidArgument);
}

TEST(OuOrthant, TrapezoidRuleAndSpecValidation) {
  QuadratureSpec trap;
  trap.rule = QuadratureRule::Trapezoid;
  const double coarse = std::abs(ou_orthant(vec({0, 0}), 0.5, trap) - 1.0 / 3.0);
  EXPECT_LT(coarse, 5e-5);
  trap.m = 1600;
  EXPECT_LT(std::abs(ou_orthant(vec({0, 0}), 0.5, trap) - 1.0 / 3.0), coarse / 4);
  EXPECT_THROW((QuadratureSpec{8, 8.0}.validate()), InvalidArgument);
  EXPECT_THROW((QuadratureSpec{400, 2.0}.validate()), InvalidArgument);
}

TEST(ConditionalTail, MatchesBivariateOracle) {
  CaseGen gen(36);
  for (int i = 0; i < 10; ++i) {
    const double a0 = gen.uniform(-2, 2), rho = gen.uniform(0.1, 0.95);
    const ConditionalTail ct = conditional_tail(vec({a0}), rho);
    const double norm = tail(a0);
    for (Eigen::Index j = 0; j < ct.nodes.size(); j += 7) {
      const double y = ct.nodes(j);
      EXPECT_NEAR(ct.tail(j), bivariate_tail(a0, y, rho) / norm, 1e-8) << "a0=" << a0 << " y=" << y;
    }
  }
}

TEST(ConditionalTail, Invariants) {
  CaseGen gen(37);
  for (int i = 0; i < 20; ++i) {
    const auto a = gen.thresholds(static_cast<std::size_t>(gen.integer(0, 5)), -2, 2, 0.2);
    const ConditionalTail ct = conditional_tail(vec(a), gen.uniform(0.05, 0.98));
    ASSERT_GT(ct.nodes.size(), 16);
    EXPECT_NEAR(ct.weights.dot(ct.density), 1.0, 1e-8);
    EXPECT_NEAR(ct.tail(0), 1.0, 1e-8);
    for (Eigen::Index j = 0; j < ct.nodes.size(); ++j) {
      EXPECT_GE(ct.density(j), 0.0);
      EXPECT_GE(ct.tail(j), -1e-12);
      EXPECT_LE(ct.tail(j), 1 + 1e-12);
      if (j > 0) {
        EXPECT_GT(ct.nodes(j), ct.nodes(j - 1));
        EXPECT_LE(ct.tail(j), ct.tail(j - 1) + 1e-12);
        // Tail drop between neighbouring nodes equals the density mass there.
        const double mass = 0.5 * (ct.density(j) + ct.density(j - 1)) * (ct.nodes(j) - ct.nodes(j - 1));
        EXPECT_NEAR(ct.tail(j - 1) - ct.tail(j), mass, 0.1 * mass + 1e-8);
      }
    }
  }
}

TEST(Iid, Examples) {
  EXPECT_DOUBLE_EQ(orthant_iid(vec({0, 0, 0})), 0.125);
  EXPECT_DOUBLE_EQ(orthant_iid(vec({-kInf, 0})), 0.5);
  EXPECT_NEAR(orthant_iid(vec({1.6424})), tail(1.6424), 1e-16);
  EXPECT_NEAR(orthant_iid(vec({1.6424})), 0.0503, 1e-4);
}

TEST(Frozen, Examples) {
  EXPECT_EQ(orthant_frozen(vec({0, -5, -9})), 0.5);
  EXPECT_EQ(orthant_frozen(vec({-kInf, -kInf})), 1.0);
  EXPECT_NEAR(orthant_frozen(vec({1.0, 2.0})), tail(2.0), 1e-16);
  EXPECT_NEAR(orthant_frozen(vec({1.0, 2.0})), 0.02275, 1e-5);
}

TEST(Covariance, OuGrid) {
  const auto c = CovarianceSpec::ou_grid(4, 0.6);
  const auto& m = c.matrix();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(m(i, j), std::pow(0.6, std::abs(i - j)), 1e-15);
}

TEST(MonteCarlo, Examples) {
  const CovarianceSpec id({0, 1}, [](double t) { return t == 0 ? 1.0 : 0.0; });
  auto e = mvn_orthant_mc(id, vec({0, 0}), 1'000'000, 41);
  EXPECT_LE(std::abs(e.estimate - 0.25), 3 * e.std_error);
  EXPECT_NEAR(e.std_error, std::sqrt(0.25 * 0.75 / 1e6), 1e-5);
  e = mvn_orthant_mc(CovarianceSpec::ou_grid(2, 0.5), vec({0, 0}), 1'000'000, 42);
  EXPECT_LE(std::abs(e.estimate - 1.0 / 3.0), 3 * e.std_error);
  const auto a3 = vec({0, 0, 0});
  e = mvn_orthant_mc(CovarianceSpec::ou_grid(3, 0.7), a3, 1'000'000, 43);
  EXPECT_LE(std::abs(e.estimate - ou_orthant(a3, 0.7)), 3 * e.std_error);
}

TEST(MonteCarlo, FiveDimensionalLognormalThresholds) {
  // Thresholds g^{-1}((k - i) tau + phi) for the lognormal link (0.452, 1.312), tau = 2, t = 9, x = 9.
  const double rho = std::exp(-0.081 * 2);
  Eigen::VectorXd a(5);
  for (int i = 0; i < 5; ++i) a(i) = (std::log(9.0 - 2 * i - 0.5) - 0.452) / 1.312;
  const auto e = mvn_orthant_mc(CovarianceSpec::ou_grid(5, rho), a, 1'000'000, 44);
  EXPECT_LE(std::abs(e.estimate - ou_orthant(a, rho)), 3 * e.std_error);
}

TEST(MonteCarlo, DeterministicAcrossThreadCounts) {
  const auto cov = CovarianceSpec::ou_grid(4, 0.4);
  const auto a = vec({0.1, -0.2, 0.3, 0});
  const auto e1 = mvn_orthant_mc(cov, a, 200000, 7, 1);
  const auto e3 = mvn_orthant_mc(cov, a, 200000, 7, 3);
  EXPECT_EQ(e1.estimate, e3.estimate);
  EXPECT_EQ(e1.std_error, e3.std_error);
}

TEST(MonteCarlo, RejectsIndefiniteCovariance) {
  const CovarianceSpec bad({0, 1, 2}, [](double t) { return t == 0 ? 1.0 : (t == 1 ? 0.9 : -0.9); });
  EXPECT_THROW(mvn_orthant_mc(bad, vec({0, 0, 0}), 1000, 1), FactorizationFailure);
}
