#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "ranklab/tielogit.hpp"

using namespace ranklab;

namespace {

// P = integral over u in (0,1) of prod_c (1 - u^(S_c/S_D)), the change of
// variables u = F(max unchosen). Evaluated by quadrature, independently of
// the recursion used by the library.
double quadrature_prob(const ChoiceInstance& inst) {
  double s_d = 0.0;
  for (double v : inst.unchosen_values) s_d += std::exp(v);
  std::vector<double> a;
  for (double v : inst.chosen_values) a.push_back(std::exp(v) / s_d);
  boost::math::quadrature::tanh_sinh<double> integrator;
  return integrator.integrate(
      [&](double u) {
        double prod = 1.0;
        for (double ac : a) prod *= -std::expm1(ac * std::log(u));
        return prod;
      },
      0.0, 1.0);
}

StageData one_set(std::vector<std::vector<double>> rows, std::vector<std::uint8_t> chosen) {
  StageData d(std::vector<std::string>(rows[0].size(), "x"));
  for (std::size_t j = 0; j < d.n_params; ++j) d.names[j] = "x" + std::to_string(j);
  std::vector<double> flat;
  for (auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  d.add_set("s", flat, chosen);
  return d;
}

}  // namespace

TEST(TieLogit, SymmetricPairIsHalf) {
  EXPECT_NEAR(tie_prob({{0.0}, {0.0}}), 0.5, 1e-15);
  EXPECT_NEAR(tie_prob({{3.7}, {3.7}}), 0.5, 1e-15);
}

TEST(TieLogit, SingleChoiceIsMultinomialLogit) {
  const std::vector<double> d{0.3, -1.0, 2.0};
  const double c = 0.9;
  const double denom = std::exp(c) + std::exp(0.3) + std::exp(-1.0) + std::exp(2.0);
  EXPECT_NEAR(tie_prob({{c}, d}), std::exp(c) / denom, 1e-14);
}

TEST(TieLogit, EmptyBlockGivesOne) {
  EXPECT_EQ(tie_prob({{}, {1.0, 2.0}}), 1.0);
  EXPECT_EQ(tie_prob({{1.0, 2.0}, {}}), 1.0);
}

TEST(TieLogit, MatchesQuadratureOracle) {
  RandomStream r(9, Stream::test_data);
  for (int t = 0; t < 50; ++t) {
    ChoiceInstance inst;
    const auto nc = 1 + r.below(5), nd = 1 + r.below(10);
    for (std::size_t i = 0; i < nc; ++i) inst.chosen_values.push_back(r.normal(0.0, 1.5));
    for (std::size_t i = 0; i < nd; ++i) inst.unchosen_values.push_back(r.normal(0.0, 1.5));
    const double exact = tie_prob(inst);
    EXPECT_NEAR(exact, quadrature_prob(inst), 1e-9 * std::max(1.0, exact)) << "instance " << t;
    EXPECT_GT(exact, 0.0);
    EXPECT_LT(exact, 1.0);
  }
}

TEST(TieLogit, LocationInvariance) {
  const ChoiceInstance a{{0.1, 0.5}, {-0.2, 0.7, 1.1}};
  ChoiceInstance b = a;
  for (auto& v : b.chosen_values) v += 500.0;
  for (auto& v : b.unchosen_values) v += 500.0;
  EXPECT_NEAR(tie_prob(a), tie_prob(b), 1e-13);
}

TEST(TieLogit, MonotoneInChosenUtility) {
  double last = 0.0;
  for (double v = -3.0; v <= 3.0; v += 0.5) {
    const double p = tie_prob({{v, 0.2}, {0.0, 0.1, -0.4}});
    EXPECT_GT(p, last);
    last = p;
  }
}

TEST(TieLogit, WellSeparatedBlocksStayAccurate) {
  const ChoiceInstance inst{{-6.0, -5.0}, {6.0, 5.0}};
  const double p = tie_prob(inst);
  EXPECT_GT(p, 0.0);
  EXPECT_NEAR(p, quadrature_prob(inst), 1e-6 * quadrature_prob(inst));
  EXPECT_NEAR(tie_prob({{800.0}, {-800.0}}), 1.0, 1e-15);
  EXPECT_NEAR(tie_prob({{-30.0}, {30.0}}) / std::exp(-60.0), 1.0, 1e-12);
}

TEST(TieLogit, TinyProbabilitiesKeepRelativeAccuracy) {
  // for a_c -> 0 the integrand tends to a_1 a_2 (log u)^2, so P -> 2 a_1 a_2
  const double s_d = std::exp(40.0) + std::exp(38.0);
  const double a1 = std::exp(-40.0) / s_d, a2 = std::exp(-35.0) / s_d;
  EXPECT_NEAR(tie_prob({{-40.0, -35.0}, {40.0, 38.0}}) / (2.0 * a1 * a2), 1.0, 1e-12);

  const ChoiceInstance three{{-9.0, -7.5, -8.0}, {4.0, 6.0, 5.5}};
  EXPECT_NEAR(tie_prob(three) / quadrature_prob(three), 1.0, 1e-8);
}

TEST(TieLogit, UnderflowIsReported) {
  EXPECT_THROW(tie_prob({{-800.0}, {800.0}}), NumericalError);
}

TEST(TieLogit, CapIsEnforced) {
  ChoiceInstance inst{std::vector<double>(5, 0.0), {0.0}};
  EXPECT_THROW(tie_prob(inst, 4), NumericalError);
  EXPECT_NO_THROW(tie_prob(inst, 5));
}

TEST(TieLogit, McOracleAgrees) {
  const ChoiceInstance inst{{0.4, -0.1}, {0.0, 0.3, -0.5, 0.2}};
  const auto mc = mc_tie_prob(inst, 200000, 5);
  EXPECT_NEAR(mc.p, tie_prob(inst), 4.0 * mc.se);
}

TEST(TieLogit, ConstantCovariateHasZeroGradient) {
  const auto d = one_set({{1.0, 2.0}, {1.0, -1.0}, {1.0, 0.5}}, {1, 0, 0});
  const auto g = grad_log_likelihood(std::vector<double>{0.3, 0.7}, d);
  EXPECT_NEAR(g[0], 0.0, 1e-14);
}

TEST(TieLogit, SingleChoiceScoreIsLogitScore) {
  const std::vector<std::vector<double>> x{{1.0, 0.0}, {0.0, 1.0}, {2.0, -1.0}};
  const std::vector<double> beta{0.4, -0.3};
  const auto d = one_set(x, {0, 1, 0});
  const auto g = grad_log_likelihood(beta, d);
  std::vector<double> e(3);
  double z = 0.0;
  for (int i = 0; i < 3; ++i) z += e[i] = std::exp(x[i][0] * beta[0] + x[i][1] * beta[1]);
  for (int j = 0; j < 2; ++j) {
    double expect = x[1][j];
    for (int i = 0; i < 3; ++i) expect -= e[i] / z * x[i][j];
    EXPECT_NEAR(g[j], expect, 1e-14);
  }
}

TEST(TieLogit, GradientMatchesFiniteDifference) {
  RandomStream r(12, Stream::test_data);
  StageData d(std::vector<std::string>{"a", "b", "c"});
  for (int k = 0; k < 30; ++k) {
    const std::size_t n = 2 + r.below(8);
    std::vector<double> rows(n * 3);
    std::vector<std::uint8_t> ch(n, 0);
    for (auto& v : rows) v = r.normal();
    ch[0] = 1;
    if (n > 3) ch[2] = 1;
    d.add_set("s" + std::to_string(k), rows, ch);
  }
  std::vector<double> beta{0.5, -0.2, 0.8};
  const auto g = grad_log_likelihood(beta, d);
  for (std::size_t j = 0; j < 3; ++j) {
    auto bp = beta, bm = beta;
    bp[j] += 1e-6;
    bm[j] -= 1e-6;
    const double fd = (log_likelihood(bp, d) - log_likelihood(bm, d)) / 2e-6;
    EXPECT_NEAR(g[j], fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST(TieLogit, DegenerateSetsAreSkipped) {
  StageData d(std::vector<std::string>{"a"});
  const std::vector<double> rows{1.0, 2.0};
  d.add_set("all", rows, std::vector<std::uint8_t>{1, 1});
  d.add_set("none", rows, std::vector<std::uint8_t>{0, 0});
  EXPECT_EQ(d.n_sets(), 0u);
  EXPECT_EQ(d.skipped_degenerate, 2u);
}

TEST(TieLogit, LikelihoodIndependentOfThreadCount) {
  RandomStream r(13, Stream::test_data);
  StageData d(std::vector<std::string>{"a", "b"});
  for (int k = 0; k < 500; ++k) {
    std::vector<double> rows(10);
    for (auto& v : rows) v = r.normal();
    d.add_set("s", rows, std::vector<std::uint8_t>{1, 0, 0, 1, 0});
  }
  const std::vector<double> beta{0.3, -0.6};
  set_thread_count(1);
  const double a = log_likelihood(beta, d);
  set_thread_count(7);
  const double b = log_likelihood(beta, d);
  set_thread_count(0);
  EXPECT_EQ(a, b);
}
