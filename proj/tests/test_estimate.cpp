#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "mvop/estimate.hpp"
#include "mvop/simulate.hpp"
#include "support.hpp"

using namespace mvop;

namespace {

ModelSpec one_eq() { return ModelSpec{{{"y", 3, {"x"}, "y"}}}; }

ParameterSet one_eq_truth() {
  ParameterSet p;
  p.beta = {{1.0}};
  p.thresholds = {{-0.5, 0.5}};
  return p;
}

CovariateGenerator normal_x() { return CovariateGenerator{{{"x", CovariateDistribution::standard_normal()}}}; }

ModelSpec two_eq() { return ModelSpec{{{"a", 3, {"x", "z"}, "a"}, {"b", 4, {"x"}, "b"}}}; }

ParameterSet two_eq_truth(double rho) {
  ParameterSet p;
  p.beta = {{0.7, -0.4}, {0.5}};
  p.thresholds = {{-0.3, 0.8}, {-0.9, 0.0, 0.7}};
  p.corr.r12 = rho;
  return p;
}

CovariateGenerator xz() {
  return CovariateGenerator{
      {{"x", CovariateDistribution::standard_normal()}, {"z", CovariateDistribution::bernoulli(0.5)}}};
}

FitOptions no_se() {
  FitOptions o;
  o.compute_std_errors = false;
  return o;
}

}  // namespace

TEST(FitStats, PublishedColumns) {
  const auto c = fit_stats(-932.19, -1096.69, 16, 826);
  EXPECT_NEAR(c.rho2, 0.150, 0.01);
  EXPECT_NEAR(c.aic, 1896.38, 0.01);
  EXPECT_NEAR(c.bic, 1971.85, 0.01);
  const auto w = fit_stats(-904.08, -1054.94, 20, 826);
  EXPECT_NEAR(w.rho2, 0.143, 0.01);
  EXPECT_NEAR(w.aic, 1848.16, 0.01);
  EXPECT_NEAR(w.bic, 1942.49, 0.01);
}

TEST(FitStats, Definitions) {
  EXPECT_EQ(fit_stats(-500.0, -500.0, 3, 100).rho2, 0.0);
  const auto s = fit_stats(-10.0, -20.0, 2, 50);
  EXPECT_DOUBLE_EQ(s.rho2, 0.5);
  EXPECT_DOUBLE_EQ(s.aic, 24.0);
  EXPECT_DOUBLE_EQ(s.bic, 2.0 * std::log(50.0) + 20.0);
}

TEST(FitStats, InvalidLikelihoods) {
  EXPECT_THROW(fit_stats(1.0, -10.0, 2, 10), InvalidLikelihood);
  EXPECT_THROW(fit_stats(-1.0, 0.0, 2, 10), InvalidLikelihood);
  EXPECT_THROW(fit_stats(-1.0, 3.0, 2, 10), InvalidLikelihood);
  EXPECT_THROW(fit_stats(std::nan(""), -3.0, 2, 10), InvalidLikelihood);
  EXPECT_THROW(fit_stats(-1.0, -3.0, 2, 0), InvalidLikelihood);
  EXPECT_THROW(fit_stats(-1.0, -3.0, 0, 10), InvalidLikelihood);
}

TEST(NullLoglik, ClosedFormExamples) {
  const ModelSpec spec{{{"y", 2, {}, "y"}}};
  ObservationTable t;
  std::vector<double> y(100, 0.0);
  for (std::size_t i = 50; i < 100; ++i) y[i] = 1.0;
  t.add_column("y", y);
  EXPECT_NEAR(null_loglik(spec, t), 100.0 * std::log(0.5), 1e-9);
  EXPECT_NEAR(null_loglik(spec, t), -69.3147, 1e-4);

  ObservationTable q;
  std::vector<double> y2(400, 1.0);
  for (std::size_t i = 0; i < 100; ++i) y2[i] = 0.0;
  q.add_column("y", y2);
  EXPECT_NEAR(null_loglik(spec, q), 400.0 * (0.25 * std::log(0.25) + 0.75 * std::log(0.75)), 1e-9);
  EXPECT_NEAR(null_loglik(spec, q), -224.934, 5e-4);
}

TEST(NullLoglik, SumsOverEquationsAndMatchesThresholdOnlyFit) {
  const auto spec = two_eq();
  const auto t = sample_dataset(spec, two_eq_truth(0.0), 800, xz(), 3);
  const ModelSpec a{{spec.equations[0]}}, b{{spec.equations[1]}};
  EXPECT_NEAR(null_loglik(spec, t), null_loglik(a, t) + null_loglik(b, t), 1e-9);
  // The closed form is the maximum of a thresholds-only model.
  const ModelSpec bare{{{"a", 3, {}, "a"}, {"b", 4, {}, "b"}}};
  FitOptions o = no_se();
  o.independent = true;
  const auto r = fit(bare, t, o);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.ll, null_loglik(spec, t), 1e-6);
}

TEST(PValues, TwoSidedNormal) {
  EXPECT_LT(two_sided_p(10.79), 0.001);
  EXPECT_NEAR(two_sided_p(1.91), 0.056, 0.001);
  EXPECT_NEAR(two_sided_p(-1.91), two_sided_p(1.91), 1e-16);
  EXPECT_DOUBLE_EQ(two_sided_p(0.0), 1.0);
  EXPECT_NEAR(chi_square_sf(3.841458820694124, 1), 0.05, 1e-12);
  EXPECT_NEAR(chi_square_sf(7.814727903251178, 3), 0.05, 1e-12);
  EXPECT_EQ(chi_square_sf(0.0, 3), 1.0);
}

TEST(Fit, OneEquationRecovery) {
  const auto spec = one_eq();
  const auto truth = one_eq_truth();
  const auto t = sample_dataset(spec, truth, 5000, normal_x(), 11);
  const auto r = fit(spec, t);
  ASSERT_TRUE(r.converged) << r.message;
  ASSERT_EQ(r.estimates.size(), 3u);
  const std::vector<double> want{1.0, -0.5, 0.5};
  for (std::size_t i = 0; i < 3; ++i) {
    ASSERT_TRUE(r.std_errors[i].has_value());
    EXPECT_LT(std::abs(r.estimates[i] - want[i]), 2.0 * *r.std_errors[i]) << r.names[i];
    EXPECT_NEAR(*r.z_values[i], r.estimates[i] / *r.std_errors[i], 1e-12);
  }
  EXPECT_FALSE(r.singular_information);
  EXPECT_EQ(r.k, 3);
  EXPECT_EQ(r.n, 5000u);
  EXPECT_GT(r.rho2, 0.0);
  EXPECT_NEAR(r.aic, 2.0 * 3 - 2.0 * r.ll, 1e-9);
}

TEST(Fit, StandardErrorsMatchExpectedInformation) {
  // For a binary probit with no thresholds to share, the asymptotic SE of
  // beta is the square root of the inverse Fisher information, which is
  // computable by quadrature over x.
  const ModelSpec spec{{{"y", 2, {"x"}, "y"}}};
  ParameterSet truth;
  truth.beta = {{0.8}};
  truth.thresholds = {{0.0}};
  const std::size_t n = 20000;
  const auto t = sample_dataset(spec, truth, n, normal_x(), 5);
  const auto r = fit(spec, t);
  ASSERT_TRUE(r.converged);
  // Fisher information for (beta, mu) per observation, integrated over x ~ N(0,1).
  double i_bb = 0, i_bm = 0, i_mm = 0;
  const int grid = 4001;
  for (int k = 0; k < grid; ++k) {
    const double x = -8.0 + 16.0 * k / (grid - 1);
    const double w = 16.0 / (grid - 1) * std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    const double s = 0.8 * x;
    const double phi = std::exp(-0.5 * s * s) / std::sqrt(2.0 * std::numbers::pi);
    const double cdf = oracle::phi_cdf(s);
    const double info = phi * phi / (cdf * (1.0 - cdf));
    i_bb += w * info * x * x;
    i_bm += -w * info * x;
    i_mm += w * info;
  }
  const double det = i_bb * i_mm - i_bm * i_bm;
  const double se_beta = std::sqrt(i_mm / det / static_cast<double>(n));
  EXPECT_NEAR(*r.std_errors[0], se_beta, 0.05 * se_beta);
}

TEST(Fit, IndependenceTruthGivesSmallCorrelations) {
  const ModelSpec spec{{{"walk", 3, {"x1", "x2"}, "walk"}, {"cycle", 3, {"x1", "x3"}, "cycle"},
                        {"share", 4, {"x2", "x3"}, "share"}}};
  ParameterSet p;
  p.beta = {{0.5, -0.3}, {0.2, 0.6}, {-0.4, 0.3}};
  p.thresholds = {{-0.5, 0.6}, {-0.2, 0.9}, {-0.7, 0.1, 1.0}};
  const CovariateGenerator gen{{{"x1", CovariateDistribution::standard_normal()},
                                {"x2", CovariateDistribution::uniform(-1.0, 2.0)},
                                {"x3", CovariateDistribution::bernoulli(0.4)}}};
  const auto t = sample_dataset(spec, p, 5000, gen, 21);
  const auto r = fit(spec, t, no_se());
  ASSERT_TRUE(r.converged) << r.message;
  EXPECT_LE(std::abs(r.params.corr.r12), 0.05);
  EXPECT_LE(std::abs(r.params.corr.r13), 0.05);
  EXPECT_LE(std::abs(r.params.corr.r23), 0.05);
}

TEST(Fit, TraceIsNonDecreasing) {
  const auto spec = two_eq();
  const auto t = sample_dataset(spec, two_eq_truth(0.5), 1500, xz(), 4);
  const auto r = fit(spec, t, no_se());
  ASSERT_GE(r.trace.size(), 2u);
  for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_GE(r.trace[i], r.trace[i - 1]);
  EXPECT_EQ(r.trace.back(), r.ll);
  EXPECT_NEAR(r.ll, loglik(r.params, t, spec), 1e-9 * std::abs(r.ll));
}

TEST(Fit, JointNestsIndependent) {
  const auto spec = two_eq();
  const auto t = sample_dataset(spec, two_eq_truth(0.4), 1500, xz(), 8);
  const auto joint = fit(spec, t, no_se());
  FitOptions o = no_se();
  o.independent = true;
  const auto indep = fit(spec, t, o);
  EXPECT_TRUE(indep.params.corr.is_identity());
  EXPECT_EQ(indep.k + 1, joint.k);
  EXPECT_GE(joint.ll, indep.ll);
  // Independent fit equals separate univariate fits.
  const ModelSpec a{{spec.equations[0]}}, b{{spec.equations[1]}};
  const double sep = fit(a, t, no_se()).ll + fit(b, t, no_se()).ll;
  EXPECT_NEAR(indep.ll, sep, 1e-6);
  const auto lr = lr_test_independence(joint, indep);
  EXPECT_EQ(lr.df, 1);
  EXPECT_NEAR(lr.stat, 2.0 * (joint.ll - indep.ll), 1e-12);
  EXPECT_LT(lr.p, 1e-6);
}

TEST(Fit, CovariateRescaleInvariance) {
  const auto spec = two_eq();
  const auto t = sample_dataset(spec, two_eq_truth(0.3), 1000, xz(), 15);
  ObservationTable scaled;
  for (const auto& name : t.names()) {
    auto col = t.column(name);
    if (name == "x") {
      for (auto& v : col) v *= 10.0;
    }
    scaled.add_column(name, col);
  }
  const auto a = fit(spec, t, no_se());
  const auto b = fit(spec, scaled, no_se());
  EXPECT_NEAR(a.ll, b.ll, 1e-5);
  EXPECT_NEAR(a.params.beta[0][0], 10.0 * b.params.beta[0][0], 1e-3);
  EXPECT_NEAR(a.params.beta[1][0], 10.0 * b.params.beta[1][0], 1e-3);
  EXPECT_NEAR(a.params.beta[0][1], b.params.beta[0][1], 1e-3);
  EXPECT_NEAR(a.params.corr.r12, b.params.corr.r12, 1e-3);
}

TEST(Fit, Errors) {
  const auto spec = one_eq();
  ObservationTable constant_y;
  constant_y.add_column("x", {0.1, 0.2, 0.3, 0.4});
  constant_y.add_column("y", {1, 1, 1, 1});
  EXPECT_THROW(fit(spec, constant_y), DegenerateOutcome);

  ObservationTable constant_x;
  constant_x.add_column("x", {0.5, 0.5, 0.5, 0.5});
  constant_x.add_column("y", {0, 1, 2, 1});
  EXPECT_THROW(fit(spec, constant_x), InvalidParameter);

  const auto t = sample_dataset(spec, one_eq_truth(), 200, normal_x(), 1);
  FitOptions o;
  o.start = std::vector<double>{0.0, 0.0};
  EXPECT_THROW(fit(spec, t, o), ShapeError);
  o.start = std::vector<double>{std::numeric_limits<double>::quiet_NaN(), 0.0, 0.0};
  EXPECT_THROW(fit(spec, t, o), BadStart);
  o.start.reset();
  o.max_iterations = -1;
  EXPECT_THROW(fit(spec, t, o), InvalidParameter);
}

TEST(Fit, IterationCapReportsNonConvergence) {
  const auto spec = two_eq();
  const auto t = sample_dataset(spec, two_eq_truth(0.4), 500, xz(), 2);
  FitOptions o = no_se();
  o.max_iterations = 1;
  const auto r = fit(spec, t, o);
  EXPECT_FALSE(r.converged);
  EXPECT_LE(r.iterations, 1);
  EXPECT_FALSE(r.message.empty());
}

TEST(LrTest, Edges) {
  const auto spec = two_eq();
  const auto t = sample_dataset(spec, two_eq_truth(0.0), 600, xz(), 6);
  const auto joint = fit(spec, t, no_se());
  FitOptions o = no_se();
  o.independent = true;
  auto indep = fit(spec, t, o);
  EXPECT_THROW(lr_test_independence(indep, joint), InvalidParameter);
  EXPECT_THROW(lr_test_independence(joint, joint), InvalidParameter);
  // Zero statistic gives p = 1.
  auto same = joint;
  same.independent = true;
  same.k = joint.k - 1;
  const auto lr = lr_test_independence(joint, same);
  EXPECT_EQ(lr.stat, 0.0);
  EXPECT_EQ(lr.p, 1.0);
  auto other = indep;
  other.n += 1;
  EXPECT_THROW(lr_test_independence(joint, other), InvalidParameter);
}

TEST(Fit, ConfidenceIntervalCoverage) {
  // 100 replications of a cheap one-equation model; nominal coverage of
  // estimate +/- 1.96 SE is 95%, so 89-99 hits is a wide acceptance band.
  const auto spec = one_eq();
  const auto truth = one_eq_truth();
  const std::vector<double> want{1.0, -0.5, 0.5};
  int hits_beta = 0, hits_mu = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto t = sample_dataset(spec, truth, 400, normal_x(), 1000 + seed);
    const auto r = fit(spec, t);
    ASSERT_TRUE(r.converged);
    hits_beta += std::abs(r.estimates[0] - want[0]) < 1.96 * *r.std_errors[0];
    hits_mu += std::abs(r.estimates[2] - want[2]) < 1.96 * *r.std_errors[2];
  }
  EXPECT_GE(hits_beta, 89);
  EXPECT_LE(hits_beta, 99);
  EXPECT_GE(hits_mu, 89);
  EXPECT_LE(hits_mu, 99);
}
