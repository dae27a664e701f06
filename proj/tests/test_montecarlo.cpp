#include <cmath>
#include <random>

#include <boost/math/distributions/normal.hpp>
#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qvar/montecarlo.hpp"

using namespace qvar;

TEST(Factorize, IdentityAndDiagonal) {
  const auto f = factorize(CovMatrix::identity(5));
  EXPECT_LT((f.f * f.f.transpose() - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-14);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
  d(0, 0) = 4.0;
  d(1, 1) = 1.0;
  for (auto method : {FactorMethod::Eigen, FactorMethod::Cholesky}) {
    const auto fd = factorize(CovMatrix(d), 1e-10, method);
    EXPECT_LT((fd.f * fd.f.transpose() - d).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Factorize, FbmReconstruction) {
  const auto g = build_gamma(first_order_power(-0.4), make_uniform(128), KernelSpec::fbm(0.3));
  for (auto method : {FactorMethod::Eigen, FactorMethod::Cholesky}) {
    const auto f = factorize(g, 1e-10, method);
    EXPECT_LT((f.f * f.f.transpose() - g.matrix()).norm(), 1e-8 * g.matrix().norm());
  }
}

TEST(Factorize, SingularPsdIsAccepted) {
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(4, 1.0, 4.0);
  const Eigen::MatrixXd m = v * v.transpose();
  for (auto method : {FactorMethod::Eigen, FactorMethod::Cholesky}) {
    const auto f = factorize(CovMatrix(m), 1e-10, method);
    EXPECT_LT((f.f * f.f.transpose() - m).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Factorize, IndefiniteReportsOffendingEigenvalue) {
  Eigen::MatrixXd m(2, 2);
  m << 1.0, 2.0, 2.0, 1.0;
  try {
    factorize(CovMatrix(m));
    FAIL() << "expected not_psd_error";
  } catch (const not_psd_error& e) {
    EXPECT_NEAR(e.offending_eigenvalue(), -1.0, 1e-14);
  }
  EXPECT_THROW(factorize(CovMatrix(m), 1e-10, FactorMethod::Cholesky), not_psd_error);
}

TEST(Replicates, SameSeedIsBitIdentical) {
  std::mt19937_64 rng(3);
  const CovMatrix g(ref::random_psd(rng, 10));
  McConfig cfg;
  cfg.replicates = 500;
  cfg.seed = 12345;
  const auto a = sample_v_replicates(g, cfg);
  const auto b = sample_v_replicates(g, cfg);
  EXPECT_EQ(a, b);
  cfg.seed = 12346;
  EXPECT_NE(a, sample_v_replicates(g, cfg));
}

TEST(Replicates, IndependentOfWorkerCount) {
  const auto g = build_gamma(first_order_power(0.2), make_uniform(64), KernelSpec::fbm(0.6));
  McConfig cfg;
  cfg.replicates = 1000;  // not a multiple of the block size
  cfg.seed = 99;
  const auto one = sample_v_replicates(g, cfg);
  for (unsigned w : {2u, 3u, 8u}) {
    cfg.workers = w;
    EXPECT_EQ(sample_v_replicates(g, cfg), one) << w << " workers";
  }
}

TEST(Replicates, PrefixStableInReplicateCount) {
  const auto g = CovMatrix::identity(3);
  McConfig cfg;
  cfg.seed = 5;
  cfg.replicates = 100;
  const auto small = sample_v_replicates(g, cfg);
  cfg.replicates = 300;
  const auto big = sample_v_replicates(g, cfg);
  EXPECT_TRUE(std::equal(small.begin(), small.end(), big.begin()));
}

TEST(Replicates, ChiSquareOneMean) {
  McConfig cfg;
  cfg.replicates = 100000;
  cfg.seed = 2024;
  const auto vs = sample_v_replicates(CovMatrix::identity(1), cfg);
  const auto r = empirical_stats(vs, 0.0, 1.0);
  EXPECT_LT(std::abs(r.empirical_mean - 1.0), 3.0 * r.se_mean);
}

TEST(Replicates, ChiSquareEightVariance) {
  McConfig cfg;
  cfg.replicates = 20000;
  cfg.seed = 8;
  const auto vs = sample_v_replicates(CovMatrix::identity(8), cfg);
  const auto r = empirical_stats(vs, 0.0, 1.0);
  EXPECT_LT(std::abs(r.empirical_var - 16.0), 3.0 * r.se_var);
}

TEST(Replicates, VarianceMatchesExactMoments) {
  const auto g = build_gamma(SecondOrderBegyn{}, make_perturbed(48, 1.0, 2.0, 1), KernelSpec::fbm(0.75));
  const auto m = qv_moments(g);
  McConfig cfg;
  cfg.replicates = 20000;
  cfg.seed = 77;
  const auto r = empirical_stats(sample_v_replicates(g, cfg), 0.0, 1.0);
  EXPECT_LT(std::abs(r.empirical_mean - m.mean_vn), 3.0 * r.se_mean);
  EXPECT_LT(std::abs(r.empirical_var - m.var_vn), 3.0 * r.se_var);
  EXPECT_LT(std::abs(r.empirical_fourth_central - m.fourth_central), 3.0 * r.se_fourth);
}

TEST(Ks, QuantileSampleGivesHalfOverN) {
  const boost::math::normal_distribution<double> nd;
  for (std::size_t n : {1u, 10u, 1000u}) {
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = boost::math::quantile(nd, (double(i) + 0.5) / double(n));
    EXPECT_NEAR(ks_distance_normal(z), 0.5 / double(n), 1e-12);
  }
}

TEST(Ks, SinglePointAtZero) { EXPECT_NEAR(ks_distance_normal({0.0}), 0.5, 1e-15); }

TEST(Ks, NormalCdfAccuracy) {
  const boost::math::normal_distribution<double> nd;
  for (double x = -8.0; x <= 8.0; x += 0.125) EXPECT_NEAR(normal_cdf(x), boost::math::cdf(nd, x), 1e-15);
}

TEST(Ks, BrownianCltRegime) {
  const std::size_t n = 256;
  const auto g = build_gamma(FirstOrder{}, make_uniform(n), KernelSpec::brownian());
  const auto m = qv_moments(g);
  McConfig cfg;
  cfg.replicates = 10000;
  cfg.seed = 20240611;
  const auto r = empirical_stats(sample_v_replicates(g, cfg), m.mean_vn, std::sqrt(m.var_vn));
  EXPECT_LT(r.ks_distance, 0.02);
}

TEST(EmpiricalStats, DegenerateScaleIsUsageError) {
  const std::vector<double> v = {1.0, 2.0, 3.0};
  EXPECT_THROW(empirical_stats(v, 0.0, 0.0), usage_error);
  EXPECT_THROW(empirical_stats(v, 0.0, NAN), usage_error);
  EXPECT_THROW(empirical_stats(std::vector<double>{1.0}, 0.0, 1.0), usage_error);
}

TEST(EmpiricalStats, JsonAndCsv) {
  const std::vector<double> v = {1.0, 2.0, 4.0, 8.0};
  const auto j = to_json(empirical_stats(v, 0.0, 1.0));
  for (const char* key : {"replicates", "empirical_mean", "empirical_var", "empirical_fourth_central", "ks_distance", "se_mean", "se_var"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(replicates_csv(v), "replicate,v\n0,1\n1,2\n2,4\n3,8\n");
}

TEST(SamplePaths, CovarianceOfEndpoints) {
  const auto k = KernelSpec::fbm(0.7);
  const auto p = make_uniform(16);
  const std::size_t count = 20000;
  const auto paths = sample_paths(k, p, count, 314);
  EXPECT_EQ(paths.rows(), 17);
  EXPECT_TRUE((paths.row(0).array() == 0.0).all());
  // E X_{1/2} X_1 and E X_1² against the kernel.
  const double c11 = paths.row(16).squaredNorm() / count;
  const double c_half = paths.row(8).dot(paths.row(16)) / count;
  EXPECT_NEAR(c11, covariance(k, 1.0, 1.0), 4.0 * std::sqrt(2.0 / count));
  EXPECT_NEAR(c_half, covariance(k, 0.5, 1.0), 4.0 * std::sqrt(2.0 / count));
}

TEST(SamplePaths, Deterministic) {
  const auto k = KernelSpec::sub_fbm(0.4);
  const auto p = make_perturbed(32, 1.0, 2.0, 6);
  EXPECT_EQ(sample_paths(k, p, 5, 1), sample_paths(k, p, 5, 1));
}
