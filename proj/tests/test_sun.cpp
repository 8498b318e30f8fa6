#include <gtest/gtest.h>

#include "mirt/sun.hpp"

namespace mirt {
namespace {

TEST(CdfDifference, PointValues) {
  EXPECT_NEAR(cdf_difference(-1.0, 1.0), 0.6826894921370859, 1e-9);
  EXPECT_DOUBLE_EQ(cdf_difference(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(cdf_difference(-kPosInf, 0.0), 0.5);
  EXPECT_THROW(cdf_difference(1.0, 0.0), ConfigError);
}

TEST(CdfDifference, TwoPathAgreement) {
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    for (int j = i; j < 10; ++j) {
      const double a = -4.0 + 0.8 * i;
      const double b = -4.0 + 0.8 * j;
      worst = std::max(worst, std::abs(cdf_difference(a, b) - cdf_difference_bvn(a, b)));
    }
  }
  EXPECT_LT(worst, 1e-8);
}

TEST(BinarySunParams, FlatLikelihoodKeepsPrior) {
  const Matrix loading = Matrix::Zero(3, 2);
  const Vector intercept = Vector::Zero(3);
  const Vector y = (Vector(3) << 1, 0, 1).finished();
  const SunParams p =
      binary_sun_params(loading, intercept, y, Vector::Zero(2), Matrix::Identity(2, 2));
  EXPECT_EQ(p.delta.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(p.gamma_vec.cwiseAbs().maxCoeff(), 0.0);
  Rng rng(1);
  const Matrix draws = sample_sun(p, 50000, rng);
  EXPECT_NEAR(draws.col(0).mean(), 0.0, 0.02);
  EXPECT_NEAR(draws.col(1).mean(), 0.0, 0.02);
  EXPECT_NEAR((draws.col(0).array().square()).mean(), 1.0, 0.03);
}

TEST(BinarySunParams, SignFlipSymmetry) {
  Matrix loading(2, 2);
  loading << 0.7, -0.3, 0.1, 1.2;
  Vector intercept = (Vector(2) << 0.4, -0.2).finished();
  Vector y = (Vector(2) << 1, 0).finished();
  const SunParams a =
      binary_sun_params(loading, intercept, y, Vector::Zero(2), Matrix::Identity(2, 2));
  const SunParams b = binary_sun_params(-loading, -intercept,
                                        (Vector(2) << 0, 1).finished(), Vector::Zero(2),
                                        Matrix::Identity(2, 2));
  EXPECT_EQ((a.delta - b.delta).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((a.gamma_vec - b.gamma_vec).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((a.gamma_mat - b.gamma_mat).cwiseAbs().maxCoeff(), 0.0);
}

TEST(BinarySunParams, ScalarInstanceClosedForm) {
  Matrix loading(1, 1);
  loading << 1.0;
  const Vector intercept = Vector::Zero(1);
  const Vector y = Vector::Ones(1);
  const SunParams p =
      binary_sun_params(loading, intercept, y, Vector::Zero(1), Matrix::Identity(1, 1));
  EXPECT_NEAR(p.gamma_vec(0), 0.0, 1e-15);
  EXPECT_NEAR(p.delta(0, 0), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(p.gamma_mat(0, 0), 1.0, 1e-15);
}

// E[theta | y=1] for the scalar instance: E[t Phi(t)] / E[Phi(t)] by quadrature.
double scalar_posterior_mean_oracle() {
  const int n = 4001;
  const double h = 24.0 / (n - 1);
  double num = 0.0, den = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = -12.0 + i * h;
    const double w = normal_pdf(t) * normal_cdf(t);
    num += t * w * h;
    den += w * h;
  }
  return num / den;
}

TEST(SampleSun, ScalarInstanceMatchesQuadrature) {
  Matrix loading(1, 1);
  loading << 1.0;
  const SunParams p = binary_sun_params(loading, Vector::Zero(1), Vector::Ones(1),
                                        Vector::Zero(1), Matrix::Identity(1, 1));
  Rng rng(2);
  const int m = 100000;
  const Matrix draws = sample_sun(p, m, rng);
  const double oracle = scalar_posterior_mean_oracle();
  EXPECT_NEAR(oracle, 0.5642, 5e-4);
  const double mean = draws.col(0).mean();
  const double sd = std::sqrt((draws.col(0).array() - mean).square().mean() / m);
  EXPECT_NEAR(mean, oracle, 4.0 * sd);
}

struct OracleMoments {
  Vector mean;
  Matrix cov;
  Vector se_mean;
  long n_accepted = 0;
};

// Rejection sampling from the prior, accepting with the probit likelihood.
OracleMoments rejection_oracle(const Matrix& loading, const Vector& intercept, const Vector& y,
                               long tries, Rng& rng) {
  const int k = static_cast<int>(loading.cols());
  const int j = static_cast<int>(loading.rows());
  Matrix sum2 = Matrix::Zero(k, k);
  Vector sum = Vector::Zero(k);
  long kept = 0;
  std::vector<Vector> samples;
  for (long t = 0; t < tries; ++t) {
    Vector theta(k);
    for (int d = 0; d < k; ++d) theta(d) = rng.normal();
    double prob = 1.0;
    for (int r = 0; r < j; ++r) {
      const double s = 2.0 * y(r) - 1.0;
      prob *= normal_cdf(s * (loading.row(r).dot(theta) + intercept(r)));
    }
    if (rng.uniform() < prob) {
      sum += theta;
      sum2 += theta * theta.transpose();
      ++kept;
      if (samples.size() < 200000) samples.push_back(theta);
    }
  }
  OracleMoments out;
  out.mean = sum / kept;
  out.cov = sum2 / kept - out.mean * out.mean.transpose();
  out.se_mean = (out.cov.diagonal() / kept).cwiseSqrt();
  out.n_accepted = kept;
  return out;
}

TEST(SampleSun, MatchesRejectionOracle) {
  Rng instance_rng(99);
  for (int trial = 0; trial < 4; ++trial) {
    const int k = 1 + trial % 2;
    const int j = 2 + trial % 2;
    Matrix loading(j, k);
    Vector intercept(j), y(j);
    for (int r = 0; r < j; ++r) {
      intercept(r) = instance_rng.uniform(-0.8, 0.8);
      y(r) = instance_rng.bernoulli(0.5) ? 1.0 : 0.0;
      for (int c = 0; c < k; ++c) loading(r, c) = instance_rng.uniform(-1.2, 1.2);
    }
    const SunParams p = binary_sun_params(loading, intercept, y, Vector::Zero(k),
                                          Matrix::Identity(k, k));
    Rng rng(trial + 1);
    const int m = 100000;
    const Matrix draws = sample_sun(p, m, rng);
    Rng orng(trial + 100);
    const OracleMoments oracle = rejection_oracle(loading, intercept, y, 2000000, orng);
    for (int c = 0; c < k; ++c) {
      const double mean = draws.col(c).mean();
      const double sd = std::sqrt((draws.col(c).array() - mean).square().mean() / m);
      const double tol = 4.0 * std::sqrt(sd * sd + oracle.se_mean(c) * oracle.se_mean(c));
      EXPECT_NEAR(mean, oracle.mean(c), tol) << "trial " << trial << " coord " << c;
    }
  }
}

TEST(MixedSunParams, AllBinaryReducesExactly) {
  Matrix loading(3, 2);
  loading << 0.5, -0.2, 1.0, 0.3, -0.7, 0.8;
  ModelParams params;
  params.loading = loading;
  params.intercepts = {Vector::Constant(1, 0.2), Vector::Constant(1, -0.4),
                       Vector::Constant(1, 0.9)};
  params.ibp_weights = Vector::Constant(2, 0.5);
  params.resid_var = Vector::Ones(3);
  std::vector<ItemSpec> items = {{"a", ItemKind::binary()},
                                 {"b", ItemKind::binary()},
                                 {"c", ItemKind::binary()}};
  const Vector y = (Vector(3) << 1, 0, 1).finished();
  Vector d(3);
  for (int r = 0; r < 3; ++r) d(r) = params.intercept(r);

  const SunParams mixed =
      mixed_sun_params(params, items, y, Vector::Zero(2), Matrix::Identity(2, 2));
  const SunParams direct =
      binary_sun_params(loading, d, y, Vector::Zero(2), Matrix::Identity(2, 2));
  EXPECT_EQ((mixed.delta - direct.delta).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((mixed.gamma_vec - direct.gamma_vec).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((mixed.gamma_mat - direct.gamma_mat).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((mixed.xi - direct.xi).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((mixed.omega_mat - direct.omega_mat).cwiseAbs().maxCoeff(), 0.0);
}

TEST(MixedSunParams, AllContinuousIsConjugateGaussian) {
  ModelParams params;
  params.loading.resize(2, 2);
  params.loading << 1.0, 0.0, 0.5, 0.5;
  params.intercepts = {Vector::Zero(1), Vector::Zero(1)};
  params.ibp_weights = Vector::Constant(2, 0.5);
  params.resid_var = (Vector(2) << 0.5, 2.0).finished();
  std::vector<ItemSpec> items = {{"a", ItemKind::continuous()}, {"b", ItemKind::continuous()}};
  const Vector y = (Vector(2) << 0.7, -0.4).finished();

  const SunParams p = mixed_sun_params(params, items, y, Vector::Zero(2), Matrix::Identity(2, 2));
  EXPECT_EQ(p.j_bar(), 0);

  Matrix prec = Matrix::Identity(2, 2);
  Vector shift = Vector::Zero(2);
  for (int r = 0; r < 2; ++r) {
    prec += params.loading.row(r).transpose() * params.loading.row(r) / params.resid_var(r);
    shift += params.loading.row(r).transpose() * y(r) / params.resid_var(r);
  }
  const Matrix cov = prec.inverse();
  EXPECT_NEAR((p.omega_mat - cov).cwiseAbs().maxCoeff(), 0.0, 1e-12);
  EXPECT_NEAR((p.xi - cov * shift).cwiseAbs().maxCoeff(), 0.0, 1e-12);

  Rng rng(3);
  const Matrix draws = sample_sun(p, 50000, rng);
  EXPECT_NEAR(draws.col(0).mean(), p.xi(0), 0.02);
  EXPECT_NEAR(draws.col(1).mean(), p.xi(1), 0.02);
}

TEST(MixedSunParams, InteriorOrdinalDensityIdentity) {
  ModelParams params;
  params.loading.resize(1, 1);
  params.loading << 0.9;
  params.intercepts = {(Vector(2) << -0.4, 0.8).finished()};
  params.ibp_weights = Vector::Constant(1, 0.5);
  params.resid_var = Vector::Ones(1);
  std::vector<ItemSpec> items = {{"o", ItemKind::ordinal(3)}};
  const Vector y = Vector::Constant(1, 1.0);  // interior level

  const SunParams p = mixed_sun_params(params, items, y, Vector::Zero(1), Matrix::Identity(1, 1));
  ASSERT_EQ(p.j_bar(), 2);
  ASSERT_EQ(p.blocks.pair_first.size(), 1u);
  EXPECT_NEAR(p.gamma_mat(0, 1), -1.0, 1e-12);

  for (double t = -3.0; t <= 3.0; t += 0.21) {
    Vector theta = Vector::Constant(1, t);
    const double lhs = std::exp(sun_log_density_unnormalized(p, theta));
    const double eta = 0.9 * t;
    const double rhs = normal_pdf(t) * (normal_cdf(eta + 0.8) - normal_cdf(eta - 0.4));
    EXPECT_NEAR(lhs, rhs, 1e-8) << t;
  }
}

TEST(MixedSunParams, BoundaryCellsUseSignTrick) {
  ModelParams params;
  params.loading.resize(1, 1);
  params.loading << 0.6;
  params.intercepts = {(Vector(2) << -0.5, 0.5).finished()};
  params.ibp_weights = Vector::Constant(1, 0.5);
  params.resid_var = Vector::Ones(1);
  std::vector<ItemSpec> items = {{"o", ItemKind::ordinal(3)}};

  const SunParams low = mixed_sun_params(params, items, Vector::Zero(1), Vector::Zero(1),
                                         Matrix::Identity(1, 1));
  ASSERT_EQ(low.j_bar(), 1);
  EXPECT_DOUBLE_EQ(low.blocks.d_bar(0, 0), 0.6);
  EXPECT_DOUBLE_EQ(low.blocks.v_bar(0), -0.5);

  const SunParams high = mixed_sun_params(params, items, Vector::Constant(1, 2.0),
                                          Vector::Zero(1), Matrix::Identity(1, 1));
  ASSERT_EQ(high.j_bar(), 1);
  EXPECT_DOUBLE_EQ(high.blocks.d_bar(0, 0), -0.6);
  EXPECT_DOUBLE_EQ(high.blocks.v_bar(0), -0.5);
}

TEST(MixedSunParams, RejectsBadInputs) {
  ModelParams params;
  params.loading = Matrix::Zero(1, 1);
  params.intercepts = {Vector::Zero(1)};
  params.ibp_weights = Vector::Constant(1, 0.5);
  params.resid_var = Vector::Constant(1, -1.0);
  std::vector<ItemSpec> items = {{"c", ItemKind::continuous()}};
  EXPECT_THROW(mixed_sun_params(params, items, Vector::Zero(1), Vector::Zero(1),
                                Matrix::Identity(1, 1)),
               ConfigError);
  items = {{"b", ItemKind::binary()}};
  params.resid_var = Vector::Ones(1);
  EXPECT_THROW(mixed_sun_params(params, items, Vector::Constant(1, 2.0), Vector::Zero(1),
                                Matrix::Identity(1, 1)),
               DataError);
}

TEST(SunParams, InvariantsHoldOnRandomInstances) {
  Rng rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 1 + trial % 3;
    const int j = 1 + trial % 4;
    Matrix loading(j, k);
    Vector intercept(j), y(j);
    for (int r = 0; r < j; ++r) {
      intercept(r) = rng.uniform(-1, 1);
      y(r) = rng.bernoulli(0.5) ? 1.0 : 0.0;
      for (int c = 0; c < k; ++c) loading(r, c) = rng.uniform(-1.5, 1.5);
    }
    const SunParams p = binary_sun_params(loading, intercept, y, Vector::Zero(k),
                                          Matrix::Identity(k, k));
    for (int r = 0; r < j; ++r) EXPECT_NEAR(p.gamma_mat(r, r), 1.0, 1e-10);
    // stacked correlation-style matrix [[Gamma, Delta'],[Delta, Omegabar]] is PSD
    Matrix stacked(j + k, j + k);
    const Vector omega_sqrt = p.omega_mat.diagonal().cwiseSqrt();
    Matrix omega_bar(k, k);
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) omega_bar(a, b) = p.omega_mat(a, b) / (omega_sqrt(a) * omega_sqrt(b));
    stacked.topLeftCorner(j, j) = p.gamma_mat;
    stacked.topRightCorner(j, k) = p.delta.transpose();
    stacked.bottomLeftCorner(k, j) = p.delta;
    stacked.bottomRightCorner(k, k) = omega_bar;
    const Eigen::SelfAdjointEigenSolver<Matrix> es(stacked);
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-8);
  }
}

TEST(ScoreFactors, PriorRecoveryAndDeterminism) {
  ModelParams params;
  params.loading = Matrix::Zero(4, 2);
  params.intercepts = {Vector::Zero(1), Vector::Zero(1), Vector::Zero(1), Vector::Zero(1)};
  params.ibp_weights = Vector::Constant(2, 0.5);
  params.resid_var = Vector::Ones(4);
  std::vector<ItemSpec> items(4, {"b", ItemKind::binary()});
  const Vector y = (Vector(4) << 1, 0, 1, 0).finished();

  Rng rng(9);
  const auto [mean, sd] = score_factors(params, items, y, 20000, rng);
  EXPECT_NEAR(mean(0), 0.0, 0.03);
  EXPECT_NEAR(sd(0), 1.0, 0.03);

  Rng r1(10), r2(10);
  const auto a = score_factors(params, items, y, 500, r1);
  const auto b = score_factors(params, items, y, 500, r2);
  EXPECT_EQ((a.first - b.first).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((a.second - b.second).cwiseAbs().maxCoeff(), 0.0);
}

TEST(ScoreFactors, ScalarInstanceOracle) {
  ModelParams params;
  params.loading = Matrix::Constant(1, 1, 1.0);
  params.intercepts = {Vector::Zero(1)};
  params.ibp_weights = Vector::Constant(1, 0.5);
  params.resid_var = Vector::Ones(1);
  std::vector<ItemSpec> items = {{"b", ItemKind::binary()}};
  Rng rng(12);
  const auto [mean, sd] = score_factors(params, items, Vector::Ones(1), 100000, rng);
  const double oracle = scalar_posterior_mean_oracle();
  EXPECT_NEAR(mean(0), oracle, 4.0 * sd(0) / std::sqrt(100000.0));
}

}  // namespace
}  // namespace mirt
