#include <gtest/gtest.h>

#include "frlab/errors.hpp"
#include "helpers.hpp"

using namespace frlab;
using frlab::testing::random_model;

TEST(NoiseLaws, UnitMomentsAndNames) {
  const int n = 200000;
  for (NoiseLaw law : {NoiseLaw::Gaussian, NoiseLaw::Rademacher, NoiseLaw::UniformScaled}) {
    Stream s(SeedSpec{5, 0, 0}, StreamRole::Probe);
    double sum = 0.0, sum2 = 0.0, sum4 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = s.draw(law);
      sum += x;
      sum2 += x * x;
      sum4 += x * x * x * x;
    }
    const double mean = sum / n, var = sum2 / n;
    EXPECT_LE(std::abs(mean), 5.0 / std::sqrt(n)) << to_string(law);
    const double se_var = std::sqrt((sum4 / n - 1.0) / n);
    EXPECT_LE(std::abs(var - 1.0), 5.0 * se_var + 1e-12) << to_string(law);
    EXPECT_EQ(parse_noise_law(to_string(law)), law);
  }
  EXPECT_FALSE(parse_noise_law("cauchy").has_value());
}

TEST(SampleDataset, AlgebraicIdentities) {
  const FactorModel m = random_model(7, 2, NoiseCov::isotropic(0.5), 31);
  const Dataset d = sample_dataset(m, 20, NoiseLaw::Rademacher, SeedSpec{9, 1, 2}, true);
  ASSERT_TRUE(d.e.has_value());
  const Vector y = d.z * m.beta() + d.eps;
  const Matrix x = d.z * m.loading().transpose() + *d.e;
  EXPECT_EQ(d.y, y);
  EXPECT_EQ(d.x, x);
}

TEST(SampleDataset, DegenerateCases) {
  Matrix a(3, 1);
  a << 1, 2, 3;
  const FactorModel silent(a, Matrix::Identity(1, 1), NoiseCov::isotropic(1.0), Vector::Zero(1), 0.0);
  EXPECT_EQ(sample_dataset(silent, 10, NoiseLaw::Gaussian, SeedSpec{1, 0, 0}).y.norm(), 0.0);

  const FactorModel noiseless = random_model(12, 3, NoiseCov::zero(), 32);
  EXPECT_LE(numerical_rank(sample_dataset(noiseless, 30, NoiseLaw::Gaussian, SeedSpec{1, 0, 0}).x), 3);

  EXPECT_THROW(sample_dataset(noiseless, 0, NoiseLaw::Gaussian, SeedSpec{1, 0, 0}), ContractViolation);
}

TEST(SampleDataset, SampleCovarianceMatchesPopulation) {
  const FactorModel m = random_model(3, 1, NoiseCov::diagonal(Vector::LinSpaced(3, 0.5, 1.0)), 33);
  const Eigen::Index n = 100000;
  const Dataset d = sample_dataset(m, n, NoiseLaw::Gaussian, SeedSpec{4, 0, 0});
  const Matrix emp = d.x.transpose() * d.x / static_cast<double>(n);
  const Matrix pop = sigma_x_dense(m);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double se = std::sqrt((pop(i, i) * pop(j, j) + pop(i, j) * pop(i, j)) / static_cast<double>(n));
      EXPECT_LE(std::abs(emp(i, j) - pop(i, j)), 5.0 * se);
    }
  }
}

TEST(SampleDataset, DeterministicAndIndependentAcrossReplicates) {
  const FactorModel m = random_model(6, 2, NoiseCov::isotropic(1.0), 34);
  const Dataset a = sample_dataset(m, 2000, NoiseLaw::Gaussian, SeedSpec{7, 3, 0});
  const Dataset again = sample_dataset(m, 2000, NoiseLaw::Gaussian, SeedSpec{7, 3, 0});
  EXPECT_EQ(a.x, again.x);
  EXPECT_EQ(a.y, again.y);
  const Dataset b = sample_dataset(m, 2000, NoiseLaw::Gaussian, SeedSpec{7, 3, 1});
  const Eigen::ArrayXd u = Eigen::Map<const Eigen::ArrayXd>(a.x.data(), a.x.size());
  const Eigen::ArrayXd v = Eigen::Map<const Eigen::ArrayXd>(b.x.data(), b.x.size());
  const double n = static_cast<double>(u.size());
  const double corr = ((u - u.mean()) * (v - v.mean())).sum() /
                      std::sqrt((u - u.mean()).square().sum() * (v - v.mean()).square().sum());
  EXPECT_LE(std::abs(corr), 5.0 / std::sqrt(n));
}

TEST(SeedSpec, RolesAndIndicesGiveDistinctStreams) {
  const SeedSpec s{1, 2, 3};
  EXPECT_NE(s.stream_seed(StreamRole::Factors), s.stream_seed(StreamRole::FeatureNoise));
  EXPECT_NE(s.stream_seed(StreamRole::Factors), (SeedSpec{1, 3, 2}.stream_seed(StreamRole::Factors)));
  EXPECT_NE(s.stream_seed(StreamRole::Factors), (SeedSpec{2, 2, 3}.stream_seed(StreamRole::Factors)));
  EXPECT_EQ(s.stream_seed(StreamRole::Loading), (SeedSpec{1, 2, 3}.stream_seed(StreamRole::Loading)));
}

TEST(Loadings, ScaledOrthogonal) {
  Stream s(35);
  const Matrix a = loading_scaled_orthogonal(50, 6, s);
  EXPECT_LE((a.transpose() * a - 50.0 * Matrix::Identity(6, 6)).norm(), 1e-8);
  Stream t(36);
  const Matrix full = loading_scaled_orthogonal(5, 5, t);
  EXPECT_NEAR(operator_norm(full) * operator_norm(full), 5.0, 1e-10);
  Stream s2(35);
  EXPECT_EQ(loading_scaled_orthogonal(50, 6, s2), a);
}

TEST(Loadings, GaussianVarianceReading) {
  Stream s(37);
  const Eigen::Index p = 25000, k = 4;
  const Matrix a = loading_gaussian(p, k, s);
  const double var = a.array().square().mean();
  EXPECT_NEAR(var, 1.0 / std::sqrt(4.0), 0.05 / std::sqrt(4.0));
  Stream s2(37);
  EXPECT_EQ(loading_gaussian(p, k, s2), a);
  Stream s3(38);
  const Matrix sd = loading_gaussian(p, k, s3, GaussianLoadingScale::StdDev);
  EXPECT_NEAR(sd.array().square().mean(), 1.0 / 4.0, 0.05 / 4.0);
}

TEST(Loadings, GaussianSmallestEigenvalueGrowsWithP) {
  // lambda_K(A'A) >= c p / sqrt(K) with c = 0.5, fixed once for p >= 50 K.
  for (int seed = 0; seed < 20; ++seed) {
    Stream s(SeedSpec{39, 0, static_cast<std::uint64_t>(seed)}, StreamRole::Loading);
    const Eigen::Index k = 5, p = 50 * k;
    const Matrix a = loading_gaussian(p, k, s);
    const double lam = symmetric_eigen(a.transpose() * a).eigenvalues(k - 1);
    EXPECT_GE(lam, 0.5 * static_cast<double>(p) / std::sqrt(static_cast<double>(k)));
  }
}

TEST(Loadings, CanonicalSparse) {
  const Matrix a = loading_canonical_sparse(4, 2);
  Matrix expected = Matrix::Zero(4, 2);
  expected(0, 0) = 2.0;
  expected(1, 1) = 2.0;
  EXPECT_EQ(a, expected);
  const Matrix b = loading_canonical_sparse(9, 3);
  EXPECT_EQ(b.transpose() * b, Matrix(9.0 * Matrix::Identity(3, 3)));
  EXPECT_DOUBLE_EQ(loading_canonical_sparse(9, 3, 0.8).col(0).norm(), 0.8);
}

TEST(Loadings, ClusterAssignment) {
  const Matrix a = loading_cluster_assignment(10, 2, {3, 5});
  EXPECT_NEAR(symmetric_eigen(a.transpose() * a).eigenvalues(1), 3.0, 1e-14);
  EXPECT_EQ(a.bottomRows(2).norm(), 0.0);
  const Matrix one = loading_cluster_assignment(7, 1, {7});
  EXPECT_DOUBLE_EQ((one.transpose() * one)(0, 0), 7.0);
  EXPECT_THROW(loading_cluster_assignment(5, 2, {3, 3}), ContractViolation);
}

TEST(Concentration, WideIdentityStaysInBand) {
  const Eigen::Index n = 50, r = 100 * n;
  const Matrix identity = Matrix::Identity(r, r);
  for (int seed = 0; seed < 20; ++seed) {
    Stream s(SeedSpec{40, 0, static_cast<std::uint64_t>(seed)}, StreamRole::Probe);
    const ConcentrationProbe c = concentration_probe(n, identity, NoiseLaw::Gaussian, s);
    EXPECT_GE(c.lambda_min, static_cast<double>(r) / 2.0 - kConcentrationConstant * static_cast<double>(n));
    EXPECT_TRUE(c.within_band);
  }
}

TEST(Concentration, CalibrationCaseStaysInBand) {
  // Square case r = n is where the band is tightest; the constant was fitted here.
  for (NoiseLaw law : {NoiseLaw::Gaussian, NoiseLaw::Rademacher}) {
    for (int seed = 0; seed < 20; ++seed) {
      Stream s(SeedSpec{41, 0, static_cast<std::uint64_t>(seed)}, StreamRole::Probe);
      EXPECT_TRUE(concentration_probe(60, Matrix::Identity(60, 60), law, s).within_band);
    }
  }
}

TEST(Concentration, DegenerateCases) {
  Stream s(42);
  const ConcentrationProbe zero = concentration_probe(5, Matrix::Zero(10, 10), NoiseLaw::Gaussian, s);
  EXPECT_EQ(zero.lambda_min, 0.0);
  EXPECT_EQ(zero.lambda_max, 0.0);

  const Matrix sigma = Vector::LinSpaced(8, 1.0, 2.0).asDiagonal();
  double sum = 0.0;
  const int reps = 20000;
  for (int i = 0; i < reps; ++i) sum += concentration_probe(1, sigma, NoiseLaw::Gaussian, s).lambda_max;
  // Var(w' S w) = 2 tr(S^2) for Gaussian w.
  const double se = std::sqrt(2.0 * sigma.squaredNorm() / reps);
  EXPECT_NEAR(sum / reps, sigma.trace(), 5.0 * se);
}
