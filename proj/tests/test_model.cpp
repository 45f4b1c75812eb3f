#include <gtest/gtest.h>

#include "frlab/errors.hpp"
#include "frlab/estimators.hpp"
#include "helpers.hpp"

using namespace frlab;
using frlab::testing::random_model;
using frlab::testing::random_psd;
using frlab::testing::two_feature_model;

TEST(SigmaX, ApplyExamples) {
  const FactorModel m = two_feature_model();
  Vector v(2);
  v << 1.0, 0.0;
  const Vector out = sigma_x_apply(m, v);
  EXPECT_DOUBLE_EQ(out(0), 2.0);
  EXPECT_DOUBLE_EQ(out(1), 1.0);
  EXPECT_DOUBLE_EQ(sigma_x_quadform(m, v), 2.0);

  ModelOptions loose;
  loose.require_full_rank = false;
  const FactorModel null_loading(Matrix::Zero(4, 1), Matrix::Identity(1, 1), NoiseCov::isotropic(1.0), Vector::Ones(1),
                                 1.0, loose);
  const Vector w = Vector::LinSpaced(4, 1.0, 4.0);
  EXPECT_TRUE(sigma_x_apply(null_loading, w).isApprox(w));
}

TEST(SigmaX, MatchesDenseAssemblyForEveryNoiseKind) {
  Stream s(21);
  const Eigen::Index p = 9;
  const std::vector<NoiseCov> kinds = {NoiseCov::zero(), NoiseCov::isotropic(0.3),
                                       NoiseCov::diagonal(Vector::LinSpaced(p, 0.5, 2.0)),
                                       NoiseCov::dense(random_psd(p, s))};
  for (size_t i = 0; i < kinds.size(); ++i) {
    const FactorModel m = random_model(p, 3, kinds[i], 100 + i);
    const Matrix dense = m.loading() * m.factor_cov() * m.loading().transpose() + kinds[i].to_dense(p);
    EXPECT_LE((sigma_x_dense(m) - dense).norm(), 1e-12 * dense.norm());
    const Vector v = s.vector(p, NoiseLaw::Gaussian);
    EXPECT_LE((sigma_x_apply(m, v) - dense * v).norm(), 1e-12 * dense.norm() * v.norm());
    EXPECT_NEAR(sigma_x_quadform(m, v), v.dot(dense * v), 1e-12 * dense.norm() * v.squaredNorm());
  }
}

TEST(BestLinearPredictor, NoiselessIsLoadingPseudoinverse) {
  const FactorModel m = two_feature_model(NoiseCov::zero());
  const Vector a = best_linear_predictor(m);
  EXPECT_NEAR(a(0), 0.5, 1e-14);
  EXPECT_NEAR(a(1), 0.5, 1e-14);
}

TEST(BestLinearPredictor, TwoFeatureClosedForm) {
  const FactorModel m = two_feature_model();
  const Vector a = best_linear_predictor(m);
  EXPECT_NEAR(a(0), 1.0 / 3.0, 1e-14);
  EXPECT_NEAR(a(1), 1.0 / 3.0, 1e-14);
  EXPECT_LE((best_linear_predictor_dense(m) - a).norm(), 1e-12);
}

TEST(BestLinearPredictor, ZeroBeta) {
  Matrix a(2, 1);
  a << 1.0, 1.0;
  const FactorModel m(a, Matrix::Identity(1, 1), NoiseCov::isotropic(1.0), Vector::Zero(1), 1.0);
  EXPECT_EQ(best_linear_predictor(m).norm(), 0.0);
}

TEST(BestLinearPredictor, CanonicalSparseLoadingValue) {
  // Unit factor and noise covariances with A = sqrt(p) [e_1 ... e_K] give
  // alpha*_i = sqrt(p) / (p + 1) on the first K coordinates.
  const Eigen::Index p = 10, k = 3;
  const FactorModel m(loading_canonical_sparse(p, k), Matrix::Identity(k, k), NoiseCov::isotropic(1.0),
                      Vector::Ones(k), 1.0);
  const Vector a = best_linear_predictor(m);
  for (Eigen::Index i = 0; i < p; ++i) {
    EXPECT_NEAR(a(i), i < k ? std::sqrt(10.0) / 11.0 : 0.0, 1e-14);
  }
}

TEST(PopulationSummary, TwoFeatureInstance) {
  const PopulationSummary s = population_summary(two_feature_model());
  EXPECT_NEAR(s.xi, 2.0, 1e-14);
  EXPECT_NEAR(s.alpha_star_sx_norm_sq, 2.0 / 3.0, 1e-14);
  EXPECT_NEAR(s.risk_star - s.oracle_risk, 1.0 / 3.0, 1e-14);
  EXPECT_NEAR(s.null_risk, 2.0, 1e-14);
}

TEST(PopulationSummary, NoiselessBenchmarksCoincide) {
  const PopulationSummary s = population_summary(two_feature_model(NoiseCov::zero()));
  EXPECT_EQ(s.risk_star, s.oracle_risk);
  EXPECT_TRUE(std::isinf(s.xi));
}

TEST(PopulationSummary, SpikedLoading) {
  Matrix a = Matrix::Zero(4, 1);
  a(0, 0) = 2.0;
  const PopulationSummary s =
      population_summary(FactorModel(a, Matrix::Identity(1, 1), NoiseCov::isotropic(1.0), Vector::Ones(1), 1.0));
  EXPECT_NEAR(s.lambda_k_signal, 4.0, 1e-14);
  EXPECT_NEAR(s.xi, 4.0, 1e-14);
}

TEST(PopulationSummary, RejectsRankDeficientLoading) {
  Matrix a(3, 2);
  a << 1, 2, 1, 2, 1, 2;
  EXPECT_THROW(FactorModel(a, Matrix::Identity(2, 2), NoiseCov::isotropic(1.0), Vector::Ones(2), 1.0),
               ModelDegenerate);
}

TEST(PopulationSummary, InvariantsOnRandomModels) {
  Stream s(22);
  for (int t = 0; t < 20; ++t) {
    const Eigen::Index p = 5 + t * 9;
    const Eigen::Index k = 1 + t % 4;
    NoiseCov noise = t % 2 ? NoiseCov::dense(random_psd(p, s)) : NoiseCov::diagonal(Vector::LinSpaced(p, 0.3, 1.5));
    const FactorModel m = random_model(p, k, noise, 200 + t);
    const PopulationSummary sum = population_summary(m);
    EXPECT_LE(sum.oracle_risk, sum.risk_star + 1e-12);
    EXPECT_LE(sum.risk_star, sum.null_risk + 1e-12);
    EXPECT_NEAR(sum.null_risk - sum.risk_star, sum.alpha_star_sx_norm_sq, 1e-8 * sum.null_risk);
    const double gap = sum.risk_star - sum.oracle_risk;
    EXPECT_GE(gap, sum.gap_lower - 1e-8);
    EXPECT_LE(gap, sum.gap_upper + 1e-8);
    EXPECT_LE(sum.gap_upper, sum.beta_sz_norm_sq / sum.xi + 1e-8);
    EXPECT_LE(sum.re_sigma_x, static_cast<double>(k) + sum.re_sigma_e / sum.xi + 1e-9);
    const Vector dense = best_linear_predictor_dense(m);
    EXPECT_LE((best_linear_predictor_woodbury(m) - dense).norm(), 1e-8 * dense.norm());
  }
}

TEST(RiskExact, Examples) {
  const FactorModel m = two_feature_model();
  EXPECT_NEAR(risk_exact(m, Vector::Zero(2)), 2.0, 1e-14);
  EXPECT_NEAR(risk_exact(m, best_linear_predictor(m)), 4.0 / 3.0, 1e-14);
}

TEST(RiskExact, BestPredictorIsMinimizer) {
  Stream s(23);
  for (int t = 0; t < 5; ++t) {
    const FactorModel m = random_model(12, 3, NoiseCov::diagonal(Vector::LinSpaced(12, 0.5, 1.0)), 300 + t);
    const Vector a = best_linear_predictor(m);
    const double r0 = risk_exact(m, a);
    EXPECT_GE(r0, m.sigma_eps() * m.sigma_eps() - 1e-9);
    for (int i = 0; i < 100; ++i) {
      Vector d = s.vector(12, NoiseLaw::Gaussian);
      d *= static_cast<double>(s.next_u64() % 1000) / 1000.0 / d.norm();
      EXPECT_GE(risk_exact(m, a + d), r0 - 1e-9);
    }
  }
}

TEST(RiskExact, NoiselessNormFormulas) {
  for (int t = 0; t < 5; ++t) {
    const FactorModel m = random_model(10, 3, NoiseCov::zero(), 400 + t);
    const PopulationSummary s = population_summary(m);
    const Matrix ata = m.loading().transpose() * m.loading();
    EXPECT_NEAR(s.alpha_star_sx_norm_sq, s.beta_sz_norm_sq, 1e-8 * s.beta_sz_norm_sq);
    EXPECT_NEAR(s.alpha_star_norm_sq, m.beta().dot(ata.ldlt().solve(m.beta())), 1e-8 * s.alpha_star_norm_sq);
  }
}

TEST(RiskExact, AsymptoticEquivalenceBrackets) {
  Stream s(24);
  for (int t = 0; t < 10; ++t) {
    const Eigen::Index p = 40, k = 2;
    const FactorModel m(3.0 * s.matrix(p, k, NoiseLaw::Gaussian), Matrix::Identity(k, k),
                        NoiseCov::diagonal(Vector::LinSpaced(p, 0.5, 1.8)), s.vector(k, NoiseLaw::Gaussian), 1.0);
    const PopulationSummary sum = population_summary(m);
    ASSERT_GT(sum.xi, 2.0);
    ASSERT_LE(*sum.kappa_sigma_e, 4.0);
    const double r1 = sum.alpha_star_sx_norm_sq / sum.beta_sz_norm_sq;
    EXPECT_GE(r1, 1.0 - 1.0 / sum.xi - 1e-12);
    EXPECT_LE(r1, 1.0 + 1e-12);
    const double r2 = sum.alpha_star_norm_sq / *sum.beta_ata_inv;
    const double kappa = *sum.kappa_sigma_e;
    EXPECT_GE(r2, (sum.xi - 1.0) / (sum.xi + 1.0) / kappa - 1e-12);
    EXPECT_LE(r2, kappa + 1e-12);
  }
}

TEST(ExcessDecomposition, ZeroSignalAndNoise) {
  Matrix a(3, 1);
  a << 1, 0, 1;
  const FactorModel m(a, Matrix::Identity(1, 1), NoiseCov::isotropic(1.0), Vector::Zero(1), 0.0);
  const Dataset d = sample_dataset(m, 5, NoiseLaw::Gaussian, SeedSpec{1, 0, 0});
  const ExcessDecomposition e = excess_decomposition(m, d.x, d.z, d.eps);
  for (double v : {e.b1, e.b2, e.v1, e.v2, e.exact_excess}) EXPECT_EQ(v, 0.0);
}

TEST(ExcessDecomposition, NoiselessReplicate) {
  const FactorModel m = random_model(12, 3, NoiseCov::zero(), 501);
  const Dataset d = sample_dataset(m, 30, NoiseLaw::Gaussian, SeedSpec{2, 0, 0});
  const ExcessDecomposition e = excess_decomposition(m, d.x, d.z, d.eps);
  EXPECT_EQ(e.b1, 0.0);
  EXPECT_EQ(e.v1, 0.0);
  const Vector diff = fit_oracle_z(d.z, d.y).beta_hat - m.beta();
  EXPECT_NEAR(e.exact_excess, diff.dot(m.factor_cov() * diff), 1e-8 * std::max(1.0, e.exact_excess));
}

TEST(ExcessDecomposition, MatchesExactRiskAndBoundsIt) {
  for (int t = 0; t < 5; ++t) {
    const FactorModel m = random_model(60, 3, NoiseCov::isotropic(0.8), 600 + t);
    const Dataset d = sample_dataset(m, 25, NoiseLaw::Gaussian, SeedSpec{3, 0, static_cast<std::uint64_t>(t)});
    const ExcessDecomposition e = excess_decomposition(m, d.x, d.z, d.eps);
    const double exact = risk_exact(m, e.coefficients) - m.sigma_eps() * m.sigma_eps();
    EXPECT_NEAR(e.exact_excess, exact, 1e-8 * exact);
    EXPECT_LE(e.exact_excess, 2.0 * (e.b1 + e.b2) + 2.0 * (e.v1 + e.v2) + 1e-9);
  }
}

TEST(Spectrum, IsotropicShift) {
  const FactorModel m = random_model(15, 3, NoiseCov::isotropic(0.7), 701);
  const SpectrumDiagnostics d = spectrum_diagnostics(m);
  EXPECT_TRUE(d.lambda_floor_ok && d.lambda_k_growth && d.tail_bounded);
  const Vector dense = symmetric_eigen(sigma_x_dense(m)).eigenvalues;
  EXPECT_LE((d.eigenvalues - dense).norm(), 1e-10 * dense(0));
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(d.eigenvalues(i), m.signal_eigenvalues()(i) + 0.7, 1e-10 * dense(0));
  for (Eigen::Index i = 3; i < 15; ++i) EXPECT_NEAR(d.eigenvalues(i), 0.7, 1e-12);
}

TEST(Spectrum, ZeroLoadingAndTwoFeature) {
  ModelOptions loose;
  loose.require_full_rank = false;
  const Vector var = Vector::LinSpaced(5, 3.0, 1.0);
  const FactorModel m(Matrix::Zero(5, 1), Matrix::Identity(1, 1), NoiseCov::diagonal(var), Vector::Ones(1), 1.0, loose);
  EXPECT_LE((sigma_x_spectrum(m).eigenvalues - var).norm(), 1e-14);

  const Vector ev = spectrum_diagnostics(two_feature_model()).eigenvalues;
  EXPECT_NEAR(ev(0), 3.0, 1e-14);
  EXPECT_NEAR(ev(1), 1.0, 1e-14);
}

TEST(Spectrum, DiagonalNoiseMatchesDense) {
  Stream s(25);
  const Eigen::Index p = 40;
  Matrix a = Matrix::Zero(p, 2);
  a.topRows(6) = s.matrix(6, 2, NoiseLaw::Gaussian);
  const FactorModel m(a, Matrix::Identity(2, 2), NoiseCov::diagonal(Vector::LinSpaced(p, 0.2, 2.0)), Vector::Ones(2), 1.0);
  const Matrix dense = sigma_x_dense(m);
  const SymmetricEigen e = symmetric_eigen(dense);
  EXPECT_LE((sigma_x_spectrum(m).eigenvalues - e.eigenvalues).norm(), 1e-10 * e.eigenvalues(0));
  EXPECT_NEAR(population_summary(m).sigma_x_opnorm, e.eigenvalues(0), 1e-10 * e.eigenvalues(0));
  const Matrix u = sigma_x_top_eigenvectors(m, 4);
  const Matrix proj = u * u.transpose();
  const Matrix ref = e.eigenvectors.leftCols(4) * e.eigenvectors.leftCols(4).transpose();
  EXPECT_LE((proj - ref).norm(), 1e-8);
}

TEST(Spectrum, DenseCapIsEnforced) {
  Stream s(26);
  const FactorModel m = random_model(30, 2, NoiseCov::dense(random_psd(30, s)), 702);
  EXPECT_THROW(sigma_x_spectrum(m, 20), UnsupportedSize);
}

TEST(ClusterSnr, Examples) {
  const FactorModel m(loading_cluster_assignment(10, 2, {3, 5}), Matrix::Identity(2, 2), NoiseCov::isotropic(1.0),
                      Vector::Ones(2), 1.0);
  EXPECT_DOUBLE_EQ(cluster_snr_lower_bound(m), 3.0);
  EXPECT_LE(cluster_snr_lower_bound(m), population_summary(m).xi + 1e-12);

  const FactorModel one(loading_cluster_assignment(6, 1, {6}), Matrix::Identity(1, 1), NoiseCov::isotropic(1.0),
                        Vector::Ones(1), 1.0);
  EXPECT_DOUBLE_EQ(cluster_snr_lower_bound(one), 6.0);

  Stream s(27);
  for (int t = 0; t < 10; ++t) {
    const Eigen::Index a = 1 + static_cast<Eigen::Index>(s.next_u64() % 8);
    const Eigen::Index b = 1 + static_cast<Eigen::Index>(s.next_u64() % 8);
    const FactorModel r(loading_cluster_assignment(20, 2, {a, b}), random_psd(2, s),
                        NoiseCov::diagonal(Vector::LinSpaced(20, 0.5, 1.5)), Vector::Ones(2), 1.0);
    EXPECT_LE(cluster_snr_lower_bound(r), population_summary(r).xi * (1 + 1e-12));
  }

  EXPECT_THROW(cluster_snr_lower_bound(random_model(5, 1, NoiseCov::isotropic(1.0), 703)), ContractViolation);
}

TEST(ResidualCheck, ZeroBetaAndTwoFeature) {
  Matrix a(2, 1);
  a << 1.0, 1.0;
  const FactorModel null_beta(a, Matrix::Identity(1, 1), NoiseCov::isotropic(1.0), Vector::Zero(1), 1.0);
  const double bound = 4.0 / std::sqrt(1e5);
  EXPECT_LE(gaussian_residual_check(null_beta, 100000, 5).max_abs_correlation, bound);
  const ResidualCheck r = gaussian_residual_check(two_feature_model(), 100000, 6);
  EXPECT_LE(r.max_abs_correlation, bound);
  EXPECT_TRUE(r.identity_ok);
  for (int t = 0; t < 5; ++t) {
    const ResidualCheck c = gaussian_residual_check(random_model(8, 2, NoiseCov::isotropic(0.5), 800 + t), 1000, 7);
    EXPECT_LE(c.identity_residual, 1e-8);
  }
}

TEST(Isotropic, ClosedFormMatchesExplicitModel) {
  IsotropicFactorSpec spec;
  spec.p = 30;
  spec.k = 3;
  spec.a_sq = 30.0;
  spec.factor_variance = 1.5;
  spec.noise_variance = 0.6;
  spec.beta = Vector::LinSpaced(3, 1.0, 2.0);
  spec.sigma_eps = 0.8;
  Stream s(28);
  const FactorModel m(loading_scaled_orthogonal(30, 3, s),
                      1.5 * Matrix::Identity(3, 3), NoiseCov::isotropic(0.6), spec.beta, 0.8);
  const PopulationSummary closed = isotropic_summary(spec);
  const PopulationSummary full = population_summary(m);
  EXPECT_NEAR(closed.xi, full.xi, 1e-10 * full.xi);
  EXPECT_NEAR(closed.risk_star, full.risk_star, 1e-10);
  EXPECT_NEAR(closed.alpha_star_norm_sq, full.alpha_star_norm_sq, 1e-10);
  EXPECT_NEAR(closed.re_sigma_x, full.re_sigma_x, 1e-10 * full.re_sigma_x);
  EXPECT_LE((isotropic_spectrum(spec).eigenvalues - sigma_x_spectrum(m).eigenvalues).norm(), 1e-9);
}
