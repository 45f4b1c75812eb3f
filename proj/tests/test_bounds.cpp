#include <gtest/gtest.h>

#include "frlab/bounds.hpp"
#include "helpers.hpp"

using namespace frlab;
using frlab::testing::random_model;
using frlab::testing::random_psd;
using frlab::testing::two_feature_model;

namespace {

SpectrumSummary spectrum_of(Vector ev) {
  SpectrumSummary s;
  s.eigenvalues = std::move(ev);
  return s;
}

Vector spiked(double top, Eigen::Index rest) {
  Vector v = Vector::Ones(rest + 1);
  v(0) = top;
  return v;
}

IsotropicFactorSpec isotropic(Eigen::Index p, Eigen::Index k, double a_sq) {
  IsotropicFactorSpec spec;
  spec.p = p;
  spec.k = k;
  spec.a_sq = a_sq;
  spec.beta = Vector::Ones(k);
  return spec;
}

}  // namespace

TEST(NullRatio, Examples) {
  PopulationSummary s;
  s.re_sigma_x = 100.0 * 50.0;
  EXPECT_NEAR(null_ratio_bound(50.0, s).value, 0.1, 1e-15);
  s.re_sigma_x = 50.0;
  const BoundReport at = null_ratio_bound(50.0, s);
  EXPECT_DOUBLE_EQ(at.value, 1.0);
  EXPECT_FALSE(at.conditions.at("re_sigma_x > n"));

  ModelOptions loose;
  loose.require_full_rank = false;
  const FactorModel flat(Matrix::Zero(400, 1), Matrix::Identity(1, 1), NoiseCov::isotropic(1.0), Vector::Ones(1), 1.0,
                         loose);
  EXPECT_NEAR(null_ratio_bound(25.0, population_summary(flat)).value, std::sqrt(25.0 / 400.0), 1e-14);
}

TEST(EffectiveRankCondition, Examples) {
  PopulationSummary s;
  s.k = 10;
  s.xi = 100.0;
  s.re_sigma_e = 1000.0;
  EXPECT_NEAR(effective_rank_condition(s, 100.0).value, 0.2, 1e-15);

  const PopulationSummary noiseless = population_summary(random_model(20, 3, NoiseCov::zero(), 81));
  EXPECT_NEAR(effective_rank_condition(noiseless, 50.0).value, 3.0 / 50.0, 1e-15);

  for (int t = 0; t < 10; ++t) {
    const PopulationSummary r = population_summary(random_model(30, 2, NoiseCov::isotropic(0.5), 82 + t));
    EXPECT_GE(effective_rank_condition(r, 40.0).value, r.re_sigma_x / 40.0 - 1e-9);
  }
}

TEST(MainExcess, WorkedNumbers) {
  PopulationSummary s;
  s.k = 10;
  s.p = 1000;
  s.xi = 100.0;
  s.re_sigma_e = 1000.0;
  s.beta_sz_norm_sq = 10.0;
  s.oracle_risk = 1.0;
  const BoundReport r = main_excess_bound(s, 100.0);
  EXPECT_NEAR(r.value, 1.0 + 2.0 * 100.0 * std::log(100.0) / 1000.0, 1e-12);
  EXPECT_NEAR(r.value, 1.9210, 1e-4);
  EXPECT_TRUE(r.conditions.at("n > K"));
  EXPECT_TRUE(r.conditions.at("re_sigma_e > n"));
}

TEST(MainExcess, NoiselessAndZeroResponseNoise) {
  Matrix a(3, 1);
  a << 1, 1, 0;
  const FactorModel m(a, Matrix::Identity(1, 1), NoiseCov::zero(), Vector::Ones(1), 0.0);
  const BoundReport r = main_excess_bound(population_summary(m), 20.0);
  EXPECT_EQ(r.value, 0.0);
  EXPECT_FALSE(r.conditions.at("re_sigma_e > n"));
}

TEST(MainExcess, VarianceHalvesWhenPDoubles) {
  const double n = 50.0;
  const BoundReport a = main_excess_bound(isotropic_summary(isotropic(1000, 4, 1000.0)), n);
  const BoundReport b = main_excess_bound(isotropic_summary(isotropic(2000, 4, 2000.0)), n);
  EXPECT_NEAR(b.components.at("variance"), 0.5 * a.components.at("variance"), 1e-12);
}

TEST(MainExcess, TableRegimes) {
  // Variance term vanishes once p >> n log n and dominates at p ~ n.
  const double n = 200.0;
  const BoundReport wide = main_excess_bound(isotropic_summary(isotropic(40000, 5, 40000.0)), n);
  const BoundReport narrow = main_excess_bound(isotropic_summary(isotropic(400, 5, 400.0)), n);
  EXPECT_LT(wide.components.at("variance"), 0.2);
  EXPECT_GT(narrow.components.at("variance"), 0.2);
}

TEST(Purevar, Substitutions) {
  const double n = 80.0;
  const PopulationSummary orth = isotropic_summary(isotropic(500, 5, 500.0));
  EXPECT_NEAR(purevar_bound(orth, n).components.at("bias"), 5.0 / n, 1e-14);

  const FactorModel cl(loading_cluster_assignment(40, 4, {10, 10, 10, 10}), Matrix::Identity(4, 4),
                       NoiseCov::isotropic(1.0), Vector::Ones(4), 1.0);
  const BoundReport c = purevar_bound(population_summary(cl), n);
  EXPECT_NEAR(c.components.at("bias"), 16.0 / n, 1e-12);
  EXPECT_NEAR(c.components.at("second_form") - c.components.at("variance"), 16.0 / n, 1e-12);

  IsotropicFactorSpec quiet = isotropic(500, 5, 500.0);
  quiet.sigma_eps = 0.0;
  const BoundReport q = purevar_bound(isotropic_summary(quiet), n);
  EXPECT_NEAR(q.value, q.components.at("bias"), 1e-15);
}

TEST(Lowdim, Examples) {
  IsotropicFactorSpec spec = isotropic(20, 2, 20.0);
  const PopulationSummary s = isotropic_summary(spec);
  const double n = 200.0;
  const BoundReport r = lowdim_bound(s, n);
  EXPECT_NEAR(r.value, s.beta_sz_norm_sq / s.xi + 20.0 / n * std::log(n), 1e-12);
  EXPECT_TRUE(r.conditions.at("n > p"));

  spec.beta = Vector::Zero(2);
  EXPECT_NEAR(lowdim_bound(isotropic_summary(spec), n).value, 20.0 / n * std::log(n), 1e-12);

  const BoundReport z = lowdim_bound(population_summary(random_model(10, 2, NoiseCov::zero(), 83)), n);
  EXPECT_FALSE(z.conditions.at("sigma_e_invertible"));
}

TEST(Pcr, FormsByNoiseKind) {
  const BoundReport z = pcr_bound(population_summary(random_model(10, 2, NoiseCov::zero(), 84)), 100.0);
  EXPECT_TRUE(z.components.count("noiseless"));
  EXPECT_FALSE(z.components.count("invertible"));
  EXPECT_NEAR(z.components.at("noiseless"), 2.0 * std::log(100.0) / 100.0, 1e-14);

  const BoundReport r = pcr_bound(population_summary(two_feature_model()), 100.0);
  EXPECT_NEAR(r.components.at("invertible"), 0.5 * 2.0 / 100.0 + std::log(100.0) / 100.0, 1e-14);
}

TEST(Pcr, GeneralFormBoundedByInvertibleFormPlusGap) {
  // ||alpha*||^2 ||Sigma_E|| <= kappa ||beta||^2/xi and R(alpha*) <= sigma^2 + ||beta||^2/xi,
  // so general <= invertible + (||beta||^2/xi) K ln(n)/n.
  Stream s(85);
  for (int t = 0; t < 10; ++t) {
    const FactorModel m = random_model(25, 3, NoiseCov::dense(random_psd(25, s, 0.5)), 860 + t);
    const PopulationSummary sum = population_summary(m);
    const double n = 60.0;
    const BoundReport r = pcr_bound(sum, n);
    const double slack = sum.beta_sz_norm_sq / sum.xi * 3.0 * std::log(n) / n;
    EXPECT_LE(r.components.at("general"), r.components.at("invertible") + slack + 1e-12);
  }
}

TEST(Bartlett, EffectiveRanks) {
  const BartlettRanks flat = bartlett_effective_ranks(spectrum_of(Vector::Ones(50)), 0);
  EXPECT_DOUBLE_EQ(flat.r_k, 50.0);
  EXPECT_DOUBLE_EQ(flat.big_r_k, 50.0);
  const SpectrumSummary sp = spectrum_of(spiked(100.0, 999));
  EXPECT_NEAR(bartlett_effective_ranks(sp, 0).r_k, 10.99, 1e-12);
  EXPECT_NEAR(bartlett_effective_ranks(sp, 1).r_k, 999.0, 1e-12);

  Vector zero_tail = Vector::Zero(4);
  zero_tail(0) = 1.0;
  EXPECT_TRUE(bartlett_effective_ranks(spectrum_of(zero_tail), 1).degenerate);

  Stream s(87);
  Vector ev = s.vector(30, NoiseLaw::Gaussian).cwiseAbs();
  std::sort(ev.data(), ev.data() + ev.size(), std::greater<>());
  for (Eigen::Index k = 0; k < 29; ++k) {
    EXPECT_LE(bartlett_effective_ranks(spectrum_of(ev), k).big_r_k, static_cast<double>(30 - k) + 1e-9);
  }
}

TEST(Bartlett, Kstar) {
  EXPECT_EQ(bartlett_kstar(spectrum_of(spiked(100.0, 999)), 10.0, 5.0), 1);
  EXPECT_EQ(bartlett_kstar(spectrum_of(Vector::Ones(100)), 10.0, 2.0), 0);
  EXPECT_FALSE(bartlett_kstar(spectrum_of(Vector::Ones(10)), 10.0, 2.0).has_value());
  const IsotropicFactorSpec spec = isotropic(20000, 10, 20000.0);
  EXPECT_EQ(bartlett_kstar(isotropic_spectrum(spec), 200.0), 10);
}

TEST(Bartlett, ZeroBetaHasNoBias) {
  IsotropicFactorSpec spec = isotropic(500, 3, 500.0);
  spec.beta = Vector::Zero(3);
  EXPECT_EQ(bartlett_bias_variance(isotropic_summary(spec), isotropic_spectrum(spec), 50.0).components.at("bias"), 0.0);
}

TEST(Bartlett, AgreesWithMainBiasWhenPExceedsNXi) {
  const IsotropicFactorSpec spec = isotropic(2000, 5, 10.0);
  const double n = 100.0;
  const PopulationSummary s = isotropic_summary(spec);
  ASSERT_GE(2000.0, n * s.xi);
  const double ours = main_excess_bound(s, n).components.at("bias");
  const double theirs = bartlett_bias_variance(s, isotropic_spectrum(spec), n).components.at("bias");
  EXPECT_GT(theirs / ours, 0.1);
  EXPECT_LT(theirs / ours, 10.0);
}

TEST(Bartlett, DivergencePattern) {
  std::vector<double> ours, theirs;
  for (double n : {256.0, 1024.0, 4096.0}) {
    const Eigen::Index k = static_cast<Eigen::Index>(std::floor(std::pow(n, 0.75)));
    const Eigen::Index p = 8 * static_cast<Eigen::Index>(n);
    const IsotropicFactorSpec spec = isotropic(p, k, static_cast<double>(p));
    const PopulationSummary s = isotropic_summary(spec);
    ours.push_back(main_excess_bound(s, n).components.at("bias"));
    theirs.push_back(bartlett_bias_variance(s, isotropic_spectrum(spec), n).components.at("bias"));
  }
  EXPECT_GT(ours[0], ours[1]);
  EXPECT_GT(ours[1], ours[2]);
  EXPECT_LT(theirs[0], theirs[1]);
  EXPECT_LT(theirs[1], theirs[2]);
}

TEST(KstarSandwich, Examples) {
  const IsotropicFactorSpec spec = isotropic(3000, 6, 3000.0);
  const KstarSandwich iso = kstar_sandwich_check(isotropic_summary(spec), isotropic_spectrum(spec), 100.0);
  EXPECT_TRUE(iso.upper_ok);
  EXPECT_TRUE(iso.lower_ok);

  const FactorModel noiseless = random_model(12, 2, NoiseCov::zero(), 88);
  EXPECT_TRUE(kstar_sandwich_check(population_summary(noiseless), sigma_x_spectrum(noiseless), 30.0).degenerate);

  Stream s(89);
  for (int t = 0; t < 5; ++t) {
    const FactorModel m = random_model(40, 3, NoiseCov::dense(random_psd(40, s, 0.5)), 890 + t);
    const KstarSandwich k = kstar_sandwich_check(population_summary(m), sigma_x_spectrum(m), 20.0);
    EXPECT_TRUE(k.upper_ok);
    EXPECT_TRUE(k.lower_ok);
  }
}

TEST(Reports, RecomputeFromInputs) {
  Stream s(90);
  const std::vector<FactorModel> models = {random_model(30, 3, NoiseCov::isotropic(0.7), 91),
                                           random_model(15, 2, NoiseCov::dense(random_psd(15, s)), 92),
                                           random_model(10, 2, NoiseCov::zero(), 93)};
  for (const FactorModel& m : models) {
    const PopulationSummary sum = population_summary(m);
    const SpectrumSummary sp = sigma_x_spectrum(m);
    for (double n : {8.0, 40.0}) {
      std::vector<BoundReport> reports = {null_ratio_bound(n, sum), effective_rank_condition(sum, n),
                                          main_excess_bound(sum, n), purevar_bound(sum, n), lowdim_bound(sum, n),
                                          pcr_bound(sum, n), bartlett_bias_variance(sum, sp, n)};
      for (const BoundReport& r : reports) {
        EXPECT_GE(r.value, 0.0) << r.name;
        EXPECT_DOUBLE_EQ(recompute_bound(r), r.value) << r.name;
      }
    }
  }
}
