#pragma once

// Factor regression model  X = A Z + E,  y = Z'beta + eps  and its exact
// population quantities.
//
// Sigma_X = A Sigma_Z A' + Sigma_E is never formed densely unless the noise
// covariance is itself dense or a caller explicitly asks for it; everything
// else routes through the K-dimensional core  Abar = A Sigma_Z^{1/2}.

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <variant>

#include "frlab/linalg.hpp"

namespace frlab {

/// Largest p for which a dense p x p Sigma_X (or Sigma_E) is materialized.
inline constexpr Eigen::Index kDenseCap = 4096;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// 1/xi with the xi = infinity convention mapped to zero.
inline double inverse_snr(double xi) { return std::isinf(xi) ? 0.0 : 1.0 / xi; }

struct DenseNoiseCache;

/// Feature-noise covariance Sigma_E.
class NoiseCov {
 public:
  struct Zero {};
  struct Isotropic {
    double variance;
  };
  struct Diagonal {
    Vector variances;
  };
  struct Dense {
    Matrix matrix;
    std::shared_ptr<const DenseNoiseCache> cache;  // eigenvalues, square root, Cholesky
  };
  using Repr = std::variant<Zero, Isotropic, Diagonal, Dense>;

  static NoiseCov zero() { return NoiseCov(Zero{}); }
  static NoiseCov isotropic(double variance);
  static NoiseCov diagonal(Vector variances);
  static NoiseCov dense(Matrix matrix);

  const Repr& repr() const { return repr_; }
  bool is_zero() const { return std::holds_alternative<Zero>(repr_); }
  bool is_isotropic() const { return std::holds_alternative<Isotropic>(repr_); }
  bool is_dense() const { return std::holds_alternative<Dense>(repr_); }

  /// Checks that the representation is consistent with p features.
  void validate(Eigen::Index p) const;

  Vector apply(const Vector& v) const;
  double quadform(const Vector& v) const;
  double trace(Eigen::Index p) const;
  double opnorm(Eigen::Index p) const;
  /// Smallest eigenvalue, zero for the Zero representation.
  double min_eigenvalue(Eigen::Index p) const;
  bool invertible(Eigen::Index p) const;
  /// Sigma_E^{-1} applied to the columns of m; requires invertible().
  Matrix inverse_apply(const Matrix& m) const;
  /// m * Sigma_E^{1/2} (used for sampling rows E = Etilde Sigma_E^{1/2}).
  Matrix right_multiply_sqrt(const Matrix& m) const;
  Matrix to_dense(Eigen::Index p) const;
  std::string kind_name() const;

 private:
  explicit NoiseCov(Repr r) : repr_(std::move(r)) {}
  Repr repr_;
};

struct ModelOptions {
  /// Assert rank(A) = rank(Sigma_Z) = K at construction.
  bool require_full_rank = true;
};

/// Population specification (A, Sigma_Z, Sigma_E, beta, sigma_eps).
class FactorModel {
 public:
  FactorModel(Matrix loading, Matrix factor_cov, NoiseCov noise_cov, Vector beta,
              double sigma_eps, ModelOptions options = {});

  Eigen::Index p() const { return loading_.rows(); }
  Eigen::Index k() const { return loading_.cols(); }
  const Matrix& loading() const { return loading_; }
  const Matrix& factor_cov() const { return factor_cov_; }
  const NoiseCov& noise_cov() const { return noise_cov_; }
  const Vector& beta() const { return beta_; }
  double sigma_eps() const { return sigma_eps_; }

  /// Sigma_Z^{1/2}.
  const Matrix& factor_sqrt() const { return factor_sqrt_; }
  /// A Sigma_Z^{1/2}, the p x K signal core.
  const Matrix& signal_core() const { return signal_core_; }
  /// Sigma_{Xy} = A Sigma_Z beta.
  const Vector& sigma_xy() const { return sigma_xy_; }
  /// Eigenvalues of A Sigma_Z A' restricted to its K-dimensional range, descending.
  const Vector& signal_eigenvalues() const { return signal_eigenvalues_; }

 private:
  Matrix loading_;
  Matrix factor_cov_;
  NoiseCov noise_cov_;
  Vector beta_;
  double sigma_eps_;
  Matrix factor_sqrt_;
  Matrix signal_core_;
  Vector sigma_xy_;
  Vector signal_eigenvalues_;
};

/// Exact population quantities derived from a FactorModel.
struct PopulationSummary {
  Eigen::Index p = 0;
  Eigen::Index k = 0;
  double sigma_x_opnorm = 0.0;
  double sigma_x_trace = 0.0;
  double sigma_e_opnorm = 0.0;
  double sigma_e_trace = 0.0;
  std::optional<double> kappa_sigma_e;  // unset when Sigma_E is singular
  double lambda_k_signal = 0.0;         // lambda_K(A Sigma_Z A')
  double lambda_1_signal = 0.0;
  double lambda_k_ata = 0.0;            // lambda_K(A'A)
  double lambda_k_factor = 0.0;         // lambda_K(Sigma_Z)
  double xi = 0.0;                      // kInfinity when Sigma_E = 0
  double re_sigma_x = 1.0;
  double re_sigma_e = 1.0;
  bool re_sigma_e_degenerate = false;
  Vector alpha_star;
  double alpha_star_norm_sq = 0.0;
  double alpha_star_sx_norm_sq = 0.0;
  double risk_star = 0.0;
  double oracle_risk = 0.0;             // sigma_eps^2
  double null_risk = 0.0;               // beta' Sigma_Z beta + sigma_eps^2
  double beta_sz_norm_sq = 0.0;
  std::optional<double> beta_ata_inv;   // beta' (A'A)^{-1} beta
  double gap_lower = 0.0;
  double gap_upper = 0.0;
};

enum class SpectrumProvenance { Dense, IsotropicShift };

/// Eigenvalues of Sigma_X, descending.
struct SpectrumSummary {
  Vector eigenvalues;
  SpectrumProvenance provenance = SpectrumProvenance::Dense;
};

Vector sigma_x_apply(const FactorModel& model, const Vector& v);
double sigma_x_quadform(const FactorModel& model, const Vector& v);
/// Dense Sigma_X; throws UnsupportedSize beyond `cap`.
Matrix sigma_x_dense(const FactorModel& model, Eigen::Index cap = kDenseCap);

Vector best_linear_predictor(const FactorModel& model);
/// Woodbury route; requires an invertible Sigma_E.
Vector best_linear_predictor_woodbury(const FactorModel& model);
/// Sigma_X^+ Sigma_{Xy} from the dense Sigma_X; gated by the dense cap.
Vector best_linear_predictor_dense(const FactorModel& model);

PopulationSummary population_summary(const FactorModel& model);

/// R(alpha) = E (X'alpha - y)^2.
double risk_exact(const FactorModel& model, const Vector& alpha);

struct ExcessDecomposition {
  double b1 = 0.0;
  double b2 = 0.0;
  double v1 = 0.0;
  double v2 = 0.0;
  double exact_excess = 0.0;
  Vector coefficients;  // X^+ y
};

/// Bias/variance pieces of R(X^+ y) - sigma_eps^2 for one replicate; rows of
/// x and z are observations.
ExcessDecomposition excess_decomposition(const FactorModel& model, const Matrix& x,
                                         const Matrix& z, const Vector& eps);

SpectrumSummary sigma_x_spectrum(const FactorModel& model, Eigen::Index cap = kDenseCap);

/// Top-k eigenvectors of Sigma_X as columns (p x k).
Matrix sigma_x_top_eigenvectors(const FactorModel& model, Eigen::Index k,
                                Eigen::Index cap = kDenseCap);

struct SpectrumDiagnostics {
  bool lambda_floor_ok = false;   // lambda_i(Sigma_X) >= lambda_p(Sigma_E)
  bool lambda_k_growth = false;   // lambda_K(Sigma_X) >= lambda_K(Sigma_Z) lambda_K(A'A)
  bool tail_bounded = false;      // lambda_i(Sigma_X) <= ||Sigma_E|| for i > K
  Vector eigenvalues;
};

SpectrumDiagnostics spectrum_diagnostics(const FactorModel& model, Eigen::Index cap = kDenseCap);

/// min_a |I_a| lambda_K(Sigma_Z) / ||Sigma_E|| for a 0/+-1 assignment loading.
double cluster_snr_lower_bound(const FactorModel& model);

struct ResidualCheck {
  double max_abs_correlation = 0.0;
  double identity_residual = 0.0;  // ||Sigma_X alpha* - Sigma_Xy|| / max(1, ||Sigma_Xy||)
  bool identity_ok = false;
};

/// Samples Gaussian data and measures corr(X_j, y - X'alpha*).
ResidualCheck gaussian_residual_check(const FactorModel& model, std::int64_t sample_count,
                                      std::uint64_t seed);

/// Closed-form population summary for Sigma_Z = s_z I, Sigma_E = s_e I and
/// A'A = a_sq I. Needs no p x K storage.
struct IsotropicFactorSpec {
  Eigen::Index p = 0;
  Eigen::Index k = 0;
  double a_sq = 1.0;
  double factor_variance = 1.0;
  double noise_variance = 1.0;
  Vector beta;
  double sigma_eps = 1.0;
};

PopulationSummary isotropic_summary(const IsotropicFactorSpec& spec);
SpectrumSummary isotropic_spectrum(const IsotropicFactorSpec& spec);

}  // namespace frlab
