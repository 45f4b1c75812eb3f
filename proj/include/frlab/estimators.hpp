#pragma once

// The predictors compared throughout the project. Each returns a
// coefficient vector in feature space together with fit metadata.

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "frlab/model.hpp"

namespace frlab {

enum class Method { MinNorm, PcrEmpirical, PcrStylized, Ridge, Lasso, Null, OracleZ };

std::string to_string(Method method);

struct FittedPredictor {
  Vector coefficients;
  Method method = Method::MinNorm;
  /// Always holds "training_residual" and "coef_norm_sq"; other keys depend on
  /// the method ("rank", "k", "lambda", "iterations", "duality_gap", ...).
  std::map<std::string, double> metadata;
  bool converged = true;
};

/// Minimum-norm least squares, X^+ y.
FittedPredictor fit_min_norm(const Matrix& x, const Vector& y);

/// Principal component regression on the top-k right singular directions of X.
FittedPredictor fit_pcr_empirical(const Matrix& x, const Vector& y, Eigen::Index k);

/// PCR on the top-k eigenvectors of the population Sigma_X.
FittedPredictor fit_pcr_stylized(const FactorModel& model, const Matrix& x, const Vector& y, Eigen::Index k);

/// argmin ||y - Xa||^2 + lambda ||a||^2.
FittedPredictor fit_ridge(const Matrix& x, const Vector& y, double lambda);

struct LassoOptions {
  double gap_tolerance = 1e-7;  // relative to the null objective ||y||^2 / (2n)
  long max_sweeps = 100000;
};

/// argmin (1/2n)||y - Xa||^2 + lambda ||a||_1 by cyclic coordinate descent.
FittedPredictor fit_lasso(const Matrix& x, const Vector& y, double lambda, const LassoOptions& options = {},
                          const Vector* warm_start = nullptr);

/// Largest |X_j' r / n| violation of the lasso optimality conditions.
double lasso_kkt_residual(const Matrix& x, const Vector& y, const Vector& coef, double lambda);

FittedPredictor fit_null(Eigen::Index p, const Matrix& x, const Vector& y);

struct OracleZFit {
  Vector beta_hat;
  double training_residual = 0.0;
};

/// Least squares on the latent factors, Z^+ y.
OracleZFit fit_oracle_z(const Matrix& z, const Vector& y);

// ---------------------------------------------------------------------------
// Cross-validation

struct CvPlan {
  int folds = 5;
  std::vector<double> penalty_grid;  // positive, sorted ascending
  std::uint64_t fold_seed = 0;

  void validate() const;
};

/// Coefficient vectors for every penalty in `lambdas` (same order).
using PathFitter = std::function<std::vector<Vector>(const Matrix&, const Vector&, std::span<const double>)>;

std::vector<Vector> ridge_path(const Matrix& x, const Vector& y, std::span<const double> lambdas);
std::vector<Vector> lasso_path(const Matrix& x, const Vector& y, std::span<const double> lambdas,
                               const LassoOptions& options = {});

struct CvResult {
  double best_lambda = 0.0;
  std::vector<double> cv_curve;  // mean held-out squared error per grid point
};

CvResult cross_validate(const PathFitter& fitter, const Matrix& x, const Vector& y, const CvPlan& plan);

/// Fold label in [0, folds) for each of n rows, balanced and seeded.
std::vector<int> fold_assignment(Eigen::Index n, int folds, std::uint64_t seed);

/// `points` log-spaced penalties spanning [lo, hi] * ||X'y||_inf / n.
std::vector<double> default_penalty_grid(const Matrix& x, const Vector& y, int points = 30, double lo = 1e-4,
                                         double hi = 1e2);

}  // namespace frlab
