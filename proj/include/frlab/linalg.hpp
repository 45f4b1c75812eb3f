#pragma once

// Dense real linear-algebra kernels and spectral summaries.
//
// All routines are pure functions of their inputs. Matrices are Eigen
// column-major doubles; every public entry point rejects non-finite input.

#include <optional>

#include <Eigen/Dense>

#include "frlab/errors.hpp"

namespace frlab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Eigen-decomposition of a symmetric matrix, eigenvalues sorted descending.
struct SymmetricEigen {
  Vector eigenvalues;
  Matrix eigenvectors;  // column i pairs with eigenvalues(i)
};

/// Thin singular value decomposition m = left * diag(singulars) * right'.
struct SvdResult {
  Matrix left;
  Vector singulars;  // descending, nonnegative
  Matrix right;
};

/// Numerical rank decision: singular values <= cutoff * sigma_1 count as zero.
struct RankPolicy {
  /// Unset means machine epsilon * max(rows, cols) for the matrix at hand.
  std::optional<double> relative_cutoff;

  double cutoff_for(Eigen::Index rows, Eigen::Index cols) const;
};

bool all_finite(const Matrix& m);
void require_finite(const Matrix& m, const char* what);
bool is_symmetric(const Matrix& s, double relative_tol = 1e-12);

SvdResult svd(const Matrix& m);

Matrix pseudoinverse(const Matrix& m, const RankPolicy& policy = {});
Matrix pseudoinverse(const SvdResult& dec, double absolute_cutoff);

/// Applies m^+ to the columns of rhs without forming m^+.
Matrix pseudoinverse_apply(const SvdResult& dec, const Matrix& rhs, double absolute_cutoff);
Vector pseudoinverse_apply(const Matrix& m, const Vector& rhs, const RankPolicy& policy = {});

Eigen::Index numerical_rank(const Vector& singulars, double absolute_cutoff);
Eigen::Index numerical_rank(const Matrix& m, const RankPolicy& policy = {});

/// Absolute singular-value cutoff implied by the policy for this decomposition.
double absolute_cutoff(const SvdResult& dec, Eigen::Index rows, Eigen::Index cols,
                       const RankPolicy& policy = {});

SymmetricEigen symmetric_eigen(const Matrix& s);

/// Symmetric PSD square root; eigenvalues down to -1e-10 * ||s|| are clamped.
Matrix psd_sqrt(const Matrix& s);

struct EffectiveRank {
  double value = 1.0;
  bool degenerate = false;  // zero matrix, reported as 1 by convention
};

EffectiveRank effective_rank(const Matrix& s);
EffectiveRank effective_rank(double trace, double opnorm);

double operator_norm(const Matrix& m);
double trace(const Matrix& s);
double condition_number(const Matrix& s);
double min_singular(const Matrix& m);

}  // namespace frlab
