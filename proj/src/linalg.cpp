#include "frlab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace frlab {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Flip paired columns so the largest-magnitude entry of each `primary`
// column is nonnegative. Ties resolve to the lowest row index.
void canonicalize_signs(Matrix& primary, Matrix* partner) {
  for (Eigen::Index j = 0; j < primary.cols(); ++j) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < primary.rows(); ++i) {
      const double a = std::abs(primary(i, j));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    if (primary.rows() > 0 && primary(arg, j) < 0.0) {
      primary.col(j) *= -1.0;
      if (partner != nullptr) partner->col(j) *= -1.0;
    }
  }
}

}  // namespace

double RankPolicy::cutoff_for(Eigen::Index rows, Eigen::Index cols) const {
  if (relative_cutoff) {
    if (!(*relative_cutoff > 0.0)) throw ContractViolation("RankPolicy: relative_cutoff must be > 0");
    return *relative_cutoff;
  }
  return kEps * static_cast<double>(std::max<Eigen::Index>({rows, cols, 1}));
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw ContractViolation(std::string(what) + ": non-finite entry");
}

bool is_symmetric(const Matrix& s, double relative_tol) {
  if (s.rows() != s.cols()) return false;
  const double scale = std::max(s.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  return (s - s.transpose()).cwiseAbs().maxCoeff() <= relative_tol * scale;
}

SvdResult svd(const Matrix& m) {
  require_finite(m, "svd");
  SvdResult out;
  if (m.size() == 0) {
    out.left = Matrix::Zero(m.rows(), 0);
    out.right = Matrix::Zero(m.cols(), 0);
    return out;
  }
  Eigen::BDCSVD<Matrix> dec(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (dec.info() != Eigen::Success) throw NumericFailure("svd did not converge", m.rows(), m.cols());
  out.left = dec.matrixU();
  out.singulars = dec.singularValues();
  out.right = dec.matrixV();
  if (!out.left.allFinite() || !out.right.allFinite() || !out.singulars.allFinite()) {
    throw NumericFailure("svd produced non-finite factors", m.rows(), m.cols());
  }
  canonicalize_signs(out.left, &out.right);
  return out;
}

double absolute_cutoff(const SvdResult& dec, Eigen::Index rows, Eigen::Index cols,
                       const RankPolicy& policy) {
  const double top = dec.singulars.size() > 0 ? dec.singulars(0) : 0.0;
  return policy.cutoff_for(rows, cols) * top;
}

Eigen::Index numerical_rank(const Vector& singulars, double cutoff) {
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < singulars.size(); ++i) {
    if (singulars(i) > cutoff) ++r;
  }
  return r;
}

Eigen::Index numerical_rank(const Matrix& m, const RankPolicy& policy) {
  const SvdResult dec = svd(m);
  return numerical_rank(dec.singulars, absolute_cutoff(dec, m.rows(), m.cols(), policy));
}

Matrix pseudoinverse(const SvdResult& dec, double cutoff) {
  const Eigen::Index r = numerical_rank(dec.singulars, cutoff);
  const Vector inv = dec.singulars.head(r).cwiseInverse();
  return dec.right.leftCols(r) * inv.asDiagonal() * dec.left.leftCols(r).transpose();
}

Matrix pseudoinverse(const Matrix& m, const RankPolicy& policy) {
  const SvdResult dec = svd(m);
  if (dec.singulars.size() == 0) return Matrix::Zero(m.cols(), m.rows());
  return pseudoinverse(dec, absolute_cutoff(dec, m.rows(), m.cols(), policy));
}

Matrix pseudoinverse_apply(const SvdResult& dec, const Matrix& rhs, double cutoff) {
  const Eigen::Index r = numerical_rank(dec.singulars, cutoff);
  if (rhs.rows() != dec.left.rows()) throw DimensionMismatch("pseudoinverse_apply: rhs rows");
  const Matrix projected = dec.left.leftCols(r).transpose() * rhs;
  return dec.right.leftCols(r) * (dec.singulars.head(r).cwiseInverse().asDiagonal() * projected);
}

Vector pseudoinverse_apply(const Matrix& m, const Vector& rhs, const RankPolicy& policy) {
  if (rhs.size() != m.rows()) throw DimensionMismatch("pseudoinverse_apply: rhs length");
  const SvdResult dec = svd(m);
  if (dec.singulars.size() == 0) return Vector::Zero(m.cols());
  return pseudoinverse_apply(dec, Matrix(rhs), absolute_cutoff(dec, m.rows(), m.cols(), policy)).col(0);
}

SymmetricEigen symmetric_eigen(const Matrix& s) {
  require_finite(s, "symmetric_eigen");
  if (!is_symmetric(s)) throw ContractViolation("symmetric_eigen: input is not symmetric");
  SymmetricEigen out;
  if (s.size() == 0) return out;
  const Matrix sym = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> dec(sym);
  if (dec.info() != Eigen::Success) throw NumericFailure("symmetric eigensolver did not converge", s.rows(), s.cols());
  // Eigen returns ascending order.
  out.eigenvalues = dec.eigenvalues().reverse();
  out.eigenvectors = dec.eigenvectors().rowwise().reverse();
  canonicalize_signs(out.eigenvectors, nullptr);
  return out;
}

Matrix psd_sqrt(const Matrix& s) {
  const SymmetricEigen dec = symmetric_eigen(s);
  if (dec.eigenvalues.size() == 0) return s;
  const double norm = std::max(std::abs(dec.eigenvalues(0)), std::abs(dec.eigenvalues.tail(1)(0)));
  if (dec.eigenvalues.minCoeff() < -1e-10 * norm) throw NotPsd("psd_sqrt: matrix has a negative eigenvalue");
  const Vector root = dec.eigenvalues.cwiseMax(0.0).cwiseSqrt();
  Matrix r = dec.eigenvectors * root.asDiagonal() * dec.eigenvectors.transpose();
  return 0.5 * (r + r.transpose());
}

EffectiveRank effective_rank(double tr, double opnorm) {
  if (!(opnorm > 0.0)) return {1.0, true};
  return {tr / opnorm, false};
}

EffectiveRank effective_rank(const Matrix& s) {
  const SymmetricEigen dec = symmetric_eigen(s);
  if (dec.eigenvalues.size() == 0) return {1.0, true};
  const double top = dec.eigenvalues(0);
  if (dec.eigenvalues.cwiseAbs().maxCoeff() == 0.0) return {1.0, true};
  return effective_rank(s.trace(), top);
}

double operator_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return svd(m).singulars(0);
}

double trace(const Matrix& s) {
  if (s.rows() != s.cols()) throw DimensionMismatch("trace: matrix is not square");
  return s.trace();
}

double condition_number(const Matrix& s) {
  const SymmetricEigen dec = symmetric_eigen(s);
  if (dec.eigenvalues.size() == 0) throw SingularMatrix("condition_number: empty matrix");
  const double top = dec.eigenvalues(0);
  const double bottom = dec.eigenvalues(dec.eigenvalues.size() - 1);
  const double cutoff = kEps * static_cast<double>(s.rows()) * std::abs(top);
  if (!(bottom > cutoff)) throw SingularMatrix("condition_number: smallest eigenvalue is not positive");
  return top / bottom;
}

double min_singular(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  const SvdResult dec = svd(m);
  return dec.singulars(dec.singulars.size() - 1);
}

}  // namespace frlab
