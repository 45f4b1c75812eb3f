#include <gtest/gtest.h>

#include "frlab/errors.hpp"
#include "helpers.hpp"

using namespace frlab;
using frlab::testing::random_psd;
using frlab::testing::rel_err;

namespace {

Matrix rank_r(Eigen::Index m, Eigen::Index n, Eigen::Index r, Stream& s) {
  return s.matrix(m, r, NoiseLaw::Gaussian) * s.matrix(r, n, NoiseLaw::Gaussian);
}

}  // namespace

TEST(Svd, IdentityAndDiagonal) {
  EXPECT_TRUE(svd(Matrix::Identity(3, 3)).singulars.isApprox(Vector::Ones(3)));
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 3.0;
  const SvdResult r = svd(d);
  EXPECT_DOUBLE_EQ(r.singulars(0), 3.0);
  EXPECT_DOUBLE_EQ(r.singulars(1), 0.0);
}

TEST(Svd, ReconstructsRandomAndFixesSigns) {
  Stream s(11);
  const Matrix m = s.matrix(5, 3, NoiseLaw::Gaussian);
  const SvdResult r = svd(m);
  const Matrix back = r.left * r.singulars.asDiagonal() * r.right.transpose();
  EXPECT_LE((back - m).norm(), 1e-10 * r.singulars(0) * 5);
  for (Eigen::Index j = 0; j < r.left.cols(); ++j) {
    Eigen::Index i;
    r.left.col(j).cwiseAbs().maxCoeff(&i);
    EXPECT_GE(r.left(i, j), 0.0);
  }
  const SvdResult again = svd(m);
  EXPECT_EQ(again.left, r.left);
}

TEST(Pseudoinverse, HandExamples) {
  EXPECT_TRUE(pseudoinverse(Matrix::Identity(3, 3)).isApprox(Matrix::Identity(3, 3)));
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 2.0;
  Matrix dp = Matrix::Zero(2, 2);
  dp(0, 0) = 0.5;
  EXPECT_LE((pseudoinverse(d) - dp).norm(), 1e-15);
  Matrix b(2, 2);
  b << 1, 2, 2, 4;
  EXPECT_LE((pseudoinverse(b) - b / 25.0).norm(), 1e-14);
}

TEST(Pseudoinverse, MoorePenroseOnRandomMatrices) {
  Stream s(12);
  for (int t = 0; t < 60; ++t) {
    const Eigen::Index m = 1 + static_cast<Eigen::Index>(s.next_u64() % 60);
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(s.next_u64() % 60);
    const Eigen::Index r = 1 + static_cast<Eigen::Index>(s.next_u64() % std::min(m, n));
    const Matrix b = rank_r(m, n, r, s);
    const Matrix bp = pseudoinverse(b);
    EXPECT_LE((b * bp * b - b).norm(), 1e-10 * b.norm());
    EXPECT_LE((bp * b * bp - bp).norm(), 1e-10 * bp.norm());
    const Matrix p1 = b * bp, p2 = bp * b;
    EXPECT_LE((p1 - p1.transpose()).norm(), 1e-10);
    EXPECT_LE((p2 - p2.transpose()).norm(), 1e-10);
    EXPECT_EQ(numerical_rank(bp), r);
    EXPECT_LE(rel_err(bp, pseudoinverse(Matrix(b.transpose() * b)) * b.transpose()), 1e-10 * std::max(1.0, bp.norm()));
    const SvdResult dec = svd(b);
    EXPECT_NEAR(svd(bp).singulars(0), 1.0 / dec.singulars(r - 1), 1e-10 / dec.singulars(r - 1));
  }
}

TEST(Pseudoinverse, ProductIdentity) {
  Stream s(13);
  for (int t = 0; t < 30; ++t) {
    const Eigen::Index m = 2 + static_cast<Eigen::Index>(s.next_u64() % 20);
    const Eigen::Index k = 2 + static_cast<Eigen::Index>(s.next_u64() % 20);
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(s.next_u64() % 20);
    const Matrix b = s.matrix(m, k, NoiseLaw::Gaussian);
    const Matrix c = s.matrix(k, n, NoiseLaw::Gaussian);
    const Matrix lhs = pseudoinverse(b * c);
    const Matrix rhs = pseudoinverse(pseudoinverse(b) * b * c) * pseudoinverse(b * c * pseudoinverse(c));
    EXPECT_LE((lhs - rhs).norm(), 1e-8 * std::max(1.0, lhs.norm()));
  }
}

TEST(Pseudoinverse, FullRankSidesGiveIdentity) {
  Stream s(14);
  const Matrix tall = s.matrix(9, 4, NoiseLaw::Gaussian);
  EXPECT_LE((pseudoinverse(tall) * tall - Matrix::Identity(4, 4)).norm(), 1e-10);
  const Matrix wide = s.matrix(4, 9, NoiseLaw::Gaussian);
  EXPECT_LE((wide * pseudoinverse(wide) - Matrix::Identity(4, 4)).norm(), 1e-10);
}

TEST(Pseudoinverse, CutoffZeroesTinySingularValues) {
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 1.0;
  d(1, 1) = 1e-20;
  EXPECT_EQ(pseudoinverse(d)(1, 1), 0.0);
  RankPolicy loose;
  loose.relative_cutoff = 1e-3;
  d(1, 1) = 1e-4;
  EXPECT_EQ(pseudoinverse(d, loose)(1, 1), 0.0);
  EXPECT_EQ(numerical_rank(d, loose), 1);
}

TEST(SymmetricEigen, Examples) {
  EXPECT_TRUE(symmetric_eigen(Matrix::Identity(2, 2)).eigenvalues.isApprox(Vector::Ones(2)));
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 1.0;
  d(1, 1) = 4.0;
  const SymmetricEigen e = symmetric_eigen(d);
  EXPECT_DOUBLE_EQ(e.eigenvalues(0), 4.0);
  EXPECT_DOUBLE_EQ(e.eigenvalues(1), 1.0);
  EXPECT_NEAR(std::abs(e.eigenvectors(1, 0)), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(e.eigenvectors(0, 1)), 1.0, 1e-15);

  Stream s(15);
  const Matrix g = s.matrix(6, 6, NoiseLaw::Gaussian);
  EXPECT_GE(symmetric_eigen(g.transpose() * g).eigenvalues.minCoeff(), -1e-10);
}

TEST(SymmetricEigen, RejectsAsymmetric) {
  Matrix m(2, 2);
  m << 1, 2, 0, 1;
  EXPECT_THROW(symmetric_eigen(m), ContractViolation);
}

TEST(PsdSqrt, Examples) {
  EXPECT_TRUE(psd_sqrt(Matrix::Identity(4, 4)).isApprox(Matrix::Identity(4, 4)));
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 4.0;
  d(1, 1) = 9.0;
  const Matrix r = psd_sqrt(d);
  EXPECT_NEAR(r(0, 0), 2.0, 1e-14);
  EXPECT_NEAR(r(1, 1), 3.0, 1e-14);

  Stream s(16);
  const Matrix p = random_psd(7, s);
  const Matrix rp = psd_sqrt(p);
  EXPECT_LE((rp * rp - p).norm(), 1e-9 * operator_norm(p));
  EXPECT_LE((rp - rp.transpose()).norm(), 1e-12);
}

TEST(PsdSqrt, RejectsNegativeEigenvalue) {
  Matrix m = Matrix::Identity(2, 2);
  m(1, 1) = -0.5;
  EXPECT_THROW(psd_sqrt(m), NotPsd);
}

TEST(EffectiveRank, Examples) {
  EXPECT_DOUBLE_EQ(effective_rank(Matrix::Identity(7, 7)).value, 7.0);
  Matrix d = Matrix::Zero(3, 3);
  d(0, 0) = 1.0;
  EXPECT_DOUBLE_EQ(effective_rank(d).value, 1.0);
  d(0, 0) = 2.0;
  d(1, 1) = 1.0;
  d(2, 2) = 1.0;
  EXPECT_DOUBLE_EQ(effective_rank(d).value, 2.0);
  const EffectiveRank zero = effective_rank(Matrix::Zero(3, 3));
  EXPECT_DOUBLE_EQ(zero.value, 1.0);
  EXPECT_TRUE(zero.degenerate);
}

TEST(EffectiveRank, ScaleInvariant) {
  Stream s(17);
  const Matrix p = random_psd(8, s);
  EXPECT_NEAR(effective_rank(p).value, effective_rank(Matrix(3.7 * p)).value, 1e-12);
}

TEST(Norms, ConditionNumberAndMinSingular) {
  EXPECT_DOUBLE_EQ(condition_number(Matrix::Identity(5, 5)), 1.0);
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 10.0;
  d(1, 1) = 2.0;
  EXPECT_NEAR(condition_number(d), 5.0, 1e-14);
  EXPECT_DOUBLE_EQ(operator_norm(d), 10.0);
  EXPECT_DOUBLE_EQ(trace(d), 12.0);

  Stream s(18);
  const Matrix p = random_psd(6, s);
  const Vector ev = symmetric_eigen(p).eigenvalues;
  EXPECT_NEAR(condition_number(p), ev(0) / ev(5), 1e-10 * ev(0) / ev(5));

  d(1, 1) = 0.0;
  EXPECT_THROW(condition_number(d), SingularMatrix);

  EXPECT_DOUBLE_EQ(min_singular(Matrix::Identity(3, 3)), 1.0);
  Matrix z = Matrix::Zero(2, 2);
  z(0, 0) = 3.0;
  EXPECT_DOUBLE_EQ(min_singular(z), 0.0);
  const Matrix tall = s.matrix(8, 3, NoiseLaw::Gaussian);
  EXPECT_DOUBLE_EQ(min_singular(tall), svd(tall).singulars(2));
}

TEST(Finite, RejectsNan) {
  Matrix m = Matrix::Ones(2, 2);
  EXPECT_TRUE(all_finite(m));
  m(0, 1) = std::nan("");
  EXPECT_FALSE(all_finite(m));
  EXPECT_THROW(pseudoinverse(m), ContractViolation);
}
