#pragma once

#include <cmath>

#include "frlab/linalg.hpp"
#include "frlab/model.hpp"
#include "frlab/sampling.hpp"

namespace frlab::testing {

inline Matrix random_psd(Eigen::Index p, Stream& s, double ridge = 0.2) {
  const Matrix g = s.matrix(p, p, NoiseLaw::Gaussian);
  return g * g.transpose() / static_cast<double>(p) + ridge * Matrix::Identity(p, p);
}

// p=2, K=1, A=(1,1)', Sigma_Z=1, Sigma_E=I, beta=1, sigma_eps=1.
inline FactorModel two_feature_model(NoiseCov noise = NoiseCov::isotropic(1.0)) {
  Matrix a(2, 1);
  a << 1.0, 1.0;
  return FactorModel(a, Matrix::Identity(1, 1), std::move(noise), Vector::Ones(1), 1.0);
}

inline FactorModel random_model(Eigen::Index p, Eigen::Index k, NoiseCov noise, std::uint64_t seed,
                                double sigma_eps = 1.0) {
  Stream s(seed);
  const Matrix a = s.matrix(p, k, NoiseLaw::Gaussian);
  const Matrix sz = random_psd(k, s, 0.5);
  const Vector beta = s.vector(k, NoiseLaw::Gaussian);
  return FactorModel(a, sz, std::move(noise), beta, sigma_eps);
}

inline double rel_err(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace frlab::testing
