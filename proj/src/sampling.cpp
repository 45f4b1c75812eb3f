#include "frlab/sampling.hpp"

#include <cmath>

namespace frlab {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::string to_string(NoiseLaw law) {
  switch (law) {
    case NoiseLaw::Gaussian: return "gaussian";
    case NoiseLaw::Rademacher: return "rademacher";
    case NoiseLaw::UniformScaled: return "uniform";
  }
  return "gaussian";
}

std::optional<NoiseLaw> parse_noise_law(const std::string& name) {
  if (name == "gaussian") return NoiseLaw::Gaussian;
  if (name == "rademacher") return NoiseLaw::Rademacher;
  if (name == "uniform") return NoiseLaw::UniformScaled;
  return std::nullopt;
}

std::uint64_t SeedSpec::stream_seed(StreamRole role) const {
  std::uint64_t h = splitmix64(master_seed);
  h = splitmix64(h ^ grid_index);
  h = splitmix64(h ^ (replicate_index * 0x2545f4914f6cdd1dULL));
  return splitmix64(h ^ static_cast<std::uint64_t>(role));
}

double Stream::draw(NoiseLaw law) {
  switch (law) {
    case NoiseLaw::Gaussian:
      return normal_(engine_);
    case NoiseLaw::Rademacher:
      return (engine_() >> 63) ? 1.0 : -1.0;
    case NoiseLaw::UniformScaled:
      return std::sqrt(3.0) * uniform_(engine_);
  }
  return 0.0;
}

Matrix Stream::matrix(Eigen::Index rows, Eigen::Index cols, NoiseLaw law) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = draw(law);
  }
  return m;
}

Vector Stream::vector(Eigen::Index size, NoiseLaw law) {
  Vector v(size);
  for (Eigen::Index i = 0; i < size; ++i) v(i) = draw(law);
  return v;
}

Dataset sample_dataset(const FactorModel& model, Eigen::Index n, NoiseLaw law, const SeedSpec& seed,
                       bool keep_feature_noise) {
  if (n < 1) throw ContractViolation("sample_dataset: n must be >= 1");
  Stream factors(seed, StreamRole::Factors);
  Stream features(seed, StreamRole::FeatureNoise);
  Stream response(seed, StreamRole::ResponseNoise);

  Dataset d;
  d.z = factors.matrix(n, model.k(), law) * model.factor_sqrt();
  Matrix e = model.noise_cov().is_zero() ? Matrix::Zero(n, model.p())
                                         : model.noise_cov().right_multiply_sqrt(features.matrix(n, model.p(), law));
  d.eps = model.sigma_eps() * response.vector(n, law);
  d.x = d.z * model.loading().transpose() + e;
  d.y = d.z * model.beta() + d.eps;
  if (keep_feature_noise) d.e = std::move(e);
  return d;
}

Matrix loading_scaled_orthogonal(Eigen::Index p, Eigen::Index k, Stream& stream) {
  if (k < 1 || k > p) throw ContractViolation("loading_scaled_orthogonal: need 1 <= K <= p");
  // The first K rows of a Haar p x p orthogonal matrix, transposed, have the
  // law of the Q factor of a p x K Gaussian matrix with sign-fixed R.
  const Matrix g = stream.matrix(p, k, NoiseLaw::Gaussian);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(p, k);
  const Matrix r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < k; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return std::sqrt(static_cast<double>(p)) * q;
}

Matrix loading_gaussian(Eigen::Index p, Eigen::Index k, Stream& stream, GaussianLoadingScale scale) {
  if (k < 1 || k > p) throw ContractViolation("loading_gaussian: need 1 <= K <= p");
  const double param = 1.0 / std::sqrt(static_cast<double>(k));
  const double sd = scale == GaussianLoadingScale::Variance ? std::sqrt(param) : param;
  return sd * stream.matrix(p, k, NoiseLaw::Gaussian);
}

Matrix loading_canonical_sparse(Eigen::Index p, Eigen::Index k, std::optional<double> column_norm) {
  if (k < 1 || k > p) throw ContractViolation("loading_canonical_sparse: need 1 <= K <= p");
  const double c = column_norm.value_or(std::sqrt(static_cast<double>(p)));
  Matrix a = Matrix::Zero(p, k);
  for (Eigen::Index j = 0; j < k; ++j) a(j, j) = c;
  return a;
}

Matrix loading_cluster_assignment(Eigen::Index p, Eigen::Index k, const std::vector<Eigen::Index>& sizes) {
  if (static_cast<Eigen::Index>(sizes.size()) != k) throw ContractViolation("loading_cluster_assignment: need K sizes");
  Eigen::Index total = 0;
  for (Eigen::Index s : sizes) {
    if (s < 1) throw ContractViolation("loading_cluster_assignment: cluster sizes must be positive");
    total += s;
  }
  if (total > p) throw ContractViolation("loading_cluster_assignment: cluster sizes exceed p");
  Matrix a = Matrix::Zero(p, k);
  Eigen::Index row = 0;
  for (Eigen::Index j = 0; j < k; ++j) {
    for (Eigen::Index c = 0; c < sizes[static_cast<size_t>(j)]; ++c) a(row++, j) = 1.0;
  }
  return a;
}

ConcentrationProbe concentration_probe(Eigen::Index n, const Matrix& sigma, NoiseLaw law, Stream& stream,
                                       double constant) {
  const Eigen::Index r = sigma.rows();
  if (sigma.cols() != r) throw DimensionMismatch("concentration_probe: sigma must be square");
  if (r < n) throw ContractViolation("concentration_probe: need r >= n");
  const Matrix w = stream.matrix(n, r, law);
  const bool diagonal = sigma.isDiagonal(0.0);
  Matrix g = diagonal ? Matrix(w * sigma.diagonal().asDiagonal() * w.transpose()) : Matrix(w * sigma * w.transpose());
  g = 0.5 * (g + g.transpose());
  const Vector ev = symmetric_eigen(g).eigenvalues;

  ConcentrationProbe out;
  out.lambda_max = ev(0);
  out.lambda_min = ev(ev.size() - 1);
  out.trace_sigma = sigma.trace();
  double norm = 0.0;
  if (diagonal) {
    norm = sigma.diagonal().cwiseAbs().maxCoeff();
  } else {
    norm = symmetric_eigen(0.5 * (sigma + sigma.transpose())).eigenvalues(0);
  }
  const double slack = constant * norm * static_cast<double>(n);
  out.band_low = out.trace_sigma / 2.0 - slack;
  out.band_high = 1.5 * out.trace_sigma + slack;
  out.within_band = out.lambda_min >= out.band_low && out.lambda_max <= out.band_high;
  return out;
}

}  // namespace frlab
