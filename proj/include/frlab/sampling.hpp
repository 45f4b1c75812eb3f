#pragma once

// Seeded generation of factor-regression datasets and loading matrices.
//
// Every random draw comes from a stream keyed by (master seed, grid index,
// replicate index, role), so results do not depend on the order in which
// replicates are generated or on the number of worker threads.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "frlab/model.hpp"

namespace frlab {

/// Zero-mean, unit-variance entry law.
enum class NoiseLaw { Gaussian, Rademacher, UniformScaled };

std::string to_string(NoiseLaw law);
std::optional<NoiseLaw> parse_noise_law(const std::string& name);

enum class StreamRole : std::uint64_t {
  Loading = 1,
  Factors = 2,
  FeatureNoise = 3,
  ResponseNoise = 4,
  Holdout = 5,
  CvFolds = 6,
  Probe = 7,
};

struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t grid_index = 0;
  std::uint64_t replicate_index = 0;

  std::uint64_t stream_seed(StreamRole role) const;
};

/// One independent random stream.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}
  Stream(const SeedSpec& spec, StreamRole role) : engine_(spec.stream_seed(role)) {}

  double draw(NoiseLaw law);
  double gaussian() { return normal_(engine_); }
  std::uint64_t next_u64() { return engine_(); }
  /// Matrix of i.i.d. draws filled row by row.
  Matrix matrix(Eigen::Index rows, Eigen::Index cols, NoiseLaw law);
  Vector vector(Eigen::Index size, NoiseLaw law);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{-1.0, 1.0};
};

struct Dataset {
  Matrix x;    // n x p
  Vector y;    // n
  Matrix z;    // n x K
  Vector eps;  // n
  std::optional<Matrix> e;  // n x p feature noise, kept on request
};

Dataset sample_dataset(const FactorModel& model, Eigen::Index n, NoiseLaw law, const SeedSpec& seed,
                       bool keep_feature_noise = false);

/// sqrt(p) times a Haar-distributed p x K matrix with orthonormal columns.
Matrix loading_scaled_orthogonal(Eigen::Index p, Eigen::Index k, Stream& stream);

enum class GaussianLoadingScale { Variance, StdDev };

/// Entries i.i.d. N(0, 1/sqrt(K)); `scale` picks whether 1/sqrt(K) is the
/// variance or the standard deviation.
Matrix loading_gaussian(Eigen::Index p, Eigen::Index k, Stream& stream,
                        GaussianLoadingScale scale = GaussianLoadingScale::Variance);

/// Column a equals column_norm * e_a; column_norm defaults to sqrt(p).
Matrix loading_canonical_sparse(Eigen::Index p, Eigen::Index k, std::optional<double> column_norm = {});

/// 0/1 membership matrix; cluster a owns sizes[a] consecutive rows.
Matrix loading_cluster_assignment(Eigen::Index p, Eigen::Index k, const std::vector<Eigen::Index>& sizes);

/// Constant c in the two-sided band for the spectrum of W Sigma W'.
/// Calibrated with Gaussian entries, Sigma = I_r, r = n (the tightest case).
inline constexpr double kConcentrationConstant = 3.0;

struct ConcentrationProbe {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double trace_sigma = 0.0;
  double band_low = 0.0;
  double band_high = 0.0;
  bool within_band = false;
};

ConcentrationProbe concentration_probe(Eigen::Index n, const Matrix& sigma, NoiseLaw law, Stream& stream,
                                       double constant = kConcentrationConstant);

}  // namespace frlab
