#pragma once

// Config-driven Monte Carlo sweeps over (K, n, p) grids, with CSV and SVG
// output.
//
// A sweep task is one (grid point, replicate) pair. Each task derives all of
// its randomness from SeedSpec{master_seed, grid_index, replicate}, so the
// emitted files are byte-identical for any thread count.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "frlab/bounds.hpp"
#include "frlab/estimators.hpp"
#include "frlab/model.hpp"
#include "frlab/sampling.hpp"

namespace frlab {

enum class Design { Figure1, Figure2, Figure4, NullRisk, Custom };

std::string to_string(Design design);
std::optional<Design> parse_design(const std::string& name);

struct GridPoint {
  Eigen::Index k = 0;
  Eigen::Index n = 0;
  Eigen::Index p = 0;

  double gamma() const { return static_cast<double>(p) / static_cast<double>(n); }
};

/// K linear over k_range, n = floor(K^n_exponent), gamma = p/n log-spaced
/// between the ratios implied by p_range at the two K endpoints.
struct GridRule {
  Eigen::Index k_min = 0;
  Eigen::Index k_max = 0;
  Eigen::Index p_min = 0;
  Eigen::Index p_max = 0;
  int points = 24;
  double n_exponent = 1.5;

  std::vector<GridPoint> expand() const;
  /// Shrinks K by scale^(2/3) so that n and p shrink by about `scale` while
  /// the gamma range is preserved.
  GridRule scaled(double scale) const;
};

struct LoadingSpec {
  enum class Kind { ScaledOrthogonal, Gaussian, CanonicalSparse, Cluster, Custom };
  Kind kind = Kind::ScaledOrthogonal;
  GaussianLoadingScale gaussian_scale = GaussianLoadingScale::Variance;
  std::optional<double> column_norm;            // CanonicalSparse
  std::vector<Eigen::Index> cluster_sizes;      // Cluster; empty means balanced p / K
  Matrix custom;                                // Custom (p x K)
};

struct FactorCovSpec {
  enum class Kind { Identity, Isotropic, Diagonal, Dense };
  Kind kind = Kind::Identity;
  double variance = 1.0;
  Vector variances;
  Matrix matrix;
};

struct NoiseCovSpec {
  enum class Kind { Zero, Identity, Isotropic, Diagonal, DiagonalRange, UnitTotalVariance, Dense };
  Kind kind = Kind::Identity;
  double variance = 1.0;
  Vector variances;
  double range_min = 1.0;
  double range_max = 1.0;
  Matrix matrix;
};

struct BetaSpec {
  enum class Kind { AllOnes, Custom };
  Kind kind = Kind::AllOnes;
  Vector values;
};

struct CvSettings {
  int folds = 5;
  int grid_points = 30;
  double grid_lo = 1e-4;
  double grid_hi = 1e2;
  std::uint64_t seed = 0;
};

struct EstimatorSpec {
  Method method = Method::MinNorm;
  std::string label;                 // CSV estimator column
  std::optional<Eigen::Index> k;     // PCR components; unset means K
  std::optional<double> lambda;      // fixed ridge / lasso penalty
  std::optional<CvSettings> cv;      // cross-validated ridge / lasso
  long lasso_max_sweeps = 100000;
};

struct EvalMode {
  bool holdout = false;              // false: exact population risk
  std::int64_t holdout_samples = 0;
};

struct ExperimentConfig {
  Design design = Design::Custom;
  std::vector<GridPoint> grid;
  std::optional<GridRule> grid_rule;  // set when the grid came from a rule
  LoadingSpec loading_kind;
  NoiseLaw noise_law = NoiseLaw::Gaussian;
  FactorCovSpec sigma_z_kind;
  NoiseCovSpec sigma_e_kind;
  BetaSpec beta_kind;
  double sigma_eps = 1.0;
  std::vector<EstimatorSpec> estimators;
  int replicates = 20;
  bool redraw_loading_per_replicate = true;
  std::uint64_t master_seed = 20240601;
  EvalMode eval_mode;
  std::string output_dir = "out";
};

/// Parses the JSON config schema; unknown fields are rejected. Errors are
/// ConfigError with a message naming the line or field at fault.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& config);

ExperimentConfig preset(Design design, double scale = 1.0);

/// Model for one grid point and replicate. The loading is drawn from the
/// replicate's stream, or from replicate 0's when loadings are not redrawn.
FactorModel build_model(const ExperimentConfig& config, size_t grid_index, std::uint64_t replicate);

struct SweepRow {
  std::string design;
  double gamma = 0.0;
  Eigen::Index k = 0;
  Eigen::Index n = 0;
  Eigen::Index p = 0;
  int replicate = 0;
  std::string estimator;
  double risk = 0.0;
  double excess_vs_oracle = 0.0;
  double excess_vs_star = 0.0;
  double null_risk = 0.0;
  double interp_residual = 0.0;
  double coef_norm_sq = 0.0;
  bool converged = true;
};

struct BoundRow {
  double gamma = 0.0;
  Eigen::Index k = 0;
  Eigen::Index n = 0;
  Eigen::Index p = 0;
  std::string bound_name;
  double value = 0.0;
  std::string conditions_json;
};

struct SweepResult {
  std::vector<SweepRow> rows;     // sorted by (gamma, estimator, replicate)
  std::vector<BoundRow> bounds;
};

struct RunOptions {
  /// 0 means FRLAB_THREADS, falling back to the hardware concurrency.
  unsigned threads = 0;
};

unsigned resolve_threads(unsigned requested);

SweepResult run_sweep(const ExperimentConfig& config, const RunOptions& options = {});

/// Bound reports for every grid point, evaluated on replicate 0's model.
std::vector<BoundRow> compute_bounds(const ExperimentConfig& config, const RunOptions& options = {});

/// Exact population risk, or the mean squared error over fresh draws.
double evaluate_risk(const FactorModel& model, const Vector& coefficients, const EvalMode& mode,
                     const SeedSpec& seed, NoiseLaw law = NoiseLaw::Gaussian);

inline constexpr const char* kSweepCsvHeader =
    "design,gamma,K,n,p,replicate,estimator,risk,excess_vs_oracle,excess_vs_star,null_risk,interp_residual,coef_norm_sq,"
    "converged";
inline constexpr const char* kBoundsCsvHeader = "gamma,K,n,p,bound_name,value,conditions_json";

std::string format_real(double v);
void emit_csv(const SweepResult& result, const std::filesystem::path& path);
void emit_bounds_csv(const std::vector<BoundRow>& rows, const std::filesystem::path& path);
std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path);

/// Mean and standard error of excess_vs_oracle at one grid point.
struct SeriesPoint {
  double gamma = 0.0;
  Eigen::Index k = 0;
  Eigen::Index n = 0;
  Eigen::Index p = 0;
  double mean = 0.0;
  double se = 0.0;
  int count = 0;
};

/// Series for one estimator, ordered by gamma.
std::vector<SeriesPoint> aggregate_excess(const SweepResult& result, const std::string& estimator);
std::vector<std::string> estimator_labels(const SweepResult& result);

struct PlotOptions {
  bool log_y = true;
  bool per_estimator_series = true;
  bool log_gamma_axis = true;
  std::string title;
};

std::string render_svg(const SweepResult& result, const PlotOptions& options);
void emit_svg_plot(const SweepResult& result, const std::filesystem::path& path, const PlotOptions& options = {});

}  // namespace frlab
