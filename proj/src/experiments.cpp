#include "frlab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <json.hpp>

#include "frlab/errors.hpp"
#include "frlab/linalg.hpp"

namespace frlab {

using Eigen::Index;

namespace {

Matrix make_loading(const LoadingSpec& spec, const GridPoint& g, const SeedSpec& seed) {
  Stream stream(seed, StreamRole::Loading);
  switch (spec.kind) {
    case LoadingSpec::Kind::ScaledOrthogonal: return loading_scaled_orthogonal(g.p, g.k, stream);
    case LoadingSpec::Kind::Gaussian: return loading_gaussian(g.p, g.k, stream, spec.gaussian_scale);
    case LoadingSpec::Kind::CanonicalSparse: return loading_canonical_sparse(g.p, g.k, spec.column_norm);
    case LoadingSpec::Kind::Cluster: {
      std::vector<Index> sizes = spec.cluster_sizes;
      if (sizes.empty()) {
        for (Index a = 0; a < g.k; ++a) sizes.push_back(g.p / g.k + (a < g.p % g.k ? 1 : 0));
      }
      return loading_cluster_assignment(g.p, g.k, sizes);
    }
    case LoadingSpec::Kind::Custom: return spec.custom;
  }
  throw ConfigError("loading_kind: unsupported kind");
}

Matrix make_factor_cov(const FactorCovSpec& spec, Index k) {
  switch (spec.kind) {
    case FactorCovSpec::Kind::Identity: return Matrix::Identity(k, k);
    case FactorCovSpec::Kind::Isotropic: return spec.variance * Matrix::Identity(k, k);
    case FactorCovSpec::Kind::Diagonal: return spec.variances.asDiagonal();
    case FactorCovSpec::Kind::Dense: return spec.matrix;
  }
  throw ConfigError("sigma_z_kind: unsupported kind");
}

// Sigma_E = I - diag(A Sigma_Z A'), valid when A Sigma_Z A' is diagonal with
// entries at most 1.
NoiseCov unit_total_variance_noise(const Matrix& loading, const Matrix& factor_cov) {
  const Matrix core = loading * psd_sqrt(factor_cov);
  std::vector<Index> support;
  for (Index i = 0; i < core.rows(); ++i) {
    if (core.row(i).squaredNorm() > 0.0) support.push_back(i);
  }
  if (static_cast<Index>(support.size()) > kDenseCap) {
    throw ConfigError("sigma_e_kind 'unit_total_variance': signal support too large to verify");
  }
  Matrix rows(static_cast<Index>(support.size()), core.cols());
  for (size_t r = 0; r < support.size(); ++r) rows.row(static_cast<Index>(r)) = core.row(support[r]);
  const Matrix gram = rows * rows.transpose();
  const double scale = std::max(1.0, gram.cwiseAbs().maxCoeff());
  Vector variances = Vector::Ones(loading.rows());
  for (Index i = 0; i < gram.rows(); ++i) {
    for (Index j = 0; j < gram.cols(); ++j) {
      if (i != j && std::abs(gram(i, j)) > 1e-12 * scale) {
        throw ConfigError("sigma_e_kind 'unit_total_variance' needs A Sigma_Z A' to be diagonal");
      }
    }
    const double v = 1.0 - gram(i, i);
    if (v < -1e-12) throw ConfigError("sigma_e_kind 'unit_total_variance' needs diag(A Sigma_Z A') <= 1");
    variances(support[static_cast<size_t>(i)]) = std::max(0.0, v);
  }
  return NoiseCov::diagonal(variances);
}

NoiseCov make_noise_cov(const NoiseCovSpec& spec, const Matrix& loading, const Matrix& factor_cov) {
  const Index p = loading.rows();
  switch (spec.kind) {
    case NoiseCovSpec::Kind::Zero: return NoiseCov::zero();
    case NoiseCovSpec::Kind::Identity: return NoiseCov::isotropic(1.0);
    case NoiseCovSpec::Kind::Isotropic: return NoiseCov::isotropic(spec.variance);
    case NoiseCovSpec::Kind::Diagonal: return NoiseCov::diagonal(spec.variances);
    case NoiseCovSpec::Kind::DiagonalRange: {
      Vector v(p);
      for (Index i = 0; i < p; ++i) {
        const double t = p == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(p - 1);
        v(i) = spec.range_min + t * (spec.range_max - spec.range_min);
      }
      return NoiseCov::diagonal(v);
    }
    case NoiseCovSpec::Kind::UnitTotalVariance: return unit_total_variance_noise(loading, factor_cov);
    case NoiseCovSpec::Kind::Dense: return NoiseCov::dense(spec.matrix);
  }
  throw ConfigError("sigma_e_kind: unsupported kind");
}

Vector make_beta(const BetaSpec& spec, Index k) {
  return spec.kind == BetaSpec::Kind::AllOnes ? Vector::Ones(k) : spec.values;
}

}  // namespace

FactorModel build_model(const ExperimentConfig& config, size_t grid_index, std::uint64_t replicate) {
  if (grid_index >= config.grid.size()) throw ContractViolation("build_model: grid index out of range");
  const GridPoint& g = config.grid[grid_index];
  const SeedSpec loading_seed{config.master_seed, grid_index, config.redraw_loading_per_replicate ? replicate : 0};
  Matrix loading = make_loading(config.loading_kind, g, loading_seed);
  Matrix factor_cov = make_factor_cov(config.sigma_z_kind, g.k);
  NoiseCov noise = make_noise_cov(config.sigma_e_kind, loading, factor_cov);
  return FactorModel(std::move(loading), std::move(factor_cov), std::move(noise), make_beta(config.beta_kind, g.k),
                     config.sigma_eps);
}

// ---------------------------------------------------------------------------
// Risk evaluation

namespace {

constexpr Index kHoldoutChunk = 10000;

}  // namespace

double evaluate_risk(const FactorModel& model, const Vector& coefficients, const EvalMode& mode, const SeedSpec& seed,
                     NoiseLaw law) {
  if (coefficients.size() != model.p()) throw DimensionMismatch("evaluate_risk: coefficient length differs from p");
  if (!mode.holdout) return risk_exact(model, coefficients);
  if (mode.holdout_samples < 1) throw ContractViolation("evaluate_risk: holdout needs at least one sample");

  const std::uint64_t base = seed.stream_seed(StreamRole::Holdout);
  double total = 0.0;
  std::int64_t done = 0;
  for (std::uint64_t chunk = 0; done < mode.holdout_samples; ++chunk) {
    const Index m = static_cast<Index>(std::min<std::int64_t>(kHoldoutChunk, mode.holdout_samples - done));
    const Dataset d = sample_dataset(model, m, law, SeedSpec{base, chunk, 0});
    total += (d.x * coefficients - d.y).squaredNorm();
    done += m;
  }
  return total / static_cast<double>(mode.holdout_samples);
}

namespace {

double oracle_z_risk(const FactorModel& model, const Vector& beta_hat, const EvalMode& mode, const SeedSpec& seed,
                     NoiseLaw law) {
  const Vector diff = beta_hat - model.beta();
  if (!mode.holdout) {
    return model.sigma_eps() * model.sigma_eps() + diff.dot(model.factor_cov() * diff);
  }
  const std::uint64_t base = seed.stream_seed(StreamRole::Holdout);
  double total = 0.0;
  std::int64_t done = 0;
  for (std::uint64_t chunk = 0; done < mode.holdout_samples; ++chunk) {
    const Index m = static_cast<Index>(std::min<std::int64_t>(kHoldoutChunk, mode.holdout_samples - done));
    const Dataset d = sample_dataset(model, m, law, SeedSpec{base, chunk, 0});
    total += (d.z * beta_hat - d.y).squaredNorm();
    done += m;
  }
  return total / static_cast<double>(mode.holdout_samples);
}

FittedPredictor fit_one(const EstimatorSpec& spec, const FactorModel& model, const Dataset& data,
                        const SeedSpec& seed) {
  const Matrix& x = data.x;
  const Vector& y = data.y;
  const Index k = spec.k.value_or(model.k());
  switch (spec.method) {
    case Method::MinNorm: return fit_min_norm(x, y);
    case Method::PcrEmpirical: return fit_pcr_empirical(x, y, k);
    case Method::PcrStylized: return fit_pcr_stylized(model, x, y, k);
    case Method::Null: return fit_null(model.p(), x, y);
    case Method::Ridge:
    case Method::Lasso: {
      LassoOptions lasso_opts;
      lasso_opts.max_sweeps = spec.lasso_max_sweeps;
      double lambda = spec.lambda.value_or(0.0);
      std::vector<double> curve;
      if (spec.cv) {
        CvPlan plan;
        plan.folds = spec.cv->folds;
        plan.penalty_grid = default_penalty_grid(x, y, spec.cv->grid_points, spec.cv->grid_lo, spec.cv->grid_hi);
        plan.fold_seed = SeedSpec{seed.master_seed + spec.cv->seed, seed.grid_index, seed.replicate_index}.stream_seed(
            StreamRole::CvFolds);
        PathFitter fitter;
        if (spec.method == Method::Ridge) {
          fitter = [](const Matrix& a, const Vector& b, std::span<const double> l) { return ridge_path(a, b, l); };
        } else {
          fitter = [lasso_opts](const Matrix& a, const Vector& b, std::span<const double> l) {
            return lasso_path(a, b, l, lasso_opts);
          };
        }
        const CvResult cv = cross_validate(fitter, x, y, plan);
        lambda = cv.best_lambda;
      }
      FittedPredictor fit;
      if (spec.method == Method::Ridge) {
        fit = fit_ridge(x, y, lambda);
      } else {
        const double single[] = {lambda};
        const Vector start = lasso_path(x, y, single, lasso_opts).front();
        fit = fit_lasso(x, y, lambda, lasso_opts, &start);
      }
      if (spec.cv) fit.metadata["cv_lambda"] = lambda;
      return fit;
    }
    case Method::OracleZ: break;
  }
  throw ContractViolation("fit_one: oracle estimator handled separately");
}

SweepRow base_row(const ExperimentConfig& config, const GridPoint& g, int replicate, const EstimatorSpec& spec) {
  SweepRow row;
  row.design = to_string(config.design);
  row.gamma = g.gamma();
  row.k = g.k;
  row.n = g.n;
  row.p = g.p;
  row.replicate = replicate;
  row.estimator = spec.label;
  return row;
}

SweepRow failed_row(SweepRow row) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  row.risk = row.excess_vs_oracle = row.excess_vs_star = row.interp_residual = row.coef_norm_sq = nan;
  row.converged = false;
  return row;
}

std::vector<SweepRow> run_task(const ExperimentConfig& config, size_t grid_index, int replicate) {
  const GridPoint& g = config.grid[grid_index];
  std::vector<SweepRow> rows;
  rows.reserve(config.estimators.size());
  const SeedSpec seed{config.master_seed, grid_index, static_cast<std::uint64_t>(replicate)};

  std::optional<FactorModel> model;
  PopulationSummary summary;
  Dataset data;
  try {
    model.emplace(build_model(config, grid_index, static_cast<std::uint64_t>(replicate)));
    summary = population_summary(*model);
    data = sample_dataset(*model, g.n, config.noise_law, seed);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error&) {
    for (const auto& spec : config.estimators) rows.push_back(failed_row(base_row(config, g, replicate, spec)));
    return rows;
  }
  const double oracle = summary.oracle_risk;

  for (const auto& spec : config.estimators) {
    SweepRow row = base_row(config, g, replicate, spec);
    row.null_risk = summary.null_risk;
    try {
      if (spec.method == Method::OracleZ) {
        const OracleZFit fit = fit_oracle_z(data.z, data.y);
        row.risk = oracle_z_risk(*model, fit.beta_hat, config.eval_mode, seed, config.noise_law);
        row.interp_residual = fit.training_residual;
        row.coef_norm_sq = fit.beta_hat.squaredNorm();
        row.converged = true;
      } else {
        const FittedPredictor fit = fit_one(spec, *model, data, seed);
        if (spec.method == Method::Null && !config.eval_mode.holdout) {
          row.risk = summary.null_risk;
        } else {
          row.risk = evaluate_risk(*model, fit.coefficients, config.eval_mode, seed, config.noise_law);
        }
        row.interp_residual = (data.x * fit.coefficients - data.y).norm();
        row.coef_norm_sq = fit.coefficients.squaredNorm();
        row.converged = fit.converged;
      }
      row.excess_vs_oracle = row.risk - oracle;
      row.excess_vs_star = row.risk - summary.risk_star;
    } catch (const Error&) {
      row = failed_row(row);
      row.null_risk = summary.null_risk;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// Runs body(i) for i in [0, count) on `threads` workers.
template <class Body>
void parallel_for(size_t count, unsigned threads, Body body) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<size_t>(count, 1))));
  if (threads == 1) {
    for (size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (size_t i = next++; i < count && !failed; i = next++) {
        try {
          body(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("FRLAB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

SweepResult run_sweep(const ExperimentConfig& config, const RunOptions& options) {
  if (config.grid.empty()) throw ConfigError("config field 'grid': must be nonempty");
  if (config.estimators.empty()) throw ConfigError("config field 'estimators': must be nonempty");
  const size_t reps = static_cast<size_t>(std::max(0, config.replicates));
  const size_t tasks = config.grid.size() * reps;
  std::vector<std::vector<SweepRow>> slots(tasks);
  parallel_for(tasks, resolve_threads(options.threads), [&](size_t t) {
    slots[t] = run_task(config, t / reps, static_cast<int>(t % reps));
  });

  SweepResult result;
  for (auto& s : slots) {
    for (auto& r : s) result.rows.push_back(std::move(r));
  }
  std::stable_sort(result.rows.begin(), result.rows.end(), [](const SweepRow& a, const SweepRow& b) {
    if (a.gamma != b.gamma) return a.gamma < b.gamma;
    if (a.estimator != b.estimator) return a.estimator < b.estimator;
    if (a.replicate != b.replicate) return a.replicate < b.replicate;
    if (a.k != b.k) return a.k < b.k;
    return a.n < b.n;
  });
  if (reps > 0) result.bounds = compute_bounds(config, options);
  return result;
}

// ---------------------------------------------------------------------------
// Bounds

namespace {

std::string conditions_json(const std::map<std::string, bool>& conditions) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, v] : conditions) j[k] = v;
  return j.dump();
}

void push_report(std::vector<BoundRow>& out, const GridPoint& g, const BoundReport& r) {
  const std::string cond = conditions_json(r.conditions);
  out.push_back({g.gamma(), g.k, g.n, g.p, r.name, r.value, cond});
  for (const auto& [name, value] : r.components) {
    out.push_back({g.gamma(), g.k, g.n, g.p, r.name + "." + name, value, cond});
  }
}

std::vector<BoundRow> bounds_for_point(const ExperimentConfig& config, size_t grid_index) {
  const GridPoint& g = config.grid[grid_index];
  std::vector<BoundRow> out;
  std::optional<FactorModel> built;
  try {
    built.emplace(build_model(config, grid_index, 0));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error&) {
    return out;  // same failure the sweep records as NaN rows
  }
  const FactorModel& model = *built;
  const PopulationSummary s = population_summary(model);
  const double n = static_cast<double>(g.n);
  push_report(out, g, null_ratio_bound(n, s));
  push_report(out, g, effective_rank_condition(s, n));
  push_report(out, g, main_excess_bound(s, n));
  push_report(out, g, purevar_bound(s, n));
  push_report(out, g, lowdim_bound(s, n));
  push_report(out, g, pcr_bound(s, n));

  std::optional<SpectrumSummary> spectrum;
  try {
    spectrum = sigma_x_spectrum(model);
  } catch (const UnsupportedSize&) {
  }
  if (spectrum) {
    push_report(out, g, bartlett_bias_variance(s, *spectrum, n));
    const auto kstar = bartlett_kstar(*spectrum, n);
    // The sandwich needs a tail eigenvalue beyond the K-th; p <= K has none.
    const bool has_tail = spectrum->eigenvalues.size() > s.k;
    KstarSandwich sw;
    if (has_tail) sw = kstar_sandwich_check(s, *spectrum, n);
    const std::map<std::string, bool> cond = {{"sandwich_applicable", has_tail},
                                              {"upper_ok", has_tail && sw.upper_ok},
                                              {"lower_ok", has_tail && sw.lower_ok},
                                              {"degenerate", has_tail && sw.degenerate},
                                              {"kstar_equals_K", kstar && *kstar == g.k}};
    out.push_back({g.gamma(), g.k, g.n, g.p, "kstar",
                   kstar ? static_cast<double>(*kstar) : std::numeric_limits<double>::quiet_NaN(),
                   conditions_json(cond)});
  }
  return out;
}

}  // namespace

std::vector<BoundRow> compute_bounds(const ExperimentConfig& config, const RunOptions& options) {
  std::vector<std::vector<BoundRow>> slots(config.grid.size());
  parallel_for(config.grid.size(), resolve_threads(options.threads),
               [&](size_t i) { slots[i] = bounds_for_point(config, i); });
  std::vector<BoundRow> out;
  for (auto& s : slots) {
    for (auto& r : s) out.push_back(std::move(r));
  }
  std::stable_sort(out.begin(), out.end(), [](const BoundRow& a, const BoundRow& b) {
    if (a.gamma != b.gamma) return a.gamma < b.gamma;
    return a.bound_name < b.bound_name;
  });
  return out;
}

}  // namespace frlab
