#include "frlab/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>

#include "frlab/sampling.hpp"

namespace frlab {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Largest eigenvalue of a PSD operator by power iteration.
template <typename Apply>
double power_iteration_norm(Eigen::Index p, Apply apply) {
  Vector v = Vector::Ones(p) / std::sqrt(static_cast<double>(p));
  double estimate = 0.0;
  for (int it = 0; it < 10000; ++it) {
    Vector w = apply(v);
    const double next = v.dot(w);
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    v = w / nw;
    if (it > 0 && std::abs(next - estimate) <= 1e-14 * std::abs(next)) return next;
    estimate = next;
  }
  return estimate;
}

Vector descending_eigenvalues(const Matrix& s) {
  return symmetric_eigen(0.5 * (s + s.transpose())).eigenvalues;
}

}  // namespace

// ---------------------------------------------------------------------------
// NoiseCov

struct DenseNoiseCache {
  Matrix sqrt;
  Vector eigenvalues;
  std::optional<Eigen::LLT<Matrix>> llt;
};

namespace {

std::shared_ptr<const DenseNoiseCache> make_dense_cache(const Matrix& m) {
  auto fresh = std::make_shared<DenseNoiseCache>();
  const SymmetricEigen dec = symmetric_eigen(m);
  fresh->eigenvalues = dec.eigenvalues;
  fresh->sqrt = psd_sqrt(m);
  const double top = dec.eigenvalues.size() ? std::abs(dec.eigenvalues(0)) : 0.0;
  const double bottom = dec.eigenvalues.size() ? dec.eigenvalues(dec.eigenvalues.size() - 1) : 0.0;
  if (top > 0.0 && bottom > kEps * static_cast<double>(m.rows()) * top) {
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() == Eigen::Success) fresh->llt = std::move(llt);
  }
  return fresh;
}

const DenseNoiseCache& dense_cache(const NoiseCov::Dense& d) { return *d.cache; }

}  // namespace

NoiseCov NoiseCov::isotropic(double variance) {
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw ContractViolation("NoiseCov: isotropic variance must be positive and finite");
  }
  return NoiseCov(Isotropic{variance});
}

NoiseCov NoiseCov::diagonal(Vector variances) {
  if (variances.size() == 0 || !variances.allFinite() || !(variances.minCoeff() > 0.0)) {
    throw ContractViolation("NoiseCov: diagonal variances must be positive and finite");
  }
  return NoiseCov(Diagonal{std::move(variances)});
}

NoiseCov NoiseCov::dense(Matrix matrix) {
  require_finite(matrix, "NoiseCov::dense");
  if (!is_symmetric(matrix, 1e-12)) throw ContractViolation("NoiseCov: dense covariance is not symmetric");
  auto cache = make_dense_cache(matrix);  // throws NotPsd
  return NoiseCov(Dense{std::move(matrix), std::move(cache)});
}

void NoiseCov::validate(Eigen::Index p) const {
  if (const auto* d = std::get_if<Diagonal>(&repr_)) {
    if (d->variances.size() != p) throw DimensionMismatch("NoiseCov: diagonal length differs from p");
  } else if (const auto* m = std::get_if<Dense>(&repr_)) {
    if (m->matrix.rows() != p || m->matrix.cols() != p) throw DimensionMismatch("NoiseCov: dense size differs from p");
  }
}

Vector NoiseCov::apply(const Vector& v) const {
  return std::visit(
      [&](const auto& r) -> Vector {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, Zero>) return Vector::Zero(v.size());
        else if constexpr (std::is_same_v<T, Isotropic>) return r.variance * v;
        else if constexpr (std::is_same_v<T, Diagonal>) return r.variances.cwiseProduct(v);
        else return r.matrix * v;
      },
      repr_);
}

double NoiseCov::quadform(const Vector& v) const {
  return std::visit(
      [&](const auto& r) -> double {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, Zero>) return 0.0;
        else if constexpr (std::is_same_v<T, Isotropic>) return r.variance * v.squaredNorm();
        else if constexpr (std::is_same_v<T, Diagonal>) return v.cwiseAbs2().dot(r.variances);
        else return v.dot(r.matrix * v);
      },
      repr_);
}

double NoiseCov::trace(Eigen::Index p) const {
  return std::visit(
      [&](const auto& r) -> double {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, Zero>) return 0.0;
        else if constexpr (std::is_same_v<T, Isotropic>) return r.variance * static_cast<double>(p);
        else if constexpr (std::is_same_v<T, Diagonal>) return r.variances.sum();
        else return r.matrix.trace();
      },
      repr_);
}

double NoiseCov::opnorm(Eigen::Index) const {
  return std::visit(
      [&](const auto& r) -> double {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, Zero>) return 0.0;
        else if constexpr (std::is_same_v<T, Isotropic>) return r.variance;
        else if constexpr (std::is_same_v<T, Diagonal>) return r.variances.maxCoeff();
        else return std::max(0.0, dense_cache(r).eigenvalues(0));
      },
      repr_);
}

double NoiseCov::min_eigenvalue(Eigen::Index) const {
  return std::visit(
      [&](const auto& r) -> double {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, Zero>) return 0.0;
        else if constexpr (std::is_same_v<T, Isotropic>) return r.variance;
        else if constexpr (std::is_same_v<T, Diagonal>) return r.variances.minCoeff();
        else {
          const Vector& ev = dense_cache(r).eigenvalues;
          return std::max(0.0, ev(ev.size() - 1));
        }
      },
      repr_);
}

bool NoiseCov::invertible(Eigen::Index) const {
  if (is_zero()) return false;
  if (const auto* m = std::get_if<Dense>(&repr_)) return dense_cache(*m).llt.has_value();
  return true;
}

Matrix NoiseCov::inverse_apply(const Matrix& m) const {
  return std::visit(
      [&](const auto& r) -> Matrix {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, Zero>) {
          throw SingularMatrix("NoiseCov: zero covariance has no inverse");
        } else if constexpr (std::is_same_v<T, Isotropic>) {
          return m / r.variance;
        } else if constexpr (std::is_same_v<T, Diagonal>) {
          return r.variances.cwiseInverse().asDiagonal() * m;
        } else {
          const auto& cache = dense_cache(r);
          if (!cache.llt) throw SingularMatrix("NoiseCov: dense covariance is singular");
          return cache.llt->solve(m);
        }
      },
      repr_);
}

Matrix NoiseCov::right_multiply_sqrt(const Matrix& m) const {
  return std::visit(
      [&](const auto& r) -> Matrix {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, Zero>) return Matrix::Zero(m.rows(), m.cols());
        else if constexpr (std::is_same_v<T, Isotropic>) return std::sqrt(r.variance) * m;
        else if constexpr (std::is_same_v<T, Diagonal>) return m * r.variances.cwiseSqrt().asDiagonal();
        else return m * dense_cache(r).sqrt;
      },
      repr_);
}

Matrix NoiseCov::to_dense(Eigen::Index p) const {
  return std::visit(
      [&](const auto& r) -> Matrix {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, Zero>) return Matrix::Zero(p, p);
        else if constexpr (std::is_same_v<T, Isotropic>) return r.variance * Matrix::Identity(p, p);
        else if constexpr (std::is_same_v<T, Diagonal>) return r.variances.asDiagonal();
        else return r.matrix;
      },
      repr_);
}

std::string NoiseCov::kind_name() const {
  static const char* names[] = {"zero", "isotropic", "diagonal", "dense"};
  return names[repr_.index()];
}

// ---------------------------------------------------------------------------
// FactorModel

FactorModel::FactorModel(Matrix loading, Matrix factor_cov, NoiseCov noise_cov, Vector beta,
                         double sigma_eps, ModelOptions options)
    : loading_(std::move(loading)),
      factor_cov_(std::move(factor_cov)),
      noise_cov_(std::move(noise_cov)),
      beta_(std::move(beta)),
      sigma_eps_(sigma_eps) {
  const Eigen::Index p = loading_.rows();
  const Eigen::Index k = loading_.cols();
  if (p < 1 || k < 1) throw DimensionMismatch("FactorModel: need p >= 1 and K >= 1");
  if (k > p) throw DimensionMismatch("FactorModel: K exceeds p");
  if (factor_cov_.rows() != k || factor_cov_.cols() != k) throw DimensionMismatch("FactorModel: Sigma_Z must be K x K");
  if (beta_.size() != k) throw DimensionMismatch("FactorModel: beta must have length K");
  if (!(sigma_eps_ >= 0.0) || !std::isfinite(sigma_eps_)) throw ContractViolation("FactorModel: sigma_eps must be finite and >= 0");
  require_finite(loading_, "FactorModel loading");
  require_finite(beta_, "FactorModel beta");
  if (!is_symmetric(factor_cov_, 1e-12)) throw ContractViolation("FactorModel: Sigma_Z is not symmetric");
  noise_cov_.validate(p);

  factor_sqrt_ = psd_sqrt(factor_cov_);
  signal_core_ = loading_ * factor_sqrt_;
  sigma_xy_ = loading_ * (factor_cov_ * beta_);
  signal_eigenvalues_ = descending_eigenvalues(signal_core_.transpose() * signal_core_).cwiseMax(0.0);

  if (options.require_full_rank) {
    const SvdResult a = svd(loading_);
    const double cutoff = RankPolicy{}.cutoff_for(p, k) * a.singulars(0);
    if (!(a.singulars(k - 1) > cutoff)) {
      throw ModelDegenerate("loading matrix A is rank deficient: rank(A) < K");
    }
    const Vector fz = descending_eigenvalues(factor_cov_);
    if (!(fz(k - 1) > RankPolicy{}.cutoff_for(k, k) * std::max(fz(0), 0.0))) {
      throw ModelDegenerate("factor covariance Sigma_Z is rank deficient: rank(Sigma_Z) < K");
    }
  }
}

// ---------------------------------------------------------------------------
// Sigma_X functionals

Vector sigma_x_apply(const FactorModel& model, const Vector& v) {
  if (v.size() != model.p()) throw DimensionMismatch("sigma_x_apply: vector length differs from p");
  const Vector av = model.loading().transpose() * v;
  return model.loading() * (model.factor_cov() * av) + model.noise_cov().apply(v);
}

double sigma_x_quadform(const FactorModel& model, const Vector& v) {
  if (v.size() != model.p()) throw DimensionMismatch("sigma_x_quadform: vector length differs from p");
  const Vector core = model.signal_core().transpose() * v;
  return core.squaredNorm() + model.noise_cov().quadform(v);
}

Matrix sigma_x_dense(const FactorModel& model, Eigen::Index cap) {
  if (model.p() > cap) throw UnsupportedSize("sigma_x_dense: p exceeds the dense cap");
  Matrix s = model.signal_core() * model.signal_core().transpose() + model.noise_cov().to_dense(model.p());
  return 0.5 * (s + s.transpose());
}

Vector best_linear_predictor_woodbury(const FactorModel& model) {
  const NoiseCov& noise = model.noise_cov();
  if (!noise.invertible(model.p())) throw SingularMatrix("best_linear_predictor: Sigma_E is not invertible");
  const Matrix& abar = model.signal_core();
  const Matrix einv_abar = noise.inverse_apply(abar);
  Matrix gbar = Matrix::Identity(model.k(), model.k()) + abar.transpose() * einv_abar;
  gbar = 0.5 * (gbar + gbar.transpose());
  const Vector beta_bar = model.factor_sqrt() * model.beta();
  Eigen::LDLT<Matrix> solver(gbar);
  if (solver.info() != Eigen::Success) throw NumericFailure("Woodbury core solve failed", gbar.rows(), gbar.cols());
  return einv_abar * solver.solve(beta_bar);
}

Vector best_linear_predictor_dense(const FactorModel& model) {
  const Matrix s = sigma_x_dense(model);
  return pseudoinverse_apply(s, model.sigma_xy());
}

Vector best_linear_predictor(const FactorModel& model) {
  const NoiseCov& noise = model.noise_cov();
  if (noise.is_zero()) {
    // (Abar Abar')^+ Abar beta_bar = Abar'^+ beta_bar.
    const SvdResult dec = svd(model.signal_core());
    const double cutoff = absolute_cutoff(dec, model.p(), model.k());
    const Eigen::Index r = numerical_rank(dec.singulars, cutoff);
    const Vector beta_bar = model.factor_sqrt() * model.beta();
    return dec.left.leftCols(r) *
           (dec.singulars.head(r).cwiseInverse().asDiagonal() * (dec.right.leftCols(r).transpose() * beta_bar));
  }
  if (noise.invertible(model.p())) return best_linear_predictor_woodbury(model);
  return best_linear_predictor_dense(model);
}

double risk_exact(const FactorModel& model, const Vector& alpha) {
  if (alpha.size() != model.p()) throw DimensionMismatch("risk_exact: coefficient length differs from p");
  const double null = model.beta().dot(model.factor_cov() * model.beta()) + model.sigma_eps() * model.sigma_eps();
  return sigma_x_quadform(model, alpha) - 2.0 * alpha.dot(model.sigma_xy()) + null;
}

namespace {

// With diagonal noise, every coordinate outside the row support of the signal
// core is an eigenvector of Sigma_X; only the support block needs a dense
// eigensolve.
struct DiagonalSplit {
  std::vector<Eigen::Index> support;
  std::vector<Eigen::Index> rest;
  SymmetricEigen block;
  Vector rest_values;
};

std::optional<DiagonalSplit> diagonal_split(const FactorModel& model, Eigen::Index cap) {
  const auto* diag = std::get_if<NoiseCov::Diagonal>(&model.noise_cov().repr());
  if (diag == nullptr) return std::nullopt;
  const Matrix& core = model.signal_core();
  DiagonalSplit out;
  for (Eigen::Index i = 0; i < model.p(); ++i) {
    (core.row(i).squaredNorm() > 0.0 ? out.support : out.rest).push_back(i);
  }
  if (static_cast<Eigen::Index>(out.support.size()) > cap) return std::nullopt;
  const Matrix rows = core(out.support, Eigen::all);
  Matrix block = rows * rows.transpose();
  for (size_t i = 0; i < out.support.size(); ++i) {
    block(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += diag->variances(out.support[i]);
  }
  if (out.support.empty()) {
    out.block.eigenvalues = Vector(0);
    out.block.eigenvectors = Matrix(0, 0);
  } else {
    out.block = symmetric_eigen(0.5 * (block + block.transpose()));
  }
  out.rest_values = diag->variances(out.rest);
  return out;
}

double sigma_x_opnorm(const FactorModel& model) {
  const NoiseCov& noise = model.noise_cov();
  const double top_signal = model.signal_eigenvalues()(0);
  if (noise.is_zero()) return top_signal;
  if (const auto* iso = std::get_if<NoiseCov::Isotropic>(&noise.repr())) return top_signal + iso->variance;
  if (const auto split = diagonal_split(model, kDenseCap)) {
    double top = split->block.eigenvalues.size() ? split->block.eigenvalues(0) : 0.0;
    if (split->rest_values.size()) top = std::max(top, split->rest_values.maxCoeff());
    return std::max(0.0, top);
  }
  if (model.p() <= kDenseCap) return std::max(0.0, descending_eigenvalues(sigma_x_dense(model))(0));
  return power_iteration_norm(model.p(), [&](const Vector& v) { return sigma_x_apply(model, v); });
}

}  // namespace

PopulationSummary population_summary(const FactorModel& model) {
  PopulationSummary s;
  const NoiseCov& noise = model.noise_cov();
  const Eigen::Index p = model.p();
  const Eigen::Index k = model.k();
  s.p = p;
  s.k = k;

  s.lambda_k_signal = model.signal_eigenvalues()(k - 1);
  s.lambda_1_signal = model.signal_eigenvalues()(0);
  const Matrix ata = model.loading().transpose() * model.loading();
  s.lambda_k_ata = std::max(0.0, descending_eigenvalues(ata)(k - 1));
  s.lambda_k_factor = std::max(0.0, descending_eigenvalues(model.factor_cov())(k - 1));

  s.sigma_e_opnorm = noise.opnorm(p);
  s.sigma_e_trace = noise.trace(p);
  if (noise.invertible(p)) s.kappa_sigma_e = s.sigma_e_opnorm / noise.min_eigenvalue(p);
  s.xi = noise.is_zero() ? kInfinity : s.lambda_k_signal / s.sigma_e_opnorm;

  const EffectiveRank re_e = effective_rank(s.sigma_e_trace, s.sigma_e_opnorm);
  s.re_sigma_e = re_e.value;
  s.re_sigma_e_degenerate = re_e.degenerate;

  s.sigma_x_trace = model.signal_core().squaredNorm() + s.sigma_e_trace;
  s.sigma_x_opnorm = sigma_x_opnorm(model);
  s.re_sigma_x = effective_rank(s.sigma_x_trace, s.sigma_x_opnorm).value;

  s.alpha_star = best_linear_predictor(model);
  s.alpha_star_norm_sq = s.alpha_star.squaredNorm();
  s.alpha_star_sx_norm_sq = sigma_x_quadform(model, s.alpha_star);
  s.oracle_risk = model.sigma_eps() * model.sigma_eps();
  s.beta_sz_norm_sq = model.beta().dot(model.factor_cov() * model.beta());
  s.null_risk = s.beta_sz_norm_sq + s.oracle_risk;
  s.risk_star = risk_exact(model, s.alpha_star);
  if (noise.is_zero()) s.risk_star = std::max(s.risk_star, s.oracle_risk);

  if (s.lambda_k_ata > 0.0) {
    Eigen::LDLT<Matrix> solver(ata);
    s.beta_ata_inv = model.beta().dot(solver.solve(model.beta()));
  }

  if (noise.is_zero()) {
    s.gap_lower = 0.0;
    s.gap_upper = 0.0;
  } else if (noise.invertible(p) && s.lambda_k_ata > 0.0) {
    Matrix core = model.loading().transpose() * noise.inverse_apply(model.loading());
    core = 0.5 * (core + core.transpose());
    Eigen::LDLT<Matrix> solver(core);
    const double g = model.beta().dot(solver.solve(model.beta()));
    s.gap_upper = g;
    s.gap_lower = s.xi / (1.0 + s.xi) * g;
  } else {
    s.gap_lower = 0.0;
    s.gap_upper = s.beta_sz_norm_sq * inverse_snr(s.xi);
  }
  return s;
}

// ---------------------------------------------------------------------------

ExcessDecomposition excess_decomposition(const FactorModel& model, const Matrix& x, const Matrix& z,
                                         const Vector& eps) {
  const Eigen::Index n = x.rows();
  if (x.cols() != model.p()) throw DimensionMismatch("excess_decomposition: X must have p columns");
  if (z.rows() != n || z.cols() != model.k()) throw DimensionMismatch("excess_decomposition: Z must be n x K");
  if (eps.size() != n) throw DimensionMismatch("excess_decomposition: eps must have length n");

  const SvdResult dec = svd(x);
  const double cutoff = absolute_cutoff(dec, x.rows(), x.cols());
  Matrix rhs(n, model.k() + 2);
  rhs.leftCols(model.k()) = z;
  rhs.col(model.k()) = eps;
  rhs.col(model.k() + 1) = z * model.beta() + eps;
  const Matrix solved = pseudoinverse_apply(dec, rhs, cutoff);
  const Matrix xpz = solved.leftCols(model.k());
  const Vector xpe = solved.col(model.k());
  const Vector ahat = solved.col(model.k() + 1);

  const Matrix& a = model.loading();
  const Matrix& sz = model.factor_cov();
  const NoiseCov& se = model.noise_cov();
  const Vector& beta = model.beta();

  ExcessDecomposition out;
  const Vector bias_vec = xpz * beta;
  out.b1 = se.quadform(bias_vec);
  const Vector b2_vec = a.transpose() * bias_vec - beta;
  out.b2 = b2_vec.dot(sz * b2_vec);
  out.v1 = se.quadform(xpe);
  const Vector v2_vec = a.transpose() * xpe;
  out.v2 = v2_vec.dot(sz * v2_vec);
  const Vector latent_err = a.transpose() * ahat - beta;
  out.exact_excess = se.quadform(ahat) + latent_err.dot(sz * latent_err);
  out.coefficients = ahat;
  return out;
}

SpectrumSummary sigma_x_spectrum(const FactorModel& model, Eigen::Index cap) {
  const NoiseCov& noise = model.noise_cov();
  SpectrumSummary out;
  if (noise.is_zero() || noise.is_isotropic()) {
    const double shift = noise.is_zero() ? 0.0 : std::get<NoiseCov::Isotropic>(noise.repr()).variance;
    out.eigenvalues = Vector::Constant(model.p(), shift);
    out.eigenvalues.head(model.k()) += model.signal_eigenvalues();
    out.provenance = SpectrumProvenance::IsotropicShift;
    return out;
  }
  if (const auto split = diagonal_split(model, cap)) {
    out.eigenvalues.resize(model.p());
    out.eigenvalues << split->block.eigenvalues, split->rest_values;
    std::sort(out.eigenvalues.data(), out.eigenvalues.data() + out.eigenvalues.size(), std::greater<>());
    out.eigenvalues = out.eigenvalues.cwiseMax(0.0);
    out.provenance = SpectrumProvenance::Dense;
    return out;
  }
  if (model.p() > cap) throw UnsupportedSize("sigma_x_spectrum: dense spectrum needed beyond the dense cap");
  out.eigenvalues = descending_eigenvalues(sigma_x_dense(model, cap)).cwiseMax(0.0);
  out.provenance = SpectrumProvenance::Dense;
  return out;
}

Matrix sigma_x_top_eigenvectors(const FactorModel& model, Eigen::Index k, Eigen::Index cap) {
  if (k < 1 || k > model.p()) throw ContractViolation("sigma_x_top_eigenvectors: k out of range");
  const NoiseCov& noise = model.noise_cov();
  if ((noise.is_zero() || noise.is_isotropic()) && k <= model.k()) {
    const SvdResult dec = svd(model.signal_core());
    const double cutoff = absolute_cutoff(dec, model.p(), model.k());
    // An isotropic shift leaves eigenvectors alone as long as the k-th signal
    // eigenvalue is separated from the flat tail.
    if (dec.singulars(k - 1) > cutoff) return dec.left.leftCols(k);
  }
  if (const auto split = diagonal_split(model, cap)) {
    // Merge the block eigenpairs with the coordinate axes, largest first.
    Matrix out = Matrix::Zero(model.p(), k);
    const Vector& bv = split->block.eigenvalues;
    Eigen::Index bi = 0, ri = 0;
    std::vector<Eigen::Index> rest_order(split->rest.size());
    std::iota(rest_order.begin(), rest_order.end(), Eigen::Index{0});
    std::stable_sort(rest_order.begin(), rest_order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return split->rest_values(a) > split->rest_values(b);
    });
    for (Eigen::Index c = 0; c < k; ++c) {
      const bool take_block = bi < bv.size() &&
                              (ri >= static_cast<Eigen::Index>(rest_order.size()) ||
                               bv(bi) >= split->rest_values(rest_order[static_cast<size_t>(ri)]));
      if (take_block) {
        for (size_t i = 0; i < split->support.size(); ++i) {
          out(split->support[i], c) = split->block.eigenvectors(static_cast<Eigen::Index>(i), bi);
        }
        ++bi;
      } else {
        out(split->rest[static_cast<size_t>(rest_order[static_cast<size_t>(ri)])], c) = 1.0;
        ++ri;
      }
    }
    return out;
  }
  if (model.p() > cap) throw UnsupportedSize("sigma_x_top_eigenvectors: population eigenvectors unavailable beyond the dense cap");
  return symmetric_eigen(sigma_x_dense(model, cap)).eigenvectors.leftCols(k);
}

SpectrumDiagnostics spectrum_diagnostics(const FactorModel& model, Eigen::Index cap) {
  SpectrumDiagnostics out;
  out.eigenvalues = sigma_x_spectrum(model, cap).eigenvalues;
  const Eigen::Index p = model.p();
  const Eigen::Index k = model.k();
  const double scale = std::max(1.0, out.eigenvalues(0));
  const double tol = 1e-9 * scale;
  const NoiseCov& noise = model.noise_cov();
  const double floor = noise.min_eigenvalue(p);
  const double ceiling = noise.opnorm(p);
  const Vector fz = descending_eigenvalues(model.factor_cov());
  const Vector ata = descending_eigenvalues(model.loading().transpose() * model.loading());

  out.lambda_floor_ok = out.eigenvalues.minCoeff() >= floor - tol;
  out.lambda_k_growth = out.eigenvalues(k - 1) >= fz(k - 1) * ata(k - 1) - tol;
  out.tail_bounded = true;
  for (Eigen::Index i = k; i < p; ++i) {
    if (out.eigenvalues(i) > ceiling + tol) out.tail_bounded = false;
  }
  return out;
}

double cluster_snr_lower_bound(const FactorModel& model) {
  const Matrix& a = model.loading();
  std::vector<Eigen::Index> sizes(static_cast<size_t>(model.k()), 0);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    int nonzero = 0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const double v = a(i, j);
      if (v == 0.0) continue;
      if (std::abs(v) != 1.0) throw ContractViolation("cluster_snr_lower_bound: loading entries must be 0 or +-1");
      ++nonzero;
      ++sizes[static_cast<size_t>(j)];
    }
    if (nonzero > 1) throw ContractViolation("cluster_snr_lower_bound: a row belongs to more than one cluster");
  }
  const double smallest = static_cast<double>(*std::min_element(sizes.begin(), sizes.end()));
  const double lk = std::max(0.0, descending_eigenvalues(model.factor_cov())(model.k() - 1));
  const double noise = model.noise_cov().opnorm(model.p());
  if (noise == 0.0) return kInfinity;
  return smallest * lk / noise;
}

ResidualCheck gaussian_residual_check(const FactorModel& model, std::int64_t sample_count,
                                      std::uint64_t seed) {
  ResidualCheck out;
  const Vector alpha = best_linear_predictor(model);
  const Vector resid = sigma_x_apply(model, alpha) - model.sigma_xy();
  out.identity_residual = resid.norm() / std::max(1.0, model.sigma_xy().norm());
  out.identity_ok = out.identity_residual <= 1e-8;

  const Eigen::Index p = model.p();
  Vector sx = Vector::Zero(p), sxx = Vector::Zero(p), sxe = Vector::Zero(p);
  double se = 0.0, see = 0.0;
  constexpr std::int64_t kChunk = 10000;
  std::uint64_t chunk_index = 0;
  for (std::int64_t done = 0; done < sample_count; done += kChunk, ++chunk_index) {
    const auto rows = static_cast<Eigen::Index>(std::min(kChunk, sample_count - done));
    const Dataset data = sample_dataset(model, rows, NoiseLaw::Gaussian, SeedSpec{seed, chunk_index, 0});
    const Vector eta = data.y - data.x * alpha;
    sx += data.x.colwise().sum().transpose();
    sxx += data.x.cwiseAbs2().colwise().sum().transpose();
    sxe += data.x.transpose() * eta;
    se += eta.sum();
    see += eta.squaredNorm();
  }
  const double m = static_cast<double>(sample_count);
  if (m < 2) return out;
  const double var_eta = see / m - (se / m) * (se / m);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double var_x = sxx(j) / m - (sx(j) / m) * (sx(j) / m);
    if (!(var_x > 0.0) || !(var_eta > 0.0)) continue;
    const double cov = sxe(j) / m - (sx(j) / m) * (se / m);
    out.max_abs_correlation = std::max(out.max_abs_correlation, std::abs(cov) / std::sqrt(var_x * var_eta));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Closed forms for the isotropic family

PopulationSummary isotropic_summary(const IsotropicFactorSpec& spec) {
  if (spec.k < 1 || spec.k > spec.p) throw DimensionMismatch("isotropic_summary: need 1 <= K <= p");
  if (spec.beta.size() != spec.k) throw DimensionMismatch("isotropic_summary: beta must have length K");
  if (!(spec.a_sq > 0.0) || !(spec.factor_variance > 0.0) || !(spec.noise_variance >= 0.0)) {
    throw ContractViolation("isotropic_summary: scales must be positive");
  }
  PopulationSummary s;
  const double p = static_cast<double>(spec.p);
  const double k = static_cast<double>(spec.k);
  const double signal = spec.a_sq * spec.factor_variance;
  const double se2 = spec.noise_variance;
  const double denom = se2 + signal;
  s.p = spec.p;
  s.k = spec.k;
  s.lambda_k_signal = signal;
  s.lambda_1_signal = signal;
  s.lambda_k_ata = spec.a_sq;
  s.lambda_k_factor = spec.factor_variance;
  s.sigma_e_opnorm = se2;
  s.sigma_e_trace = se2 * p;
  if (se2 > 0.0) s.kappa_sigma_e = 1.0;
  s.xi = se2 > 0.0 ? signal / se2 : kInfinity;
  const EffectiveRank re_e = effective_rank(s.sigma_e_trace, s.sigma_e_opnorm);
  s.re_sigma_e = re_e.value;
  s.re_sigma_e_degenerate = re_e.degenerate;
  s.sigma_x_opnorm = signal + se2;
  s.sigma_x_trace = k * signal + p * se2;
  s.re_sigma_x = s.sigma_x_trace / s.sigma_x_opnorm;
  s.beta_sz_norm_sq = spec.factor_variance * spec.beta.squaredNorm();
  s.alpha_star_norm_sq = signal / (denom * denom) * s.beta_sz_norm_sq;
  s.alpha_star_sx_norm_sq = signal / denom * s.beta_sz_norm_sq;
  s.oracle_risk = spec.sigma_eps * spec.sigma_eps;
  s.null_risk = s.beta_sz_norm_sq + s.oracle_risk;
  s.risk_star = s.null_risk - s.alpha_star_sx_norm_sq;
  s.beta_ata_inv = spec.beta.squaredNorm() / spec.a_sq;
  if (se2 > 0.0) {
    s.gap_upper = se2 * spec.beta.squaredNorm() / spec.a_sq;
    s.gap_lower = s.xi / (1.0 + s.xi) * s.gap_upper;
  }
  return s;
}

SpectrumSummary isotropic_spectrum(const IsotropicFactorSpec& spec) {
  SpectrumSummary out;
  out.eigenvalues = Vector::Constant(spec.p, spec.noise_variance);
  out.eigenvalues.head(spec.k).array() += spec.a_sq * spec.factor_variance;
  out.provenance = SpectrumProvenance::IsotropicShift;
  return out;
}

}  // namespace frlab
