#include "frlab/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace frlab {

namespace {

void check_xy(const Matrix& x, const Vector& y, const char* who) {
  if (x.rows() != y.size()) throw DimensionMismatch(std::string(who) + ": X rows differ from length of y");
  require_finite(x, who);
  require_finite(y, who);
}

FittedPredictor finish(Vector coef, Method method, const Matrix& x, const Vector& y) {
  FittedPredictor out;
  out.metadata["training_residual"] = (x * coef - y).norm();
  out.metadata["coef_norm_sq"] = coef.squaredNorm();
  out.coefficients = std::move(coef);
  out.method = method;
  return out;
}

// coef = basis (X basis)^+ y
Vector regress_on_basis(const Matrix& x, const Vector& y, const Matrix& basis) {
  const Matrix projected = x * basis;
  return basis * pseudoinverse_apply(projected, y);
}

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

}  // namespace

std::string to_string(Method method) {
  switch (method) {
    case Method::MinNorm: return "min_norm";
    case Method::PcrEmpirical: return "pcr_empirical";
    case Method::PcrStylized: return "pcr_stylized";
    case Method::Ridge: return "ridge";
    case Method::Lasso: return "lasso";
    case Method::Null: return "null";
    case Method::OracleZ: return "oracle_z";
  }
  return "unknown";
}

FittedPredictor fit_min_norm(const Matrix& x, const Vector& y) {
  check_xy(x, y, "fit_min_norm");
  const SvdResult dec = svd(x);
  Vector coef = Vector::Zero(x.cols());
  Eigen::Index rank = 0;
  if (dec.singulars.size() > 0) {
    const double cutoff = absolute_cutoff(dec, x.rows(), x.cols());
    rank = numerical_rank(dec.singulars, cutoff);
    coef = pseudoinverse_apply(dec, Matrix(y), cutoff).col(0);
  }
  FittedPredictor out = finish(std::move(coef), Method::MinNorm, x, y);
  out.metadata["rank"] = static_cast<double>(rank);
  return out;
}

FittedPredictor fit_pcr_empirical(const Matrix& x, const Vector& y, Eigen::Index k) {
  check_xy(x, y, "fit_pcr_empirical");
  if (k < 1 || k > std::min(x.rows(), x.cols())) throw ContractViolation("fit_pcr_empirical: k out of range");
  // Right singular vectors of X are the eigenvectors of X'X/n.
  const SvdResult dec = svd(x);
  FittedPredictor out = finish(regress_on_basis(x, y, dec.right.leftCols(k)), Method::PcrEmpirical, x, y);
  out.metadata["k"] = static_cast<double>(k);
  return out;
}

FittedPredictor fit_pcr_stylized(const FactorModel& model, const Matrix& x, const Vector& y, Eigen::Index k) {
  check_xy(x, y, "fit_pcr_stylized");
  if (x.cols() != model.p()) throw DimensionMismatch("fit_pcr_stylized: X must have p columns");
  const Matrix basis = sigma_x_top_eigenvectors(model, k);
  FittedPredictor out = finish(regress_on_basis(x, y, basis), Method::PcrStylized, x, y);
  out.metadata["k"] = static_cast<double>(k);
  return out;
}

FittedPredictor fit_ridge(const Matrix& x, const Vector& y, double lambda) {
  check_xy(x, y, "fit_ridge");
  if (!(lambda > 0.0)) throw ContractViolation("fit_ridge: lambda must be positive");
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  Vector coef;
  if (p > n) {
    Matrix g = x * x.transpose();
    g.diagonal().array() += lambda;
    Eigen::LLT<Matrix> llt(g);
    if (llt.info() != Eigen::Success) throw NumericFailure("ridge dual solve failed", n, n);
    coef = x.transpose() * llt.solve(y);
  } else {
    Matrix h = x.transpose() * x;
    h.diagonal().array() += lambda;
    Eigen::LLT<Matrix> llt(h);
    if (llt.info() != Eigen::Success) throw NumericFailure("ridge primal solve failed", p, p);
    coef = llt.solve(x.transpose() * y);
  }
  FittedPredictor out = finish(std::move(coef), Method::Ridge, x, y);
  out.metadata["lambda"] = lambda;
  return out;
}

double lasso_kkt_residual(const Matrix& x, const Vector& y, const Vector& coef, double lambda) {
  const double n = static_cast<double>(x.rows());
  const Vector grad = x.transpose() * (y - x * coef) / n;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < coef.size(); ++j) {
    const double v = coef(j) != 0.0 ? std::abs(grad(j) - lambda * (coef(j) > 0 ? 1.0 : -1.0))
                                    : std::max(0.0, std::abs(grad(j)) - lambda);
    worst = std::max(worst, v);
  }
  return worst;
}

FittedPredictor fit_lasso(const Matrix& x, const Vector& y, double lambda, const LassoOptions& options,
                          const Vector* warm_start) {
  check_xy(x, y, "fit_lasso");
  if (!(lambda >= 0.0)) throw ContractViolation("fit_lasso: lambda must be >= 0");
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const double nd = static_cast<double>(n);

  Vector coef = Vector::Zero(p);
  if (warm_start != nullptr) {
    if (warm_start->size() != p) throw DimensionMismatch("fit_lasso: warm start has wrong length");
    coef = *warm_start;
  }
  Vector col_sq = x.colwise().squaredNorm().transpose() / nd;
  Vector resid = y - x * coef;

  const double null_objective = y.squaredNorm() / (2.0 * nd);
  const double grad_scale = (x.transpose() * y).cwiseAbs().maxCoeff() / nd;
  const double gap_tol = options.gap_tolerance * std::max(null_objective, std::numeric_limits<double>::min());
  const double step_tol = 1e-3 * gap_tol;

  auto update = [&](Eigen::Index j) -> double {
    if (col_sq(j) == 0.0) {
      coef(j) = 0.0;
      return 0.0;
    }
    const double old = coef(j);
    const double rho = x.col(j).dot(resid) / nd + col_sq(j) * old;
    const double next = soft_threshold(rho, lambda) / col_sq(j);
    if (next != old) {
      resid.noalias() -= (next - old) * x.col(j);
      coef(j) = next;
    }
    const double d = next - old;
    return col_sq(j) * d * d;
  };

  auto duality_gap = [&]() -> double {
    const Vector grad = x.transpose() * resid / nd;
    const double gmax = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
    const double primal = resid.squaredNorm() / (2.0 * nd) + lambda * coef.lpNorm<1>();
    const double scale = gmax > lambda ? lambda / gmax : 1.0;
    const double dual = (y.squaredNorm() - (y - scale * resid).squaredNorm()) / (2.0 * nd);
    return primal - dual;
  };

  long sweeps = 0;
  double gap = duality_gap();
  bool converged = false;
  std::vector<Eigen::Index> active;
  while (sweeps < options.max_sweeps) {
    if (lambda > 0.0 ? gap <= gap_tol
                     : lasso_kkt_residual(x, y, coef, 0.0) <= options.gap_tolerance * std::max(grad_scale, 1e-300)) {
      converged = true;
      break;
    }
    for (Eigen::Index j = 0; j < p; ++j) update(j);
    ++sweeps;
    active.clear();
    for (Eigen::Index j = 0; j < p; ++j) {
      if (coef(j) != 0.0) active.push_back(j);
    }
    while (sweeps < options.max_sweeps) {
      double biggest = 0.0;
      for (Eigen::Index j : active) biggest = std::max(biggest, update(j));
      ++sweeps;
      if (biggest <= step_tol) break;
    }
    gap = duality_gap();
  }
  if (!converged) {
    converged = lambda > 0.0 ? gap <= gap_tol
                             : lasso_kkt_residual(x, y, coef, 0.0) <= options.gap_tolerance * std::max(grad_scale, 1e-300);
  }

  FittedPredictor out = finish(std::move(coef), Method::Lasso, x, y);
  out.converged = converged;
  out.metadata["lambda"] = lambda;
  out.metadata["iterations"] = static_cast<double>(sweeps);
  out.metadata["duality_gap"] = std::max(0.0, gap);
  out.metadata["converged"] = converged ? 1.0 : 0.0;
  return out;
}

FittedPredictor fit_null(Eigen::Index p, const Matrix& x, const Vector& y) {
  return finish(Vector::Zero(p), Method::Null, x, y);
}

OracleZFit fit_oracle_z(const Matrix& z, const Vector& y) {
  check_xy(z, y, "fit_oracle_z");
  OracleZFit out;
  out.beta_hat = pseudoinverse_apply(z, y);
  out.training_residual = (z * out.beta_hat - y).norm();
  return out;
}

// ---------------------------------------------------------------------------

void CvPlan::validate() const {
  if (folds < 2) throw ContractViolation("CvPlan: need at least 2 folds");
  if (penalty_grid.empty()) throw ContractViolation("CvPlan: penalty grid is empty");
  for (size_t i = 0; i < penalty_grid.size(); ++i) {
    if (!(penalty_grid[i] > 0.0) || !std::isfinite(penalty_grid[i])) throw ContractViolation("CvPlan: penalties must be positive");
    if (i > 0 && penalty_grid[i] < penalty_grid[i - 1]) throw ContractViolation("CvPlan: penalty grid must be sorted");
  }
}

std::vector<Vector> ridge_path(const Matrix& x, const Vector& y, std::span<const double> lambdas) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  std::vector<Vector> out;
  out.reserve(lambdas.size());
  if (p > n) {
    const SymmetricEigen dec = symmetric_eigen(x * x.transpose());
    const Vector proj = dec.eigenvectors.transpose() * y;
    const Matrix xu = x.transpose() * dec.eigenvectors;
    for (double lambda : lambdas) {
      const Vector w = proj.array() / (dec.eigenvalues.array().max(0.0) + lambda);
      out.push_back(xu * w);
    }
  } else {
    const SymmetricEigen dec = symmetric_eigen(x.transpose() * x);
    const Vector proj = dec.eigenvectors.transpose() * (x.transpose() * y);
    for (double lambda : lambdas) {
      const Vector w = proj.array() / (dec.eigenvalues.array().max(0.0) + lambda);
      out.push_back(dec.eigenvectors * w);
    }
  }
  return out;
}

namespace {

// Upper-triangular Cholesky factor R of G = X_A'X_A / n for a growing and
// shrinking active set A.
class ActiveCholesky {
 public:
  explicit ActiveCholesky(Eigen::Index capacity) : r_(Matrix::Zero(capacity, capacity)) {}

  Eigen::Index size() const { return size_; }

  // Appends a column with cross products `cross` (against the current set)
  // and squared norm `diag`. Returns false when it is numerically dependent.
  bool insert(const Vector& cross, double diag) {
    const Eigen::Index a = size_;
    if (a >= r_.rows()) return false;
    Vector col = Vector::Zero(a);
    if (a > 0) col = r_.topLeftCorner(a, a).transpose().triangularView<Eigen::Lower>().solve(cross);
    const double rest = diag - col.squaredNorm();
    if (!(rest > 1e-10 * diag)) return false;
    r_.col(a).head(a) = col;
    r_(a, a) = std::sqrt(rest);
    ++size_;
    return true;
  }

  // Removes position k and restores the triangular shape with Givens rotations.
  void remove(Eigen::Index k) {
    const Eigen::Index a = size_;
    for (Eigen::Index j = k; j + 1 < a; ++j) r_.col(j).head(a) = r_.col(j + 1).head(a);
    r_.col(a - 1).setZero();
    for (Eigen::Index i = k; i + 1 < a; ++i) {
      Eigen::JacobiRotation<double> rot;
      rot.makeGivens(r_(i, i), r_(i + 1, i));
      r_.block(0, 0, a, a).applyOnTheLeft(i, i + 1, rot.adjoint());
      r_(i + 1, i) = 0.0;
    }
    r_.row(a - 1).setZero();
    --size_;
  }

  Vector solve(const Vector& rhs) const {
    const auto r = r_.topLeftCorner(size_, size_);
    const Vector t = r.transpose().triangularView<Eigen::Lower>().solve(rhs);
    return r.triangularView<Eigen::Upper>().solve(t);
  }

 private:
  Matrix r_;
  Eigen::Index size_ = 0;
};

// Lasso homotopy (LARS with drops). Fills `out[idx]` for each penalty the
// path reaches, processing penalties in descending order, and returns the
// number filled. Stops early when the active Gram matrix becomes singular.
size_t lars_lasso(const Matrix& x, const Vector& y, std::span<const double> lambdas, const std::vector<size_t>& order,
                  std::vector<Vector>& out) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const double nd = static_cast<double>(n);
  Vector b = Vector::Zero(p);
  Vector c = x.transpose() * y / nd;
  size_t next = 0;
  if (p == 0) return 0;

  Eigen::Index first = 0;
  double lam = c.cwiseAbs().maxCoeff(&first);
  while (next < order.size() && lambdas[order[next]] >= lam) out[order[next++]] = b;
  if (next == order.size() || !(lam > 0.0)) return next;

  std::vector<Eigen::Index> active;
  std::vector<char> is_active(static_cast<size_t>(p), 0);
  std::vector<double> sign;
  ActiveCholesky chol(std::min(n, p));
  auto add = [&](Eigen::Index j, double sgn) {
    Vector cross(static_cast<Eigen::Index>(active.size()));
    for (size_t i = 0; i < active.size(); ++i) cross(static_cast<Eigen::Index>(i)) = x.col(active[i]).dot(x.col(j)) / nd;
    if (!chol.insert(cross, x.col(j).squaredNorm() / nd)) return false;
    active.push_back(j);
    sign.push_back(sgn);
    is_active[static_cast<size_t>(j)] = 1;
    return true;
  };
  if (!add(first, c(first) > 0 ? 1.0 : -1.0)) return next;

  const long max_steps = 8 * static_cast<long>(std::min(n, p)) + 64;
  Eigen::Index just_dropped = -1;
  for (long step = 0; step < max_steps; ++step) {
    const auto a = static_cast<Eigen::Index>(active.size());
    const Vector w = chol.solve(Eigen::Map<const Vector>(sign.data(), a));
    Vector u = Vector::Zero(n);
    for (Eigen::Index i = 0; i < a; ++i) u.noalias() += w(i) * x.col(active[static_cast<size_t>(i)]);
    const Vector corr_step = x.transpose() * u / nd;

    double gamma = lam;
    Eigen::Index enter = -1, drop = -1;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (is_active[static_cast<size_t>(j)] || j == just_dropped) continue;
      const double cand[2] = {(lam - c(j)) / (1.0 - corr_step(j)), (lam + c(j)) / (1.0 + corr_step(j))};
      for (double g : cand) {
        if (g > 1e-14 * lam && g < gamma) {
          gamma = g;
          enter = j;
        }
      }
    }
    for (Eigen::Index i = 0; i < a; ++i) {
      const Eigen::Index j = active[static_cast<size_t>(i)];
      const double g = -b(j) / w(i);
      if (g > 1e-14 * lam && g < gamma) {
        gamma = g;
        drop = i;
        enter = -1;
      }
    }

    // Penalties inside (lam - gamma, lam] lie on this linear segment.
    while (next < order.size() && lambdas[order[next]] > lam - gamma) {
      const double t = lam - lambdas[order[next]];
      Vector v = b;
      for (Eigen::Index i = 0; i < a; ++i) v(active[static_cast<size_t>(i)]) += t * w(i);
      out[order[next++]] = std::move(v);
    }
    for (Eigen::Index i = 0; i < a; ++i) b(active[static_cast<size_t>(i)]) += gamma * w(i);
    lam -= gamma;
    if (next == order.size() || !(lam > 0.0)) break;

    just_dropped = -1;
    if (drop >= 0) {
      const Eigen::Index j = active[static_cast<size_t>(drop)];
      b(j) = 0.0;
      chol.remove(drop);
      active.erase(active.begin() + drop);
      sign.erase(sign.begin() + drop);
      is_active[static_cast<size_t>(j)] = 0;
      just_dropped = j;
    } else if (enter >= 0) {
      const double cj = c(enter) - gamma * corr_step(enter);
      if (!add(enter, cj > 0 ? 1.0 : -1.0)) break;
    } else {
      break;
    }
    c = x.transpose() * (y - x * b) / nd;
  }
  return next;
}

}  // namespace

std::vector<Vector> lasso_path(const Matrix& x, const Vector& y, std::span<const double> lambdas,
                               const LassoOptions& options) {
  check_xy(x, y, "lasso_path");
  std::vector<size_t> order(lambdas.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return lambdas[a] > lambdas[b]; });
  std::vector<Vector> out(lambdas.size());

  // The homotopy supplies near-exact starting points; coordinate descent then
  // certifies each one by its duality gap.
  const size_t reached = lars_lasso(x, y, lambdas, order, out);
  Vector warm = Vector::Zero(x.cols());
  for (size_t r = 0; r < order.size(); ++r) {
    const size_t idx = order[r];
    const Vector& start = r < reached ? out[idx] : warm;
    FittedPredictor fit = fit_lasso(x, y, lambdas[idx], options, &start);
    warm = fit.coefficients;
    out[idx] = std::move(fit.coefficients);
  }
  return out;
}

std::vector<int> fold_assignment(Eigen::Index n, int folds, std::uint64_t seed) {
  std::vector<Eigen::Index> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::mt19937_64 engine(seed);
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Eigen::Index>(engine() % static_cast<std::uint64_t>(i + 1));
    std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]);
  }
  std::vector<int> labels(static_cast<size_t>(n));
  for (Eigen::Index pos = 0; pos < n; ++pos) labels[static_cast<size_t>(perm[static_cast<size_t>(pos)])] = static_cast<int>(pos % folds);
  return labels;
}

CvResult cross_validate(const PathFitter& fitter, const Matrix& x, const Vector& y, const CvPlan& plan) {
  plan.validate();
  check_xy(x, y, "cross_validate");
  const Eigen::Index n = x.rows();
  if (n < plan.folds) throw ContractViolation("cross_validate: fewer rows than folds");
  const std::vector<int> labels = fold_assignment(n, plan.folds, plan.fold_seed);
  const size_t grid = plan.penalty_grid.size();

  CvResult out;
  out.cv_curve.assign(grid, 0.0);
  for (int f = 0; f < plan.folds; ++f) {
    std::vector<Eigen::Index> train, test;
    for (Eigen::Index i = 0; i < n; ++i) (labels[static_cast<size_t>(i)] == f ? test : train).push_back(i);
    const Matrix xtr = x(train, Eigen::all);
    const Vector ytr = y(train);
    const Matrix xte = x(test, Eigen::all);
    const Vector yte = y(test);
    const std::vector<Vector> coefs = fitter(xtr, ytr, plan.penalty_grid);
    for (size_t g = 0; g < grid; ++g) {
      out.cv_curve[g] += (xte * coefs[g] - yte).squaredNorm() / static_cast<double>(test.size());
    }
  }
  for (double& v : out.cv_curve) v /= static_cast<double>(plan.folds);

  // Grid is ascending, so `<=` breaks ties toward the larger penalty.
  size_t best = 0;
  for (size_t g = 1; g < grid; ++g) {
    if (out.cv_curve[g] <= out.cv_curve[best]) best = g;
  }
  out.best_lambda = plan.penalty_grid[best];
  return out;
}

std::vector<double> default_penalty_grid(const Matrix& x, const Vector& y, int points, double lo, double hi) {
  if (points < 1) throw ContractViolation("default_penalty_grid: need at least one point");
  double scale = (x.transpose() * y).cwiseAbs().maxCoeff() / static_cast<double>(x.rows());
  if (!(scale > 0.0)) scale = 1.0;
  std::vector<double> grid(static_cast<size_t>(points));
  for (int i = 0; i < points; ++i) {
    const double t = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
    grid[static_cast<size_t>(i)] = scale * std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)));
  }
  return grid;
}

}  // namespace frlab
