#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "frlab/errors.hpp"
#include "frlab/experiments.hpp"

namespace frlab {

using json = nlohmann::ordered_json;
using Eigen::Index;

std::string to_string(Design design) {
  switch (design) {
    case Design::Figure1: return "figure1";
    case Design::Figure2: return "figure2";
    case Design::Figure4: return "figure4";
    case Design::NullRisk: return "nullrisk";
    case Design::Custom: return "custom";
  }
  return "custom";
}

std::optional<Design> parse_design(const std::string& name) {
  for (Design d : {Design::Figure1, Design::Figure2, Design::Figure4, Design::NullRisk, Design::Custom}) {
    if (to_string(d) == name) return d;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Grid rule

std::vector<GridPoint> GridRule::expand() const {
  if (points < 1) throw ConfigError("grid.points must be at least 1");
  if (k_min < 1 || k_max < k_min) throw ConfigError("grid.K_range must be increasing positive integers");
  auto n_of = [this](Index k) {
    return static_cast<Index>(std::floor(std::pow(static_cast<double>(k), n_exponent) + 1e-9));
  };
  const double g_lo = static_cast<double>(p_min) / static_cast<double>(n_of(k_min));
  const double g_hi = static_cast<double>(p_max) / static_cast<double>(n_of(k_max));
  if (!(g_lo > 0.0) || !(g_hi > 0.0)) throw ConfigError("grid.p_range must be positive");

  std::vector<GridPoint> out;
  out.reserve(static_cast<size_t>(points));
  for (int i = 0; i < points; ++i) {
    const double t = points == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(points - 1);
    GridPoint g;
    g.k = static_cast<Index>(std::llround(static_cast<double>(k_min) + t * static_cast<double>(k_max - k_min)));
    g.n = n_of(g.k);
    const double gamma = std::exp(std::log(g_lo) + t * (std::log(g_hi) - std::log(g_lo)));
    g.p = std::max<Index>(1, static_cast<Index>(std::llround(gamma * static_cast<double>(g.n))));
    out.push_back(g);
  }
  // Pin the endpoints so they reproduce p_range exactly.
  out.front().p = p_min;
  out.back().p = p_max;
  return out;
}

GridRule GridRule::scaled(double scale) const {
  if (!(scale > 0.0) || scale > 1.0) throw ConfigError("scale must lie in (0, 1]");
  if (scale == 1.0) return *this;
  auto n_of = [this](Index k) {
    return static_cast<Index>(std::floor(std::pow(static_cast<double>(k), n_exponent) + 1e-9));
  };
  const double shrink = std::pow(scale, 2.0 / 3.0);
  GridRule r = *this;
  r.k_min = std::max<Index>(2, static_cast<Index>(std::llround(static_cast<double>(k_min) * shrink)));
  r.k_max = std::max<Index>(r.k_min, static_cast<Index>(std::llround(static_cast<double>(k_max) * shrink)));
  const double g_lo = static_cast<double>(p_min) / static_cast<double>(n_of(k_min));
  const double g_hi = static_cast<double>(p_max) / static_cast<double>(n_of(k_max));
  r.p_min = std::max<Index>(1, static_cast<Index>(std::llround(g_lo * static_cast<double>(n_of(r.k_min)))));
  r.p_max = std::max<Index>(1, static_cast<Index>(std::llround(g_hi * static_cast<double>(n_of(r.k_max)))));
  return r;
}

// ---------------------------------------------------------------------------
// JSON reading helpers. Every accessor knows its path so errors can name it.

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError("config field '" + path + "': " + what);
}

void reject_unknown(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!ok.count(it.key())) fail(path.empty() ? it.key() : path + "." + it.key(), "unknown field");
  }
}

double as_real(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(path, "must be finite");
  return d;
}

double as_positive(const json& v, const std::string& path) {
  const double d = as_real(v, path);
  if (!(d > 0.0)) fail(path, "must be positive");
  return d;
}

Index as_count(const json& v, const std::string& path, Index min = 1) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  const auto i = v.get<long long>();
  if (i < min) fail(path, "must be at least " + std::to_string(min));
  return static_cast<Index>(i);
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

bool as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) fail(path, "expected true or false");
  return v.get<bool>();
}

Vector as_vector(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) fail(path, "expected a nonempty array of numbers");
  Vector out(static_cast<Index>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) out(static_cast<Index>(i)) = as_real(v[i], path + "[" + std::to_string(i) + "]");
  return out;
}

Matrix as_matrix(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) fail(path, "expected a nonempty array of rows");
  const size_t cols = v[0].is_array() ? v[0].size() : 0;
  if (cols == 0) fail(path + "[0]", "expected a nonempty row");
  Matrix out(static_cast<Index>(v.size()), static_cast<Index>(cols));
  for (size_t i = 0; i < v.size(); ++i) {
    const std::string rp = path + "[" + std::to_string(i) + "]";
    if (!v[i].is_array() || v[i].size() != cols) fail(rp, "rows must all have " + std::to_string(cols) + " entries");
    for (size_t j = 0; j < cols; ++j) {
      out(static_cast<Index>(i), static_cast<Index>(j)) = as_real(v[i][j], rp + "[" + std::to_string(j) + "]");
    }
  }
  return out;
}

// A tagged value is either "name" or {"kind": "name", ...params}.
std::string kind_of(const json& v, const std::string& path) {
  if (v.is_string()) return v.get<std::string>();
  if (!v.is_object()) fail(path, "expected a string or an object with a 'kind' field");
  if (!v.contains("kind")) fail(path + ".kind", "missing");
  return as_string(v["kind"], path + ".kind");
}

const json& empty_object() {
  static const json e = json::object();
  return e;
}

const json& params_of(const json& v) { return v.is_object() ? v : empty_object(); }

std::vector<GridPoint> parse_grid(const json& v, std::optional<GridRule>& rule) {
  if (v.is_array()) {
    if (v.empty()) fail("grid", "must be nonempty");
    std::vector<GridPoint> out;
    for (size_t i = 0; i < v.size(); ++i) {
      const std::string path = "grid[" + std::to_string(i) + "]";
      if (!v[i].is_object()) fail(path, "expected an object {K, n, p}");
      reject_unknown(v[i], path, {"K", "n", "p"});
      for (const char* key : {"K", "n", "p"}) {
        if (!v[i].contains(key)) fail(path + "." + key, "missing");
      }
      GridPoint g;
      g.k = as_count(v[i]["K"], path + ".K");
      g.n = as_count(v[i]["n"], path + ".n", 2);
      g.p = as_count(v[i]["p"], path + ".p");
      out.push_back(g);
    }
    rule.reset();
    return out;
  }
  if (!v.is_object()) fail("grid", "expected a list of {K, n, p} or a rule object");
  reject_unknown(v, "grid", {"K_range", "p_range", "points", "n_exponent"});
  GridRule r;
  for (const char* key : {"K_range", "p_range"}) {
    const std::string path = std::string("grid.") + key;
    if (!v.contains(key)) fail(path, "missing");
    if (!v[key].is_array() || v[key].size() != 2) fail(path, "expected [low, high]");
  }
  r.k_min = as_count(v["K_range"][0], "grid.K_range[0]");
  r.k_max = as_count(v["K_range"][1], "grid.K_range[1]");
  r.p_min = as_count(v["p_range"][0], "grid.p_range[0]");
  r.p_max = as_count(v["p_range"][1], "grid.p_range[1]");
  if (v.contains("points")) r.points = static_cast<int>(as_count(v["points"], "grid.points"));
  if (v.contains("n_exponent")) r.n_exponent = as_positive(v["n_exponent"], "grid.n_exponent");
  if (r.k_max < r.k_min) fail("grid.K_range", "must be increasing");
  rule = r;
  return r.expand();
}

LoadingSpec parse_loading(const json& v) {
  const std::string path = "loading_kind";
  const std::string kind = kind_of(v, path);
  const json& prm = params_of(v);
  LoadingSpec s;
  if (kind == "scaled_orthogonal") {
    reject_unknown(prm, path, {"kind"});
    s.kind = LoadingSpec::Kind::ScaledOrthogonal;
  } else if (kind == "gaussian") {
    reject_unknown(prm, path, {"kind", "variance_reading"});
    s.kind = LoadingSpec::Kind::Gaussian;
    if (prm.contains("variance_reading")) {
      const std::string r = as_string(prm["variance_reading"], path + ".variance_reading");
      if (r == "variance") s.gaussian_scale = GaussianLoadingScale::Variance;
      else if (r == "stddev") s.gaussian_scale = GaussianLoadingScale::StdDev;
      else fail(path + ".variance_reading", "expected 'variance' or 'stddev'");
    }
  } else if (kind == "canonical_sparse") {
    reject_unknown(prm, path, {"kind", "column_norm"});
    s.kind = LoadingSpec::Kind::CanonicalSparse;
    if (prm.contains("column_norm")) s.column_norm = as_positive(prm["column_norm"], path + ".column_norm");
  } else if (kind == "cluster") {
    reject_unknown(prm, path, {"kind", "sizes"});
    s.kind = LoadingSpec::Kind::Cluster;
    if (prm.contains("sizes")) {
      const json& sz = prm["sizes"];
      if (!sz.is_array() || sz.empty()) fail(path + ".sizes", "expected a nonempty array");
      for (size_t i = 0; i < sz.size(); ++i) {
        s.cluster_sizes.push_back(as_count(sz[i], path + ".sizes[" + std::to_string(i) + "]"));
      }
    }
  } else if (kind == "custom") {
    reject_unknown(prm, path, {"kind", "matrix"});
    s.kind = LoadingSpec::Kind::Custom;
    if (!prm.contains("matrix")) fail(path + ".matrix", "missing");
    s.custom = as_matrix(prm["matrix"], path + ".matrix");
  } else {
    fail(path + ".kind", "unknown loading kind '" + kind + "'");
  }
  return s;
}

FactorCovSpec parse_factor_cov(const json& v) {
  const std::string path = "sigma_z_kind";
  const std::string kind = kind_of(v, path);
  const json& prm = params_of(v);
  FactorCovSpec s;
  if (kind == "identity") {
    reject_unknown(prm, path, {"kind"});
    s.kind = FactorCovSpec::Kind::Identity;
  } else if (kind == "isotropic") {
    reject_unknown(prm, path, {"kind", "variance"});
    s.kind = FactorCovSpec::Kind::Isotropic;
    if (!prm.contains("variance")) fail(path + ".variance", "missing");
    s.variance = as_positive(prm["variance"], path + ".variance");
  } else if (kind == "diagonal") {
    reject_unknown(prm, path, {"kind", "variances"});
    s.kind = FactorCovSpec::Kind::Diagonal;
    if (!prm.contains("variances")) fail(path + ".variances", "missing");
    s.variances = as_vector(prm["variances"], path + ".variances");
  } else if (kind == "dense") {
    reject_unknown(prm, path, {"kind", "matrix"});
    s.kind = FactorCovSpec::Kind::Dense;
    if (!prm.contains("matrix")) fail(path + ".matrix", "missing");
    s.matrix = as_matrix(prm["matrix"], path + ".matrix");
  } else {
    fail(path + ".kind", "unknown factor covariance kind '" + kind + "'");
  }
  return s;
}

NoiseCovSpec parse_noise_cov(const json& v) {
  const std::string path = "sigma_e_kind";
  const std::string kind = kind_of(v, path);
  const json& prm = params_of(v);
  NoiseCovSpec s;
  if (kind == "zero") {
    reject_unknown(prm, path, {"kind"});
    s.kind = NoiseCovSpec::Kind::Zero;
  } else if (kind == "identity") {
    reject_unknown(prm, path, {"kind"});
    s.kind = NoiseCovSpec::Kind::Identity;
  } else if (kind == "isotropic") {
    reject_unknown(prm, path, {"kind", "variance"});
    s.kind = NoiseCovSpec::Kind::Isotropic;
    if (!prm.contains("variance")) fail(path + ".variance", "missing");
    s.variance = as_positive(prm["variance"], path + ".variance");
  } else if (kind == "diagonal") {
    reject_unknown(prm, path, {"kind", "variances"});
    s.kind = NoiseCovSpec::Kind::Diagonal;
    if (!prm.contains("variances")) fail(path + ".variances", "missing");
    s.variances = as_vector(prm["variances"], path + ".variances");
  } else if (kind == "diagonal_range") {
    reject_unknown(prm, path, {"kind", "min", "max"});
    s.kind = NoiseCovSpec::Kind::DiagonalRange;
    for (const char* key : {"min", "max"}) {
      if (!prm.contains(key)) fail(path + "." + key, "missing");
    }
    s.range_min = as_real(prm["min"], path + ".min");
    s.range_max = as_real(prm["max"], path + ".max");
    if (s.range_min < 0.0 || s.range_max < s.range_min) fail(path, "need 0 <= min <= max");
  } else if (kind == "unit_total_variance") {
    reject_unknown(prm, path, {"kind"});
    s.kind = NoiseCovSpec::Kind::UnitTotalVariance;
  } else if (kind == "dense") {
    reject_unknown(prm, path, {"kind", "matrix"});
    s.kind = NoiseCovSpec::Kind::Dense;
    if (!prm.contains("matrix")) fail(path + ".matrix", "missing");
    s.matrix = as_matrix(prm["matrix"], path + ".matrix");
  } else {
    fail(path + ".kind", "unknown noise covariance kind '" + kind + "'");
  }
  return s;
}

BetaSpec parse_beta(const json& v) {
  const std::string path = "beta_kind";
  const std::string kind = kind_of(v, path);
  const json& prm = params_of(v);
  BetaSpec s;
  if (kind == "all_ones") {
    reject_unknown(prm, path, {"kind"});
  } else if (kind == "custom") {
    reject_unknown(prm, path, {"kind", "values"});
    s.kind = BetaSpec::Kind::Custom;
    if (!prm.contains("values")) fail(path + ".values", "missing");
    s.values = as_vector(prm["values"], path + ".values");
  } else {
    fail(path + ".kind", "unknown beta kind '" + kind + "'");
  }
  return s;
}

std::optional<Method> method_from_name(const std::string& name) {
  for (Method m : {Method::MinNorm, Method::PcrEmpirical, Method::PcrStylized, Method::Ridge, Method::Lasso,
                   Method::Null, Method::OracleZ}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

CvSettings parse_cv(const json& v, const std::string& path) {
  CvSettings cv;
  if (v.is_boolean()) {
    if (!v.get<bool>()) fail(path, "use 'lambda' instead of disabling cross-validation");
    return cv;
  }
  if (!v.is_object()) fail(path, "expected an object");
  reject_unknown(v, path, {"folds", "grid_points", "grid_range", "seed"});
  if (v.contains("folds")) cv.folds = static_cast<int>(as_count(v["folds"], path + ".folds", 2));
  if (v.contains("grid_points")) cv.grid_points = static_cast<int>(as_count(v["grid_points"], path + ".grid_points"));
  if (v.contains("grid_range")) {
    const json& r = v["grid_range"];
    if (!r.is_array() || r.size() != 2) fail(path + ".grid_range", "expected [low, high]");
    cv.grid_lo = as_positive(r[0], path + ".grid_range[0]");
    cv.grid_hi = as_positive(r[1], path + ".grid_range[1]");
    if (cv.grid_hi < cv.grid_lo) fail(path + ".grid_range", "must be increasing");
  }
  if (v.contains("seed")) cv.seed = static_cast<std::uint64_t>(as_count(v["seed"], path + ".seed", 0));
  return cv;
}

std::string default_label(const EstimatorSpec& e) {
  std::string base = to_string(e.method);
  if (e.cv) base += "_cv";
  return base;
}

EstimatorSpec parse_estimator(const json& v, const std::string& path) {
  EstimatorSpec e;
  std::string name;
  const json* prm = &empty_object();
  if (v.is_string()) {
    name = v.get<std::string>();
  } else if (v.is_object()) {
    if (!v.contains("method")) fail(path + ".method", "missing");
    name = as_string(v["method"], path + ".method");
    prm = &v;
    reject_unknown(v, path, {"method", "label", "k", "lambda", "cv", "max_sweeps"});
  } else {
    fail(path, "expected a method name or an object with a 'method' field");
  }
  const auto m = method_from_name(name);
  if (!m) fail(path + ".method", "unknown estimator '" + name + "'");
  e.method = *m;

  const json& p = *prm;
  const bool pcr = e.method == Method::PcrEmpirical || e.method == Method::PcrStylized;
  const bool penalized = e.method == Method::Ridge || e.method == Method::Lasso;
  if (p.contains("k")) {
    if (!pcr) fail(path + ".k", "only PCR estimators take 'k'");
    e.k = as_count(p["k"], path + ".k");
  }
  if (p.contains("lambda")) {
    if (!penalized) fail(path + ".lambda", "only ridge and lasso take 'lambda'");
    e.lambda = as_real(p["lambda"], path + ".lambda");
    if (*e.lambda < 0.0 || (e.method == Method::Ridge && *e.lambda == 0.0)) fail(path + ".lambda", "must be positive");
  }
  if (p.contains("cv")) {
    if (!penalized) fail(path + ".cv", "only ridge and lasso take 'cv'");
    e.cv = parse_cv(p["cv"], path + ".cv");
  }
  if (p.contains("max_sweeps")) {
    if (e.method != Method::Lasso) fail(path + ".max_sweeps", "only lasso takes 'max_sweeps'");
    e.lasso_max_sweeps = static_cast<long>(as_count(p["max_sweeps"], path + ".max_sweeps"));
  }
  if (penalized && e.lambda && e.cv) fail(path, "give either 'lambda' or 'cv', not both");
  if (penalized && !e.lambda && !e.cv) e.cv = CvSettings{};
  e.label = p.contains("label") ? as_string(p["label"], path + ".label") : default_label(e);
  if (e.label.empty() || e.label.find_first_of(",\"\n") != std::string::npos) {
    fail(path + ".label", "must be nonempty and free of commas, quotes and newlines");
  }
  return e;
}

EvalMode parse_eval_mode(const json& v) {
  EvalMode mode;
  if (v.is_string()) {
    if (v.get<std::string>() != "exact") fail("eval_mode", "expected 'exact' or {\"holdout\": m}");
    return mode;
  }
  if (!v.is_object()) fail("eval_mode", "expected 'exact' or {\"holdout\": m}");
  reject_unknown(v, "eval_mode", {"holdout"});
  if (!v.contains("holdout")) fail("eval_mode.holdout", "missing");
  mode.holdout = true;
  mode.holdout_samples = as_count(v["holdout"], "eval_mode.holdout");
  return mode;
}

std::string location_of(const std::string& text, size_t byte) {
  size_t line = 1, col = 1;
  for (size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

// Dimension checks that need the resolved grid.
void validate_against_grid(const ExperimentConfig& c) {
  for (size_t i = 0; i < c.grid.size(); ++i) {
    const GridPoint& g = c.grid[i];
    const std::string gp = "grid[" + std::to_string(i) + "]";
    if (g.n < 2) fail(gp + ".n", "must be at least 2");
    if (g.k > g.p) fail(gp, "K must not exceed p");
    const auto& L = c.loading_kind;
    if (L.kind == LoadingSpec::Kind::Custom && (L.custom.rows() != g.p || L.custom.cols() != g.k)) {
      fail("loading_kind.matrix", "shape does not match " + gp);
    }
    if (L.kind == LoadingSpec::Kind::Cluster && !L.cluster_sizes.empty()) {
      Index total = 0;
      for (Index s : L.cluster_sizes) total += s;
      if (static_cast<Index>(L.cluster_sizes.size()) != g.k || total > g.p) {
        fail("loading_kind.sizes", "needs K entries summing to at most p at " + gp);
      }
    }
    const auto& Z = c.sigma_z_kind;
    if (Z.kind == FactorCovSpec::Kind::Diagonal && Z.variances.size() != g.k) {
      fail("sigma_z_kind.variances", "length does not match K at " + gp);
    }
    if (Z.kind == FactorCovSpec::Kind::Dense && (Z.matrix.rows() != g.k || Z.matrix.cols() != g.k)) {
      fail("sigma_z_kind.matrix", "shape does not match K at " + gp);
    }
    const auto& E = c.sigma_e_kind;
    if (E.kind == NoiseCovSpec::Kind::Diagonal && E.variances.size() != g.p) {
      fail("sigma_e_kind.variances", "length does not match p at " + gp);
    }
    if (E.kind == NoiseCovSpec::Kind::Dense && (E.matrix.rows() != g.p || E.matrix.cols() != g.p)) {
      fail("sigma_e_kind.matrix", "shape does not match p at " + gp);
    }
    if (c.beta_kind.kind == BetaSpec::Kind::Custom && c.beta_kind.values.size() != g.k) {
      fail("beta_kind.values", "length does not match K at " + gp);
    }
    for (size_t j = 0; j < c.estimators.size(); ++j) {
      const auto& e = c.estimators[j];
      if (e.k && *e.k > std::min(g.n, g.p)) {
        fail("estimators[" + std::to_string(j) + "].k", "exceeds min(n, p) at " + gp);
      }
      if (e.cv && e.cv->folds > g.n) {
        fail("estimators[" + std::to_string(j) + "].cv.folds", "exceeds n at " + gp);
      }
    }
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config is not valid JSON at " + location_of(json_text, e.byte > 0 ? e.byte - 1 : 0) + ": " +
                      e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(doc, "",
                 {"design", "grid", "loading_kind", "noise_law", "sigma_z_kind", "sigma_e_kind", "beta_kind",
                  "sigma_eps", "estimators", "replicates", "redraw_loading_per_replicate", "master_seed",
                  "eval_mode", "output_dir"});

  ExperimentConfig c;
  if (doc.contains("design")) {
    const auto d = parse_design(as_string(doc["design"], "design"));
    if (!d) fail("design", "expected figure1, figure2, figure4, nullrisk or custom");
    c.design = *d;
  }
  if (!doc.contains("grid")) fail("grid", "missing");
  c.grid = parse_grid(doc["grid"], c.grid_rule);
  if (doc.contains("loading_kind")) c.loading_kind = parse_loading(doc["loading_kind"]);
  if (doc.contains("noise_law")) {
    const auto law = parse_noise_law(as_string(doc["noise_law"], "noise_law"));
    if (!law) fail("noise_law", "expected gaussian, rademacher or uniform");
    c.noise_law = *law;
  }
  if (doc.contains("sigma_z_kind")) c.sigma_z_kind = parse_factor_cov(doc["sigma_z_kind"]);
  if (doc.contains("sigma_e_kind")) c.sigma_e_kind = parse_noise_cov(doc["sigma_e_kind"]);
  if (doc.contains("beta_kind")) c.beta_kind = parse_beta(doc["beta_kind"]);
  if (doc.contains("sigma_eps")) {
    c.sigma_eps = as_real(doc["sigma_eps"], "sigma_eps");
    if (c.sigma_eps < 0.0) fail("sigma_eps", "must be nonnegative");
  }
  if (!doc.contains("estimators")) fail("estimators", "missing");
  const json& est = doc["estimators"];
  if (!est.is_array() || est.empty()) fail("estimators", "expected a nonempty array");
  std::set<std::string> labels;
  for (size_t i = 0; i < est.size(); ++i) {
    const std::string path = "estimators[" + std::to_string(i) + "]";
    c.estimators.push_back(parse_estimator(est[i], path));
    if (!labels.insert(c.estimators.back().label).second) {
      fail(path + ".label", "duplicate label '" + c.estimators.back().label + "'");
    }
  }
  if (doc.contains("replicates")) c.replicates = static_cast<int>(as_count(doc["replicates"], "replicates", 0));
  if (doc.contains("redraw_loading_per_replicate")) {
    c.redraw_loading_per_replicate = as_bool(doc["redraw_loading_per_replicate"], "redraw_loading_per_replicate");
  }
  if (doc.contains("master_seed")) {
    const json& s = doc["master_seed"];
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
      fail("master_seed", "expected a nonnegative integer");
    }
    c.master_seed = s.get<std::uint64_t>();
  }
  if (doc.contains("eval_mode")) c.eval_mode = parse_eval_mode(doc["eval_mode"]);
  if (doc.contains("output_dir")) c.output_dir = as_string(doc["output_dir"], "output_dir");
  validate_against_grid(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

namespace {

json vector_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json matrix_json(const Matrix& m) {
  json a = json::array();
  for (Index i = 0; i < m.rows(); ++i) a.push_back(vector_json(m.row(i).transpose()));
  return a;
}

}  // namespace

std::string config_to_json(const ExperimentConfig& c) {
  json doc;
  doc["design"] = to_string(c.design);
  if (c.grid_rule) {
    const GridRule& r = *c.grid_rule;
    doc["grid"] = {{"K_range", {r.k_min, r.k_max}},
                   {"p_range", {r.p_min, r.p_max}},
                   {"points", r.points},
                   {"n_exponent", r.n_exponent}};
  } else {
    json g = json::array();
    for (const auto& pt : c.grid) g.push_back({{"K", pt.k}, {"n", pt.n}, {"p", pt.p}});
    doc["grid"] = g;
  }

  json load;
  switch (c.loading_kind.kind) {
    case LoadingSpec::Kind::ScaledOrthogonal: load = "scaled_orthogonal"; break;
    case LoadingSpec::Kind::Gaussian:
      load = {{"kind", "gaussian"},
              {"variance_reading",
               c.loading_kind.gaussian_scale == GaussianLoadingScale::Variance ? "variance" : "stddev"}};
      break;
    case LoadingSpec::Kind::CanonicalSparse:
      load = {{"kind", "canonical_sparse"}};
      if (c.loading_kind.column_norm) load["column_norm"] = *c.loading_kind.column_norm;
      break;
    case LoadingSpec::Kind::Cluster:
      load = {{"kind", "cluster"}};
      if (!c.loading_kind.cluster_sizes.empty()) load["sizes"] = c.loading_kind.cluster_sizes;
      break;
    case LoadingSpec::Kind::Custom: load = {{"kind", "custom"}, {"matrix", matrix_json(c.loading_kind.custom)}}; break;
  }
  doc["loading_kind"] = load;
  doc["noise_law"] = to_string(c.noise_law);

  switch (c.sigma_z_kind.kind) {
    case FactorCovSpec::Kind::Identity: doc["sigma_z_kind"] = "identity"; break;
    case FactorCovSpec::Kind::Isotropic:
      doc["sigma_z_kind"] = {{"kind", "isotropic"}, {"variance", c.sigma_z_kind.variance}};
      break;
    case FactorCovSpec::Kind::Diagonal:
      doc["sigma_z_kind"] = {{"kind", "diagonal"}, {"variances", vector_json(c.sigma_z_kind.variances)}};
      break;
    case FactorCovSpec::Kind::Dense:
      doc["sigma_z_kind"] = {{"kind", "dense"}, {"matrix", matrix_json(c.sigma_z_kind.matrix)}};
      break;
  }

  const auto& E = c.sigma_e_kind;
  switch (E.kind) {
    case NoiseCovSpec::Kind::Zero: doc["sigma_e_kind"] = "zero"; break;
    case NoiseCovSpec::Kind::Identity: doc["sigma_e_kind"] = "identity"; break;
    case NoiseCovSpec::Kind::Isotropic: doc["sigma_e_kind"] = {{"kind", "isotropic"}, {"variance", E.variance}}; break;
    case NoiseCovSpec::Kind::Diagonal:
      doc["sigma_e_kind"] = {{"kind", "diagonal"}, {"variances", vector_json(E.variances)}};
      break;
    case NoiseCovSpec::Kind::DiagonalRange:
      doc["sigma_e_kind"] = {{"kind", "diagonal_range"}, {"min", E.range_min}, {"max", E.range_max}};
      break;
    case NoiseCovSpec::Kind::UnitTotalVariance: doc["sigma_e_kind"] = "unit_total_variance"; break;
    case NoiseCovSpec::Kind::Dense: doc["sigma_e_kind"] = {{"kind", "dense"}, {"matrix", matrix_json(E.matrix)}}; break;
  }

  if (c.beta_kind.kind == BetaSpec::Kind::AllOnes) {
    doc["beta_kind"] = "all_ones";
  } else {
    doc["beta_kind"] = {{"kind", "custom"}, {"values", vector_json(c.beta_kind.values)}};
  }
  doc["sigma_eps"] = c.sigma_eps;

  json est = json::array();
  for (const auto& e : c.estimators) {
    json j = {{"method", to_string(e.method)}, {"label", e.label}};
    if (e.k) j["k"] = *e.k;
    if (e.lambda) j["lambda"] = *e.lambda;
    if (e.cv) {
      j["cv"] = {{"folds", e.cv->folds},
                 {"grid_points", e.cv->grid_points},
                 {"grid_range", {e.cv->grid_lo, e.cv->grid_hi}},
                 {"seed", e.cv->seed}};
    }
    if (e.method == Method::Lasso && e.lasso_max_sweeps != EstimatorSpec{}.lasso_max_sweeps) {
      j["max_sweeps"] = e.lasso_max_sweeps;
    }
    est.push_back(j);
  }
  doc["estimators"] = est;
  doc["replicates"] = c.replicates;
  doc["redraw_loading_per_replicate"] = c.redraw_loading_per_replicate;
  doc["master_seed"] = c.master_seed;
  if (c.eval_mode.holdout) {
    doc["eval_mode"] = {{"holdout", c.eval_mode.holdout_samples}};
  } else {
    doc["eval_mode"] = "exact";
  }
  doc["output_dir"] = c.output_dir;
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Presets

namespace {

EstimatorSpec plain(Method m) {
  EstimatorSpec e;
  e.method = m;
  e.label = default_label(e);
  return e;
}

EstimatorSpec with_cv(Method m) {
  EstimatorSpec e;
  e.method = m;
  e.cv = CvSettings{};
  e.label = default_label(e);
  return e;
}

}  // namespace

ExperimentConfig preset(Design design, double scale) {
  if (!(scale > 0.0) || scale > 1.0) throw ConfigError("scale must lie in (0, 1]");
  ExperimentConfig c;
  c.design = design;
  c.sigma_z_kind.kind = FactorCovSpec::Kind::Identity;
  c.sigma_e_kind.kind = NoiseCovSpec::Kind::Identity;
  c.beta_kind.kind = BetaSpec::Kind::AllOnes;
  c.sigma_eps = 1.0;
  c.replicates = 20;
  c.output_dir = "out/" + to_string(design);

  const std::vector<EstimatorSpec> comparison = {plain(Method::MinNorm), plain(Method::PcrStylized),
                                                 plain(Method::PcrEmpirical), with_cv(Method::Lasso),
                                                 with_cv(Method::Ridge), plain(Method::Null)};
  switch (design) {
    case Design::Figure1: {
      GridRule r{16, 64, 33, 4066, 24, 1.5};
      c.grid_rule = r.scaled(scale);
      c.grid = c.grid_rule->expand();
      c.loading_kind.kind = LoadingSpec::Kind::ScaledOrthogonal;
      c.estimators = {plain(Method::MinNorm), plain(Method::Null)};
      break;
    }
    case Design::Figure2:
    case Design::Figure4: {
      GridRule r{12, 69, 16, 7215, 24, 1.5};
      c.grid_rule = r.scaled(scale);
      c.grid = c.grid_rule->expand();
      c.loading_kind.kind =
          design == Design::Figure2 ? LoadingSpec::Kind::Gaussian : LoadingSpec::Kind::CanonicalSparse;
      c.estimators = comparison;
      break;
    }
    case Design::NullRisk: {
      // A = 0.8 * canonical columns, Sigma_E = I - A A' so that Sigma_X = I_p.
      const Index n = 50;
      for (int ratio : {10, 50, 100}) {
        const Index p = std::max<Index>(n + 1, static_cast<Index>(std::llround(ratio * n * scale)));
        c.grid.push_back({5, n, p});
      }
      c.loading_kind.kind = LoadingSpec::Kind::CanonicalSparse;
      c.loading_kind.column_norm = 0.8;
      c.sigma_e_kind.kind = NoiseCovSpec::Kind::UnitTotalVariance;
      c.estimators = {plain(Method::MinNorm), plain(Method::Null)};
      break;
    }
    case Design::Custom:
      throw ConfigError("preset: unknown design tag 'custom'");
  }
  return c;
}

}  // namespace frlab
