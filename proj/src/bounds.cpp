#include "frlab/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace frlab {

namespace {

double in(const BoundReport& r, const char* key) {
  const auto it = r.inputs.find(key);
  if (it == r.inputs.end()) throw ContractViolation(std::string("bound input missing: ") + key);
  return it->second;
}

// Tail sums S_k = sum_{i > k} lambda_i (0-based k, so S_k sums indices k..p-1).
std::vector<double> tail_sums(const Vector& ev, bool squared) {
  const auto p = static_cast<size_t>(ev.size());
  std::vector<double> out(p + 1, 0.0);
  long double acc = 0.0L;
  for (size_t i = p; i-- > 0;) {
    const double v = ev(static_cast<Eigen::Index>(i));
    acc += squared ? static_cast<long double>(v) * v : static_cast<long double>(v);
    out[i] = static_cast<double>(acc);
  }
  return out;
}

double kappa_or_one(const PopulationSummary& s) { return s.kappa_sigma_e.value_or(1.0); }

}  // namespace

double recompute_bound(const BoundReport& r) {
  const std::string& name = r.name;
  if (name == "null_ratio") return std::sqrt(in(r, "n") / in(r, "re_sigma_x"));
  if (name == "effective_rank_condition") {
    return in(r, "K") / in(r, "n") + in(r, "re_sigma_e") * in(r, "inv_xi") / in(r, "n");
  }
  if (name == "main_excess") {
    const double n = in(r, "n");
    const double s2 = in(r, "sigma_eps_sq");
    const double re = in(r, "re_sigma_e");
    return in(r, "beta_sz_norm_sq") * in(r, "inv_xi") * re / n + s2 * n * std::log(n) / re +
           s2 * in(r, "K") * std::log(n) / n;
  }
  if (name == "purevar") {
    const double n = in(r, "n");
    const double p = in(r, "p");
    const double k = in(r, "K");
    return k / in(r, "lambda_k_ata") * p / n + in(r, "sigma_eps_sq") * (n / p + k / n) * std::log(n);
  }
  if (name == "lowdim") {
    const double n = in(r, "n");
    return in(r, "kappa_sigma_e") * in(r, "beta_sz_norm_sq") * in(r, "inv_xi") +
           in(r, "p") / n * in(r, "sigma_eps_sq") * std::log(n);
  }
  if (name == "pcr") {
    const double n = in(r, "n");
    const double p = in(r, "p");
    const double k = in(r, "K");
    const double s2 = in(r, "sigma_eps_sq");
    const int form = static_cast<int>(in(r, "form"));
    if (form == 2) return s2 * k * std::log(n) / n;
    if (form == 3) return in(r, "kappa_sigma_e") * in(r, "beta_sz_norm_sq") * in(r, "inv_xi") * p / n + s2 * k * std::log(n) / n;
    return in(r, "sigma_e_opnorm") * in(r, "alpha_star_norm_sq") * p / n + in(r, "risk_star") * k * std::log(n) / n;
  }
  if (name == "bartlett_bias_variance") {
    const double n = in(r, "n");
    const double r0n = in(r, "r0") / n;
    const double bias = in(r, "alpha_star_norm_sq") * in(r, "sigma_x_opnorm") * std::max({std::sqrt(r0n), r0n, 1.0});
    const double kstar = in(r, "kstar");
    const double var = in(r, "sigma_eps_sq") * std::log(n) * (n / in(r, "R_kstar") + kstar / n);
    return bias + var;
  }
  throw ContractViolation("recompute_bound: unknown bound " + name);
}

BoundReport null_ratio_bound(double n, const PopulationSummary& s) {
  BoundReport r;
  r.name = "null_ratio";
  r.inputs = {{"n", n}, {"re_sigma_x", s.re_sigma_x}};
  r.conditions["re_sigma_x > n"] = s.re_sigma_x > n;
  r.value = recompute_bound(r);
  return r;
}

BoundReport effective_rank_condition(const PopulationSummary& s, double n) {
  BoundReport r;
  r.name = "effective_rank_condition";
  const double inv_xi = inverse_snr(s.xi);
  r.inputs = {{"n", n}, {"K", static_cast<double>(s.k)}, {"re_sigma_e", s.re_sigma_e}, {"inv_xi", inv_xi}, {"xi", s.xi}};
  r.conditions["K/n <= 1"] = static_cast<double>(s.k) <= n;
  r.conditions["xi >= re_sigma_e/n"] = s.xi >= s.re_sigma_e / n;
  if (s.re_sigma_e_degenerate) r.notes = "Sigma_E = 0: r_e(Sigma_E) = 1 and 1/xi = 0 by convention";
  r.value = recompute_bound(r);
  return r;
}

BoundReport main_excess_bound(const PopulationSummary& s, double n) {
  BoundReport r;
  r.name = "main_excess";
  const double inv_xi = inverse_snr(s.xi);
  const double k = static_cast<double>(s.k);
  r.inputs = {{"n", n},
              {"p", static_cast<double>(s.p)},
              {"K", k},
              {"xi", s.xi},
              {"inv_xi", inv_xi},
              {"re_sigma_e", s.re_sigma_e},
              {"re_sigma_x", s.re_sigma_x},
              {"beta_sz_norm_sq", s.beta_sz_norm_sq},
              {"sigma_eps_sq", s.oracle_risk}};
  r.conditions["n > K"] = n > k;
  r.conditions["re_sigma_e > n"] = s.re_sigma_e > n;
  r.components["bias"] = s.beta_sz_norm_sq * inv_xi * s.re_sigma_e / n;
  r.components["variance"] = s.oracle_risk * n * std::log(n) / s.re_sigma_e;
  r.components["oracle"] = s.oracle_risk * k * std::log(n) / n;
  if (s.re_sigma_e_degenerate) r.notes = "Sigma_E = 0: r_e(Sigma_E) = 1 and 1/xi = 0 by convention";
  r.value = recompute_bound(r);
  return r;
}

BoundReport purevar_bound(const PopulationSummary& s, double n) {
  BoundReport r;
  r.name = "purevar";
  const double k = static_cast<double>(s.k);
  const double p = static_cast<double>(s.p);
  r.inputs = {{"n", n}, {"p", p}, {"K", k}, {"lambda_k_ata", s.lambda_k_ata}, {"sigma_eps_sq", s.oracle_risk}};
  const double variance = s.oracle_risk * (n / p + k / n) * std::log(n);
  r.components["bias"] = k / s.lambda_k_ata * p / n;
  r.components["variance"] = variance;
  r.conditions["lambda_k_ata >= p/K"] = s.lambda_k_ata >= p / k;
  r.conditions["re_sigma_e comparable to p"] = s.re_sigma_e >= 0.5 * p;
  r.conditions["lambda_k_factor > 0"] = s.lambda_k_factor > 0.0;
  r.conditions["sigma_e_opnorm finite"] = std::isfinite(s.sigma_e_opnorm);
  if (s.lambda_k_ata >= p / k) r.components["second_form"] = k * k / n + variance;
  r.value = recompute_bound(r);
  return r;
}

BoundReport lowdim_bound(const PopulationSummary& s, double n) {
  BoundReport r;
  r.name = "lowdim";
  const double p = static_cast<double>(s.p);
  r.inputs = {{"n", n},
              {"p", p},
              {"kappa_sigma_e", kappa_or_one(s)},
              {"beta_sz_norm_sq", s.beta_sz_norm_sq},
              {"inv_xi", inverse_snr(s.xi)},
              {"xi", s.xi},
              {"sigma_eps_sq", s.oracle_risk}};
  r.conditions["n > p"] = n > p;
  r.conditions["sigma_e_invertible"] = s.kappa_sigma_e.has_value();
  if (!s.kappa_sigma_e) r.notes = "kappa(Sigma_E) undefined for singular Sigma_E; bias term evaluated with kappa = 1";
  r.value = recompute_bound(r);
  return r;
}

BoundReport pcr_bound(const PopulationSummary& s, double n) {
  BoundReport r;
  r.name = "pcr";
  const double p = static_cast<double>(s.p);
  const double k = static_cast<double>(s.k);
  const double inv_xi = inverse_snr(s.xi);
  const bool zero_noise = s.sigma_e_opnorm == 0.0;
  const int form = zero_noise ? 2 : (s.kappa_sigma_e ? 3 : 1);
  r.inputs = {{"n", n},
              {"p", p},
              {"K", k},
              {"sigma_eps_sq", s.oracle_risk},
              {"sigma_e_opnorm", s.sigma_e_opnorm},
              {"alpha_star_norm_sq", s.alpha_star_norm_sq},
              {"risk_star", s.risk_star},
              {"beta_sz_norm_sq", s.beta_sz_norm_sq},
              {"inv_xi", inv_xi},
              {"xi", s.xi},
              {"kappa_sigma_e", kappa_or_one(s)},
              {"form", static_cast<double>(form)}};
  const double log_term = k * std::log(n) / n;
  r.components["general"] = s.sigma_e_opnorm * s.alpha_star_norm_sq * p / n + s.risk_star * log_term;
  if (zero_noise) r.components["noiseless"] = s.oracle_risk * log_term;
  if (s.kappa_sigma_e) r.components["invertible"] = *s.kappa_sigma_e * s.beta_sz_norm_sq * inv_xi * p / n + s.oracle_risk * log_term;
  r.conditions["n > K ln n"] = n > k * std::log(n);
  r.conditions["sigma_e_zero"] = zero_noise;
  r.conditions["sigma_e_invertible"] = s.kappa_sigma_e.has_value();
  r.value = recompute_bound(r);
  return r;
}

BartlettRanks bartlett_effective_ranks(const SpectrumSummary& spectrum, Eigen::Index k) {
  const Vector& ev = spectrum.eigenvalues;
  if (k < 0 || k >= ev.size()) throw ContractViolation("bartlett_effective_ranks: k must be < spectrum length");
  const auto tail = ev.tail(ev.size() - k);
  BartlettRanks out;
  long double sum = 0.0L, sum_sq = 0.0L;
  for (Eigen::Index i = 0; i < tail.size(); ++i) {
    sum += tail(i);
    sum_sq += static_cast<long double>(tail(i)) * tail(i);
  }
  const double next = ev(k);
  if (!(next > 0.0)) {
    out.degenerate = true;
    out.r_k = kInfinity;
    out.big_r_k = sum_sq > 0.0L ? static_cast<double>(sum * sum / sum_sq) : kInfinity;
    return out;
  }
  out.r_k = static_cast<double>(sum / next);
  out.big_r_k = static_cast<double>(sum * sum / sum_sq);
  return out;
}

std::optional<Eigen::Index> bartlett_kstar(const SpectrumSummary& spectrum, double n, double b) {
  if (!(b > 1.0)) throw ContractViolation("bartlett_kstar: b must exceed 1");
  const Vector& ev = spectrum.eigenvalues;
  const std::vector<double> sums = tail_sums(ev, false);
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    const double next = ev(k);
    const double rk = next > 0.0 ? sums[static_cast<size_t>(k)] / next : kInfinity;
    if (rk / n >= b) return k;
  }
  return std::nullopt;
}

BoundReport bartlett_bias_variance(const PopulationSummary& s, const SpectrumSummary& spectrum, double n, double b) {
  BoundReport r;
  r.name = "bartlett_bias_variance";
  const BartlettRanks zero = bartlett_effective_ranks(spectrum, 0);
  const std::optional<Eigen::Index> kstar = bartlett_kstar(spectrum, n, b);
  const Eigen::Index ks = kstar.value_or(spectrum.eigenvalues.size() - 1);
  const BartlettRanks at_kstar = bartlett_effective_ranks(spectrum, ks);
  r.inputs = {{"n", n},
              {"b", b},
              {"r0", zero.r_k},
              {"kstar", static_cast<double>(ks)},
              {"R_kstar", at_kstar.big_r_k},
              {"alpha_star_norm_sq", s.alpha_star_norm_sq},
              {"sigma_x_opnorm", s.sigma_x_opnorm},
              {"sigma_eps_sq", s.oracle_risk}};
  const double r0n = zero.r_k / n;
  r.components["bias"] = s.alpha_star_norm_sq * s.sigma_x_opnorm * std::max({std::sqrt(r0n), r0n, 1.0});
  r.components["variance"] = s.oracle_risk * std::log(n) * (n / at_kstar.big_r_k + static_cast<double>(ks) / n);
  r.conditions["kstar exists"] = kstar.has_value();
  r.conditions["xi > 1"] = s.xi > 1.0;
  r.conditions["sigma_e_invertible"] = s.kappa_sigma_e.has_value();
  if (s.kappa_sigma_e && s.xi > 1.0 && std::isfinite(s.xi)) {
    r.components["bias_lower_bound"] =
        (s.xi - 1.0) / (s.xi + 1.0) / *s.kappa_sigma_e * s.beta_sz_norm_sq * std::max(std::sqrt(r0n), r0n);
  } else {
    r.notes = "bias lower bound needs xi > 1 and an invertible Sigma_E";
  }
  r.value = recompute_bound(r);
  return r;
}

KstarSandwich kstar_sandwich_check(const PopulationSummary& s, const SpectrumSummary& spectrum, double n) {
  KstarSandwich out;
  const Vector& ev = spectrum.eigenvalues;
  const Eigen::Index k = s.k;
  if (ev.size() <= k) throw ContractViolation("kstar_sandwich_check: spectrum shorter than K + 1");
  const std::vector<double> sums = tail_sums(ev, false);
  const double inv_xi = inverse_snr(s.xi);
  const double kd = static_cast<double>(k);
  const double upper = kd / n * (1.0 + inv_xi) + s.re_sigma_e * inv_xi / n;
  out.upper_ok = true;
  for (Eigen::Index l = 0; l < k; ++l) {
    const double rl = ev(l) > 0.0 ? sums[static_cast<size_t>(l)] / ev(l) : kInfinity;
    if (rl / n > upper + 1e-9 * std::max(1.0, upper)) out.upper_ok = false;
  }
  const double lower = s.re_sigma_e / n - kd / n;
  if (!(ev(k) > 0.0)) {
    out.degenerate = true;
    out.lower_ok = true;  // r_K is unbounded when the tail vanishes
  } else {
    const double rk = sums[static_cast<size_t>(k)] / ev(k);
    out.lower_ok = rk / n >= lower - 1e-9 * std::max(1.0, std::abs(lower));
  }
  if (s.re_sigma_e_degenerate) out.degenerate = true;
  return out;
}

}  // namespace frlab
