#pragma once

// Calculators for the finite-sample risk bounds and regime conditions.
//
// All "up to an absolute constant" bounds are evaluated with that constant
// set to 1 and natural logarithms. Every report keeps the named inputs it
// was computed from; recompute_bound() re-evaluates the formula from them.

#include <map>
#include <optional>
#include <string>

#include "frlab/model.hpp"

namespace frlab {

struct BoundReport {
  std::string name;
  double value = 0.0;
  std::map<std::string, double> inputs;
  std::map<std::string, bool> conditions;
  /// Named pieces of the bound (bias, variance, alternative forms).
  std::map<std::string, double> components;
  std::string notes;
};

/// Re-evaluates report.value from report.name and report.inputs alone.
double recompute_bound(const BoundReport& report);

/// sqrt(n / r_e(Sigma_X)); bounds |R(X^+y)/R(0) - 1| when r_e(Sigma_X) > n.
BoundReport null_ratio_bound(double n, const PopulationSummary& summary);

/// K/n + r_e(Sigma_E)/(n xi), an upper bound on r_e(Sigma_X)/n.
BoundReport effective_rank_condition(const PopulationSummary& summary, double n);

/// ||beta||^2_{Sigma_Z}/xi * r_e(Sigma_E)/n + s^2 n ln n / r_e(Sigma_E) + s^2 K ln n / n.
BoundReport main_excess_bound(const PopulationSummary& summary, double n);

/// K/lambda_K(A'A) * p/n + s^2 (n/p + K/n) ln n, plus the K^2/n form.
BoundReport purevar_bound(const PopulationSummary& summary, double n);

/// kappa(Sigma_E) ||beta||^2_{Sigma_Z}/xi + (p/n) s^2 ln n, for n > p.
BoundReport lowdim_bound(const PopulationSummary& summary, double n);

/// Stylized PCR bound in its general, noiseless and invertible-noise forms.
BoundReport pcr_bound(const PopulationSummary& summary, double n);

struct BartlettRanks {
  double r_k = 0.0;
  double big_r_k = 0.0;
  bool degenerate = false;  // lambda_{k+1} = 0
};

BartlettRanks bartlett_effective_ranks(const SpectrumSummary& spectrum, Eigen::Index k);

/// Smallest k with r_k / n >= b, if any.
std::optional<Eigen::Index> bartlett_kstar(const SpectrumSummary& spectrum, double n, double b = 2.0);

/// Bias term B, variance term V and the lower bound on B for the generic
/// benign-overfitting bound specialized to the factor model.
BoundReport bartlett_bias_variance(const PopulationSummary& summary, const SpectrumSummary& spectrum,
                                   double n, double b = 2.0);

struct KstarSandwich {
  bool upper_ok = false;
  bool lower_ok = false;
  bool degenerate = false;
};

/// r_l/n <= K/n (1 + 1/xi) + r_e(Sigma_E)/(n xi) for l < K and
/// r_K/n >= r_e(Sigma_E)/n - K/n.
KstarSandwich kstar_sandwich_check(const PopulationSummary& summary, const SpectrumSummary& spectrum, double n);

}  // namespace frlab
