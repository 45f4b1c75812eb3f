#pragma once

// The end-to-end acceptance checks, shared by the `check` subcommand and the
// acceptance test binary.

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace frlab {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
  double budget_seconds = 0.0;
};

struct AcceptanceOptions {
  std::vector<int> only;  // empty runs every criterion
  unsigned threads = 0;
};

inline constexpr int kCriterionCount = 11;

/// Runs the selected criteria in order; `on_result` sees each as it finishes.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options,
                                            const std::function<void(const CriterionResult&)>& on_result = {});

/// "PASS  [ 7] double descent ... (12.3 s / 300 s) detail"
std::string format_result_line(const CriterionResult& r);

}  // namespace frlab
