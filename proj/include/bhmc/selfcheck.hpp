#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace bhmc {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct CheckOptions {
  std::uint64_t seed = 20230531;
  // Flips the sign of trace_term inside the checks; only used to confirm the
  // suite catches a broken derivative.
  bool inject_trace_sign_error = false;
};

/// Finite-difference, self-concordance, Dikin, involution and energy-order
/// property suites on small presets (d <= 5).
std::vector<CheckResult> run_self_checks(const CheckOptions& opts = {});

void print_check_table(const std::vector<CheckResult>& results, std::ostream& out);

}  // namespace bhmc
