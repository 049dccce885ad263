#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dcan {

inline constexpr double kFiniteDifferenceStep = 1e-5;
inline constexpr double kLossGradTolerance = 1e-5;
inline constexpr double kCompositeGradTolerance = 1e-4;

// |a − n| / max(|a|, |n|, floor). The floor keeps entries that are zero up to
// round-off from dominating the report.
inline constexpr double kRelativeErrorFloor = 1e-6;
double relative_error(double analytic, double numeric);

struct SuiteReport {
  std::string name;
  std::size_t checks = 0;
  double max_relative_error = 0.0;
  double threshold = 0.0;
  bool passed = true;
  std::string worst_case;  // JSON describing the worst entry
};

struct GradcheckReport {
  std::uint64_t seed = 0;
  std::size_t trials = 0;
  std::vector<SuiteReport> suites;
  bool passed = true;

  std::string to_json() const;
};

// Central finite-difference comparisons for the CMMD, mutual-information,
// partial mutual-information and composite model gradients. Trial t of every
// suite uses a generator seeded from (seed, t).
GradcheckReport run_gradcheck(std::uint64_t seed, std::size_t trials);

}  // namespace dcan
