#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace avcl {

/// Outcome of one finite-difference comparison.
struct GradCheckResult {
  std::string name;
  /// ||analytic - numeric|| / max(||analytic||, ||numeric||) over the checked entries.
  double rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct GradCheckOptions {
  /// Seeds per check; every seed is its own comparison.
  int seeds = 20;
  std::uint64_t first_seed = 1;
  double primitive_tolerance = 1e-6;
  double warp_tolerance = 1e-3;
};

/// Central-difference checks of every differentiable tape op, the losses,
/// the pose squashing, and the warp's depth and pose gradients. Warp checks
/// only use pose and depth perturbations that leave every z-buffer winner
/// unchanged. One result per (check, seed).
std::vector<GradCheckResult> run_gradcheck_suite(const GradCheckOptions& options = {});

}  // namespace avcl
