#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "avcl/depth_map.hpp"
#include "avcl/geometry.hpp"

namespace avcl {

struct MetricsReport {
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
  double rel = 0.0;
  double log10 = 0.0;
  double rms = 0.0;
  double rms_log = 0.0;
  std::size_t pixels = 0;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Metric names in report order.
const std::vector<std::string>& metric_names();
/// Field values in the order of metric_names().
std::vector<double> metric_values(const MetricsReport& r);

class DegenerateInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Standard monocular depth metrics over pixels valid in both maps:
/// delta_i = fraction with max(pred/gt, gt/pred) < 1.25^i (strict), rel = mean
/// |pred - gt| / gt, log10 = mean |log10 pred - log10 gt|, rms = sqrt(mean
/// (pred - gt)^2), rms_log = sqrt(mean (ln pred - ln gt)^2).
/// Throws DegenerateInputError when no pixel is valid in both maps and
/// std::invalid_argument on a shape mismatch.
MetricsReport evaluate(const DepthMap& pred, const DepthMap& gt);

/// Warps pred and gt by each pose and evaluates the pair on the intersection
/// of the warped validity masks. A view where that intersection is empty is
/// reported as std::nullopt.
std::vector<std::optional<MetricsReport>> multiview_report(const DepthMap& pred, const DepthMap& gt,
                                                           const std::vector<Pose6>& poses, const Intrinsics& K);

/// "name<TAB>value" per metric, one per line.
std::string to_line_protocol(const MetricsReport& r);
/// "name = value" per metric, one per line.
std::string to_kv_block(const MetricsReport& r);

}  // namespace avcl
