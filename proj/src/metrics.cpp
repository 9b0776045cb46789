#include "avcl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "avcl/warp.hpp"

namespace avcl {

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"delta1", "delta2", "delta3", "rel", "log10", "rms", "rms_log"};
  return names;
}

std::vector<double> metric_values(const MetricsReport& r) {
  return {r.delta1, r.delta2, r.delta3, r.rel, r.log10, r.rms, r.rms_log};
}

MetricsReport evaluate(const DepthMap& pred, const DepthMap& gt) {
  if (pred.width() != gt.width() || pred.height() != gt.height())
    throw std::invalid_argument("evaluate: prediction and ground truth shapes differ");
  constexpr double t1 = 1.25, t2 = 1.25 * 1.25, t3 = 1.25 * 1.25 * 1.25;
  std::size_t n = 0, c1 = 0, c2 = 0, c3 = 0;
  double rel = 0.0, lg10 = 0.0, sq = 0.0, sqlog = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!pred.valid(i) || !gt.valid(i)) continue;
    const double p = pred[i], g = gt[i];
    if (!(p > 0.0) || !(g > 0.0)) throw std::invalid_argument("evaluate: depths must be positive");
    const double ratio = std::max(p / g, g / p);
    c1 += ratio < t1;
    c2 += ratio < t2;
    c3 += ratio < t3;
    rel += std::abs(p - g) / g;
    lg10 += std::abs(std::log10(p) - std::log10(g));
    sq += (p - g) * (p - g);
    const double dl = std::log(p) - std::log(g);
    sqlog += dl * dl;
    ++n;
  }
  if (n == 0) throw DegenerateInputError("evaluate: prediction and ground truth share no valid pixel");
  const double inv = 1.0 / static_cast<double>(n);
  MetricsReport r;
  r.delta1 = static_cast<double>(c1) * inv;
  r.delta2 = static_cast<double>(c2) * inv;
  r.delta3 = static_cast<double>(c3) * inv;
  r.rel = rel * inv;
  r.log10 = lg10 * inv;
  r.rms = std::sqrt(sq * inv);
  r.rms_log = std::sqrt(sqlog * inv);
  r.pixels = n;
  return r;
}

std::vector<std::optional<MetricsReport>> multiview_report(const DepthMap& pred, const DepthMap& gt,
                                                           const std::vector<Pose6>& poses, const Intrinsics& K) {
  if (pred.width() != gt.width() || pred.height() != gt.height())
    throw std::invalid_argument("multiview_report: prediction and ground truth shapes differ");
  std::vector<std::optional<MetricsReport>> out;
  out.reserve(poses.size());
  for (const Pose6& pose : poses) {
    const WarpResult wp = warp_depth(pred, pose, K);
    const WarpResult wg = warp_depth(gt, pose, K);
    try {
      out.emplace_back(evaluate(wp.depth, wg.depth));
    } catch (const DegenerateInputError&) {
      out.emplace_back(std::nullopt);
    }
  }
  return out;
}

std::string to_line_protocol(const MetricsReport& r) {
  std::string s;
  const auto& names = metric_names();
  const auto values = metric_values(r);
  char buf[64];
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", values[i]);
    std::string v = buf;
    // Keep integral values recognisably floating point: "1.0", not "1".
    if (v.find_first_of(".eni") == std::string::npos) v += ".0";
    s += names[i] + '\t' + v + '\n';
  }
  return s;
}

std::string to_kv_block(const MetricsReport& r) {
  std::string s;
  const auto& names = metric_names();
  const auto values = metric_values(r);
  char buf[64];
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6f", values[i]);
    s += names[i] + " = " + buf + '\n';
  }
  return s;
}

}  // namespace avcl
