#include "avcl/losses.hpp"

#include <algorithm>
#include <cmath>

namespace avcl {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

void require_pair(const ad::Tensor& pred, const ad::Tensor& target, const Mask& mask, const char* name) {
  if (pred.shape() != target.shape() || pred.size() != mask.size())
    throw std::invalid_argument(std::string(name) + ": prediction, target and mask shapes disagree");
}

ad::Tensor constant_of(const DepthMap& gt) {
  std::vector<double> v(gt.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i)
    if (gt.valid(i)) v[i] = gt[i];
  return ad::Tensor::from({static_cast<std::size_t>(gt.height()), static_cast<std::size_t>(gt.width())}, std::move(v));
}

std::size_t checked_count(const Mask& mask, const char* name) {
  const std::size_t n = mask_count(mask);
  if (n == 0) throw DegenerateMaskError(std::string(name) + ": effective mask is empty");
  return n;
}

// Masked mean of a per-pixel penalty of e = pred - target. `dpen` is the
// derivative of the penalty with respect to e.
template <typename Pen, typename DPen>
ad::Tensor masked_penalty(ad::Tape& tape, const ad::Tensor& pred, const ad::Tensor& target, const Mask& mask,
                          const char* name, Pen pen, DPen dpen) {
  require_pair(pred, target, mask, name);
  const double inv_n = 1.0 / static_cast<double>(checked_count(mask, name));
  double acc = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) acc += pen(pred.data()[i] - target.data()[i]);
  ad::Tensor r = ad::make_result({1}, {acc * inv_n}, {&pred, &target});
  if (r.requires_grad()) {
    tape.record([pred, target, mask, r, inv_n, dpen]() mutable {
      if (!r.has_grad()) return;
      const double g = r.grad()[0] * inv_n;
      std::span<double> gp = pred.requires_grad() ? pred.grad() : std::span<double>{};
      std::span<double> gt = target.requires_grad() ? target.grad() : std::span<double>{};
      for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        const double d = g * dpen(pred.data()[i] - target.data()[i]);
        if (!gp.empty()) gp[i] += d;
        if (!gt.empty()) gt[i] -= d;
      }
    });
  }
  return r;
}

}  // namespace

LossKind parse_loss_kind(const std::string& name) {
  if (name == "l1") return LossKind::l1;
  if (name == "berhu") return LossKind::berhu;
  if (name == "dorn") return LossKind::dorn;
  throw std::invalid_argument("unknown loss kind '" + name + "' (expected l1, berhu or dorn)");
}

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::l1: return "l1";
    case LossKind::berhu: return "berhu";
    case LossKind::dorn: return "dorn";
  }
  return "?";
}

void LossConfig::validate() const {
  for (double l : lambda)
    if (!(l >= 0.0) || !std::isfinite(l)) throw std::invalid_argument("lambda components must be finite and >= 0");
  if (dorn_bins < 2) throw std::invalid_argument("dorn_bins must be at least 2");
  if (!(dorn_sharpness > 0.0)) throw std::invalid_argument("dorn_sharpness must be positive");
  if (!(min_depth > 0.0) || !(max_depth > min_depth)) throw std::invalid_argument("invalid ordinal depth range");
}

ad::Tensor masked_l1(ad::Tape& tape, const ad::Tensor& pred, const ad::Tensor& target, const Mask& mask) {
  return masked_penalty(
      tape, pred, target, mask, "masked_l1", [](double e) { return std::abs(e); },
      [](double e) { return e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0); });
}

ad::Tensor masked_l1(ad::Tape& tape, const ad::Tensor& pred, const DepthMap& gt, const Mask& mask) {
  return masked_l1(tape, pred, constant_of(gt), mask_and(mask, gt.mask()));
}

ad::Tensor masked_berhu(ad::Tape& tape, const ad::Tensor& pred, const ad::Tensor& target, const Mask& mask) {
  require_pair(pred, target, mask, "masked_berhu");
  double max_err = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) max_err = std::max(max_err, std::abs(pred.data()[i] - target.data()[i]));
  const double c = 0.2 * max_err;
  if (c == 0.0) {
    // Every masked error is zero: the quadratic branch is never taken.
    return masked_l1(tape, pred, target, mask);
  }
  return masked_penalty(
      tape, pred, target, mask, "masked_berhu",
      [c](double e) {
        const double a = std::abs(e);
        return a <= c ? a : (e * e + c * c) / (2.0 * c);
      },
      [c](double e) {
        const double a = std::abs(e);
        if (a <= c) return e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0);
        return e / c;
      });
}

ad::Tensor masked_berhu(ad::Tape& tape, const ad::Tensor& pred, const DepthMap& gt, const Mask& mask) {
  return masked_berhu(tape, pred, constant_of(gt), mask_and(mask, gt.mask()));
}

ad::Tensor dorn_soft_count(ad::Tape& tape, const ad::Tensor& probs, const LossConfig& cfg) {
  cfg.validate();
  if (probs.rank() != 3 || probs.dim(0) != static_cast<std::size_t>(cfg.dorn_bins))
    throw std::invalid_argument("dorn_soft_count: expected probabilities [" + std::to_string(cfg.dorn_bins) +
                                ", H, W], got " + ad::shape_string(probs.shape()));
  const std::size_t D = probs.dim(0), plane = probs.dim(1) * probs.dim(2);
  const double s = cfg.dorn_sharpness;
  std::vector<double> count(plane, 0.0);
  const auto x = probs.data();
  for (std::size_t i = 0; i < D; ++i)
    for (std::size_t p = 0; p < plane; ++p) count[p] += sigmoid(s * (x[i * plane + p] - 0.5));
  ad::Tensor r = ad::make_result({probs.dim(1), probs.dim(2)}, std::move(count), {&probs});
  if (r.requires_grad()) {
    tape.record([probs, r, D, plane, s]() mutable {
      if (!r.has_grad()) return;
      const auto g = r.grad();
      const auto x = probs.data();
      auto gx = probs.grad();
      for (std::size_t i = 0; i < D; ++i)
        for (std::size_t p = 0; p < plane; ++p) {
          const double q = sigmoid(s * (x[i * plane + p] - 0.5));
          gx[i * plane + p] += g[p] * s * q * (1.0 - q);
        }
    });
  }
  return r;
}

double dorn_count_to_depth(double count, const LossConfig& cfg) {
  return cfg.min_depth * std::pow(cfg.max_depth / cfg.min_depth, count / cfg.dorn_bins);
}

int dorn_label(double depth, const LossConfig& cfg) {
  const double t = std::log(depth / cfg.min_depth) / std::log(cfg.max_depth / cfg.min_depth);
  const long k = std::lround(t * cfg.dorn_bins);
  return static_cast<int>(std::clamp<long>(k, 0, cfg.dorn_bins));
}

ad::Tensor dorn_soft_decode(ad::Tape& tape, const ad::Tensor& probs, const LossConfig& cfg) {
  const ad::Tensor count = dorn_soft_count(tape, probs, cfg);
  std::vector<double> depth(count.size());
  for (std::size_t p = 0; p < depth.size(); ++p) depth[p] = dorn_count_to_depth(count.data()[p], cfg);
  ad::Tensor r = ad::make_result(count.shape(), std::move(depth), {&count});
  if (r.requires_grad()) {
    const double rate = std::log(cfg.max_depth / cfg.min_depth) / cfg.dorn_bins;
    tape.record([count, r, rate]() mutable {
      if (!r.has_grad()) return;
      const auto g = r.grad();
      const auto y = r.data();
      auto gc = count.grad();
      for (std::size_t p = 0; p < g.size(); ++p) gc[p] += g[p] * y[p] * rate;
    });
  }
  return r;
}

ad::Tensor dorn_loss(ad::Tape& tape, const ad::Tensor& logits, const DepthMap& gt, const Mask& mask,
                     const LossConfig& cfg) {
  cfg.validate();
  if (logits.rank() != 3 || logits.dim(0) != static_cast<std::size_t>(cfg.dorn_bins) ||
      logits.dim(1) != static_cast<std::size_t>(gt.height()) || logits.dim(2) != static_cast<std::size_t>(gt.width()) ||
      mask.size() != gt.size())
    throw std::invalid_argument("dorn_loss: logits, ground truth and mask shapes disagree");
  const Mask eff = mask_and(mask, gt.mask());
  const double inv_n = 1.0 / static_cast<double>(checked_count(eff, "dorn_loss"));
  const std::size_t D = logits.dim(0), plane = gt.size();

  std::vector<int> label(plane, 0);
  for (std::size_t p = 0; p < plane; ++p)
    if (eff[p]) label[p] = dorn_label(gt[p], cfg);

  // -log sigmoid(x) = softplus(-x), -log(1 - sigmoid(x)) = softplus(x).
  const auto x = logits.data();
  double acc = 0.0;
  for (std::size_t p = 0; p < plane; ++p) {
    if (!eff[p]) continue;
    for (std::size_t i = 0; i < D; ++i) {
      const double xi = x[i * plane + p];
      acc += static_cast<int>(i) < label[p] ? softplus(-xi) : softplus(xi);
    }
  }
  ad::Tensor r = ad::make_result({1}, {acc * inv_n}, {&logits});
  if (r.requires_grad()) {
    tape.record([logits, r, eff, label = std::move(label), inv_n, D, plane]() mutable {
      if (!r.has_grad()) return;
      const double g = r.grad()[0] * inv_n;
      const auto x = logits.data();
      auto gx = logits.grad();
      for (std::size_t p = 0; p < plane; ++p) {
        if (!eff[p]) continue;
        for (std::size_t i = 0; i < D; ++i) {
          const double q = sigmoid(x[i * plane + p]);
          gx[i * plane + p] += g * (static_cast<int>(i) < label[p] ? q - 1.0 : q);
        }
      }
    });
  }
  return r;
}

ad::Tensor pose_penalty(ad::Tape& tape, const ad::Tensor& pose, const std::array<double, 6>& lambda) {
  if (pose.size() != 6) throw std::invalid_argument("pose_penalty: pose must have 6 components");
  const ad::Tensor weights = ad::Tensor::from(pose.shape(), std::vector<double>(lambda.begin(), lambda.end()));
  return ad::sum(tape, ad::mul(tape, weights, ad::square(tape, pose)));
}

ad::Tensor adversarial_loss(ad::Tape& tape, const ad::Tensor& l_warp, const ad::Tensor& pose,
                            const std::array<double, 6>& lambda) {
  return ad::add(tape, ad::neg(tape, l_warp), pose_penalty(tape, pose, lambda));
}

}  // namespace avcl
