#pragma once

#include <array>
#include <stdexcept>
#include <string>

#include "avcl/autodiff.hpp"
#include "avcl/depth_map.hpp"

namespace avcl {

enum class LossKind { l1, berhu, dorn };

LossKind parse_loss_kind(const std::string& name);
std::string to_string(LossKind kind);

struct LossConfig {
  LossKind kind = LossKind::l1;
  /// Weights of the squared-pose penalty in the adversarial objective.
  std::array<double, 6> lambda{1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  /// Number of ordinal binary classifiers.
  int dorn_bins = 40;
  /// Slope of the soft step sigmoid(sharpness * (x - 0.5)).
  double dorn_sharpness = 100.0;
  /// Ordinal bins are uniform in log-depth over [min_depth, max_depth].
  double min_depth = 0.1;
  double max_depth = 10.0;

  void validate() const;
};

/// Raised when a loss has no pixel to average over.
class DegenerateMaskError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mean |pred - target| over `mask`. Both tensors [H, W]; either may require grad.
ad::Tensor masked_l1(ad::Tape& tape, const ad::Tensor& pred, const ad::Tensor& target, const Mask& mask);
/// Same, against a ground-truth map; the effective mask is mask AND gt.valid.
ad::Tensor masked_l1(ad::Tape& tape, const ad::Tensor& pred, const DepthMap& gt, const Mask& mask);

/// Reverse Huber: |e| when |e| <= c, (e^2 + c^2) / (2c) otherwise, with
/// c = 0.2 * max masked |e| held constant for differentiation.
ad::Tensor masked_berhu(ad::Tape& tape, const ad::Tensor& pred, const ad::Tensor& target, const Mask& mask);
ad::Tensor masked_berhu(ad::Tape& tape, const ad::Tensor& pred, const DepthMap& gt, const Mask& mask);

/// Soft ordinal count sum_i sigmoid(sharpness * (x_i - 0.5)) per pixel, where
/// x_i = sigmoid(logit_i) is the probability of classifier i, laid out
/// [D, H, W]. Returns [H, W].
ad::Tensor dorn_soft_count(ad::Tape& tape, const ad::Tensor& probs, const LossConfig& cfg);
/// Soft count mapped to meters through the log-uniform bin schedule.
ad::Tensor dorn_soft_decode(ad::Tape& tape, const ad::Tensor& probs, const LossConfig& cfg);

/// min_depth * (max_depth / min_depth)^(count / D); monotone increasing.
double dorn_count_to_depth(double count, const LossConfig& cfg);
/// Ground-truth ordinal label: the count whose decoded depth is nearest in
/// log-depth, clamped to [0, D].
int dorn_label(double depth, const LossConfig& cfg);

/// Masked mean over pixels of the ordinal cross-entropy
/// sum_{i<k} -log sigmoid(x_i) + sum_{i>=k} -log(1 - sigmoid(x_i)), k = dorn_label(gt).
ad::Tensor dorn_loss(ad::Tape& tape, const ad::Tensor& logits, const DepthMap& gt, const Mask& mask,
                     const LossConfig& cfg);

/// -l_warp + sum_i lambda_i * p_i^2.
ad::Tensor adversarial_loss(ad::Tape& tape, const ad::Tensor& l_warp, const ad::Tensor& pose,
                            const std::array<double, 6>& lambda);

/// sum_i lambda_i * p_i^2 alone.
ad::Tensor pose_penalty(ad::Tape& tape, const ad::Tensor& pose, const std::array<double, 6>& lambda);

}  // namespace avcl
