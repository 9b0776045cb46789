#include "avcl/models.hpp"

#include <cmath>
#include <stdexcept>

#include "avcl/random.hpp"

namespace avcl {

namespace {

Conv make_conv(Rng& rng, int out, int in, int k) {
  const auto O = static_cast<std::size_t>(out), C = static_cast<std::size_t>(in), K = static_cast<std::size_t>(k);
  const double bound = std::sqrt(6.0 / static_cast<double>(in * k * k));
  std::vector<double> w(O * C * K * K);
  for (double& x : w) x = rng.uniform(-bound, bound);
  return Conv{ad::Tensor::from({O, C, K, K}, std::move(w), true), ad::Tensor::zeros({O}, true)};
}

ad::Tensor conv(ad::Tape& tape, const Conv& c, const ad::Tensor& x, bool frozen) {
  if (frozen) return ad::conv2d(tape, x, c.weight.detach(), c.bias.detach());
  return ad::conv2d(tape, x, c.weight, c.bias);
}

Conv clone_conv(const Conv& c) { return Conv{c.weight.clone(), c.bias.clone()}; }

}  // namespace

void PoseRange::validate() const {
  if (!(rot_max > 0.0) || !(trans_max > 0.0) || !std::isfinite(rot_max) || !std::isfinite(trans_max))
    throw std::invalid_argument("pose range bounds must be finite and positive");
}

void ModelConfig::validate() const {
  if (in_channels <= 0 || trunk_channels <= 0 || trunk_layers <= 0 || head_channels <= 0 || depth_outputs <= 0)
    throw std::invalid_argument("model dimensions must be positive");
  pose_range.validate();
}

Model Model::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  Model m;
  m.config_ = config;
  int in = config.in_channels;
  for (int l = 0; l < config.trunk_layers; ++l) {
    m.trunk.layers.push_back(make_conv(rng, config.trunk_channels, in, 3));
    in = config.trunk_channels;
  }
  const int hc = config.head_channels;
  m.depth_head.conv3 = make_conv(rng, hc, config.trunk_channels, 3);
  m.depth_head.conv1 = make_conv(rng, hc, hc, 1);
  m.depth_head.linear = make_conv(rng, config.depth_outputs, hc, 1);
  if (config.depth_outputs == 1) {
    // 0.1 + softplus(b) = 3 m before training.
    m.depth_head.linear.bias.data()[0] = std::log(std::expm1(2.9));
  }

  m.pose_head.conv_a = make_conv(rng, hc, config.trunk_channels, 3);
  m.pose_head.conv_b = make_conv(rng, hc, hc, 3);
  const double bound = std::sqrt(6.0 / hc);
  std::vector<double> fc(static_cast<std::size_t>(hc) * 6);
  for (double& x : fc) x = rng.uniform(-bound, bound);
  m.pose_head.fc_weight = ad::Tensor::from({static_cast<std::size_t>(hc), 6}, std::move(fc), true);
  m.pose_head.fc_bias = ad::Tensor::zeros({1, 6}, true);
  return m;
}

std::vector<ad::Tensor> Model::trunk_params() const {
  std::vector<ad::Tensor> out;
  for (const Conv& c : trunk.layers) {
    out.push_back(c.weight);
    out.push_back(c.bias);
  }
  return out;
}

std::vector<ad::Tensor> Model::depth_params() const {
  return {depth_head.conv3.weight, depth_head.conv3.bias, depth_head.conv1.weight,
          depth_head.conv1.bias,   depth_head.linear.weight, depth_head.linear.bias};
}

std::vector<ad::Tensor> Model::pose_params() const {
  return {pose_head.conv_a.weight, pose_head.conv_a.bias, pose_head.conv_b.weight,
          pose_head.conv_b.bias,   pose_head.fc_weight,   pose_head.fc_bias};
}

std::vector<std::pair<std::string, ad::Tensor>> Model::named_parameters() const {
  std::vector<std::pair<std::string, ad::Tensor>> out;
  for (std::size_t l = 0; l < trunk.layers.size(); ++l) {
    out.emplace_back("trunk." + std::to_string(l) + ".weight", trunk.layers[l].weight);
    out.emplace_back("trunk." + std::to_string(l) + ".bias", trunk.layers[l].bias);
  }
  out.emplace_back("depth.conv3.weight", depth_head.conv3.weight);
  out.emplace_back("depth.conv3.bias", depth_head.conv3.bias);
  out.emplace_back("depth.conv1.weight", depth_head.conv1.weight);
  out.emplace_back("depth.conv1.bias", depth_head.conv1.bias);
  out.emplace_back("depth.linear.weight", depth_head.linear.weight);
  out.emplace_back("depth.linear.bias", depth_head.linear.bias);
  out.emplace_back("pose.conv_a.weight", pose_head.conv_a.weight);
  out.emplace_back("pose.conv_a.bias", pose_head.conv_a.bias);
  out.emplace_back("pose.conv_b.weight", pose_head.conv_b.weight);
  out.emplace_back("pose.conv_b.bias", pose_head.conv_b.bias);
  out.emplace_back("pose.fc.weight", pose_head.fc_weight);
  out.emplace_back("pose.fc.bias", pose_head.fc_bias);
  return out;
}

Model Model::clone() const {
  Model m;
  m.config_ = config_;
  for (const Conv& c : trunk.layers) m.trunk.layers.push_back(clone_conv(c));
  m.depth_head = DepthHead{clone_conv(depth_head.conv3), clone_conv(depth_head.conv1), clone_conv(depth_head.linear)};
  m.pose_head = PoseHead{clone_conv(pose_head.conv_a), clone_conv(pose_head.conv_b), pose_head.fc_weight.clone(),
                         pose_head.fc_bias.clone()};
  return m;
}

ad::Tensor trunk_forward(ad::Tape& tape, const Trunk& trunk, const ad::Tensor& image) {
  if (trunk.layers.empty()) throw std::invalid_argument("trunk has no layers");
  if (image.rank() != 3 || image.dim(0) != trunk.layers.front().weight.dim(1))
    throw std::invalid_argument("trunk_forward: image shape " + ad::shape_string(image.shape()) +
                                " does not match the first layer");
  ad::Tensor h = image;
  for (const Conv& c : trunk.layers) h = ad::relu(tape, ad::conv2d(tape, h, c.weight, c.bias));
  return h;
}

ad::Tensor depth_head_raw(ad::Tape& tape, const DepthHead& head, const ad::Tensor& z, bool frozen_params) {
  ad::Tensor h = ad::relu(tape, conv(tape, head.conv3, z, frozen_params));
  h = ad::relu(tape, conv(tape, head.conv1, h, frozen_params));
  return conv(tape, head.linear, h, frozen_params);
}

ad::Tensor depth_head_forward(ad::Tape& tape, const DepthHead& head, const ad::Tensor& z, bool frozen_params) {
  if (head.linear.weight.dim(0) != 1)
    throw std::invalid_argument("depth_head_forward: head has ordinal outputs; decode them instead");
  const ad::Tensor raw = depth_head_raw(tape, head, z, frozen_params);
  const ad::Tensor d = ad::add_scalar(tape, ad::softplus(tape, raw), 0.1);
  return ad::reshape(tape, d, {raw.dim(1), raw.dim(2)});
}

ad::Tensor pose_head_raw(ad::Tape& tape, const PoseHead& head, const ad::Tensor& z) {
  ad::Tensor h = ad::relu(tape, ad::conv2d(tape, z, head.conv_a.weight, head.conv_a.bias));
  h = ad::avg_pool2(tape, h);
  h = ad::relu(tape, ad::conv2d(tape, h, head.conv_b.weight, head.conv_b.bias));
  const ad::Tensor pooled = ad::channel_mean(tape, h);
  return ad::add(tape, ad::matmul(tape, pooled, head.fc_weight), head.fc_bias);
}

ad::Tensor squash_pose(ad::Tape& tape, const ad::Tensor& raw, const PoseRange& range) {
  range.validate();
  if (raw.size() != 6) throw std::invalid_argument("squash_pose: expected 6 components");
  // 2 sigmoid(r) - 1 == tanh(r / 2).
  std::vector<double> out(6);
  std::vector<double> slope(6);
  for (std::size_t i = 0; i < 6; ++i) {
    const double t = std::tanh(0.5 * raw.data()[i]);
    const double b = range.bound(i);
    out[i] = b * t;
    // tanh rounds to +-1 for large |r|; stay strictly inside the range.
    if (std::abs(out[i]) >= b) out[i] = std::copysign(std::nextafter(b, 0.0), t);
    slope[i] = 0.5 * b * (1.0 - t * t);
  }
  ad::Tensor r = ad::make_result(raw.shape(), std::move(out), {&raw});
  if (r.requires_grad()) {
    tape.record([raw, r, slope = std::move(slope)]() mutable {
      if (!r.has_grad()) return;
      auto g = raw.grad();
      for (std::size_t i = 0; i < 6; ++i) g[i] += r.grad()[i] * slope[i];
    });
  }
  return r;
}

ad::Tensor pose_head_forward(ad::Tape& tape, const PoseHead& head, const ad::Tensor& z, const PoseRange& range) {
  return squash_pose(tape, pose_head_raw(tape, head, z), range);
}

}  // namespace avcl
