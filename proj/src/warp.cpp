#include "avcl/warp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace avcl {

WarpResult warp_depth(const DepthMap& source, const Pose6& pose, const Intrinsics& K) {
  source.validate();
  K.validate();
  const RigidTransform t = pose_to_transform(pose);
  const int W = source.width(), H = source.height();

  WarpResult out{DepthMap(W, H), std::vector<int>(source.size(), kNoSource)};
  std::vector<double> zbuf(source.size(), std::numeric_limits<double>::infinity());

  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < W; ++j) {
      const std::size_t s = source.index(j, i);
      if (!source.valid(s)) continue;
      const Vec3 p = t.apply(backproject(j + 0.5, i + 0.5, source[s], K));
      const Projection q = project(p, K);
      if (!q.in_front) continue;
      const double fu = std::floor(q.u), fv = std::floor(q.v);
      if (!(fu >= 0.0 && fu < W && fv >= 0.0 && fv < H)) continue;
      const std::size_t target = out.depth.index(static_cast<int>(fu), static_cast<int>(fv));
      // Strict comparison keeps the earliest source index on ties.
      if (q.z < zbuf[target]) {
        zbuf[target] = q.z;
        out.hit_source[target] = static_cast<int>(s);
      }
    }
  }
  for (std::size_t target = 0; target < zbuf.size(); ++target)
    if (out.hit_source[target] != kNoSource) out.depth.set(target, zbuf[target]);
  return out;
}

WarpGradient warp_depth_backward(const DepthMap& source, const Pose6& pose, const Intrinsics& K,
                                 const WarpResult& result, std::span<const double> upstream) {
  if (result.depth.width() != source.width() || result.depth.height() != source.height() ||
      result.hit_source.size() != source.size() || upstream.size() != source.size())
    throw std::invalid_argument("warp_depth_backward: shape mismatch");
  const RigidTransform t = pose_to_transform(pose);
  const auto dR = rotation_jacobian(pose);
  const Mat3 Kinv = K.inverse();
  const int W = source.width();

  WarpGradient g;
  g.source.assign(source.size(), 0.0);
  for (std::size_t target = 0; target < result.hit_source.size(); ++target) {
    const int s = result.hit_source[target];
    if (s == kNoSource) continue;
    const double up = upstream[target];
    if (up == 0.0) continue;
    const double u = (s % W) + 0.5, v = (s / W) + 0.5;
    const Vec3 ray = Kinv * Vec3{u, v, 1.0};
    const Vec3 X = source[static_cast<std::size_t>(s)] * ray;
    // z_t = (R X)_z + T_z; the third row of K is (0, 0, 1).
    g.source[static_cast<std::size_t>(s)] += up * (t.R * ray).z;
    for (std::size_t k = 0; k < 3; ++k) g.pose[k] += up * (dR[k] * X).z;
    g.pose[5] += up;
  }
  return g;
}

WarpedTensor warp_tensor(ad::Tape& tape, const ad::Tensor& depth, const Mask& source_valid, const ad::Tensor& pose,
                         const Intrinsics& K) {
  if (depth.rank() != 2 || pose.size() != 6 || source_valid.size() != depth.size())
    throw std::invalid_argument("warp_tensor: expected depth [H, W], a matching mask and a 6-vector pose");
  const int H = static_cast<int>(depth.dim(0)), W = static_cast<int>(depth.dim(1));
  std::vector<double> values(depth.data().begin(), depth.data().end());
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!source_valid[i]) values[i] = 0.0;
  DepthMap source = DepthMap::from_values(W, H, std::move(values));
  Pose6 p;
  for (std::size_t k = 0; k < 6; ++k) p[k] = pose.data()[k];

  WarpResult result = warp_depth(source, p, K);
  std::vector<double> out(result.depth.size(), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i)
    if (result.depth.valid(i)) out[i] = result.depth[i];
  ad::Tensor r = ad::make_result({depth.dim(0), depth.dim(1)}, std::move(out), {&depth, &pose});
  if (r.requires_grad()) {
    tape.record([depth, pose, r, source, p, K, res = result]() mutable {
      if (!r.has_grad()) return;
      const WarpGradient g = warp_depth_backward(source, p, K, res, r.grad());
      if (depth.requires_grad()) {
        auto gd = depth.grad();
        for (std::size_t i = 0; i < gd.size(); ++i) gd[i] += g.source[i];
      }
      if (pose.requires_grad()) {
        auto gp = pose.grad();
        for (std::size_t k = 0; k < 6; ++k) gp[k] += g.pose[k];
      }
    });
  }
  return WarpedTensor{r, std::move(result)};
}

}  // namespace avcl
