#include "avcl/depth_map.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace avcl {

DepthMap::DepthMap(int width, int height) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("depth map dimensions must be positive");
  const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  values_.assign(n, 0.0);
  valid_.assign(n, 0);
}

DepthMap DepthMap::from_values(int width, int height, std::vector<double> values) {
  DepthMap map(width, height);
  if (values.size() != map.size()) throw std::invalid_argument("depth value count does not match dimensions");
  map.values_ = std::move(values);
  for (std::size_t i = 0; i < map.size(); ++i) {
    const double d = map.values_[i];
    map.valid_[i] = (std::isfinite(d) && d > 0.0) ? 1 : 0;
  }
  return map;
}

void DepthMap::set(std::size_t i, double depth) {
  if (!std::isfinite(depth) || !(depth > 0.0)) throw std::invalid_argument("depth must be finite and positive");
  values_.at(i) = depth;
  valid_[i] = 1;
}

void DepthMap::invalidate(std::size_t i) {
  values_.at(i) = 0.0;
  valid_[i] = 0;
}

std::size_t DepthMap::valid_count() const { return mask_count(valid_); }

void DepthMap::validate() const {
  if (width_ <= 0 || height_ <= 0) throw std::invalid_argument("depth map is empty");
  if (values_.size() != valid_.size() || values_.size() != size())
    throw std::invalid_argument("depth map buffers are inconsistent");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (valid_[i] && (!std::isfinite(values_[i]) || !(values_[i] > 0.0)))
      throw std::invalid_argument("valid depth entries must be finite and positive");
  }
}

Mask mask_and(const Mask& a, const Mask& b) {
  if (a.size() != b.size()) throw std::invalid_argument("mask sizes differ");
  Mask out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] && b[i]) ? 1 : 0;
  return out;
}

std::size_t mask_count(const Mask& m) {
  return static_cast<std::size_t>(std::count_if(m.begin(), m.end(), [](std::uint8_t v) { return v != 0; }));
}

}  // namespace avcl
