#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace avcl {

using Mask = std::vector<std::uint8_t>;

/// Dense H x W grid of metric depths with a validity mask. Row-major, index
/// = y * width + x. Valid entries are finite and strictly positive; the value
/// stored at an invalid entry is unspecified and must not be read.
class DepthMap {
 public:
  DepthMap() = default;
  /// All pixels invalid.
  DepthMap(int width, int height);
  /// Pixels holding a finite positive value become valid, everything else invalid.
  static DepthMap from_values(int width, int height, std::vector<double> values);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return values_.size(); }

  double operator[](std::size_t i) const { return values_[i]; }
  double at(int x, int y) const { return values_[index(x, y)]; }
  bool valid(std::size_t i) const { return valid_[i] != 0; }
  bool valid(int x, int y) const { return valid_[index(x, y)] != 0; }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  /// Throws std::invalid_argument unless depth is finite and > 0.
  void set(std::size_t i, double depth);
  void invalidate(std::size_t i);

  std::span<const double> values() const { return values_; }
  const Mask& mask() const { return valid_; }
  std::size_t valid_count() const;

  /// Throws std::invalid_argument when a dimension is nonpositive or a valid
  /// entry breaks the positivity invariant.
  void validate() const;

  friend bool operator==(const DepthMap&, const DepthMap&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
  Mask valid_;
};

/// Elementwise AND of two masks of equal length.
Mask mask_and(const Mask& a, const Mask& b);
std::size_t mask_count(const Mask& m);

}  // namespace avcl
