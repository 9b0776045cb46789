#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

// Minimal reverse-mode automatic differentiation over dense float64 tensors.
//
// A Tensor is a shared handle: copies alias the same buffer. Operations are
// free functions taking the Tape that records them. An op is recorded only
// when at least one input requires a gradient; its output then requires one
// too. Tape::backward runs the recorded closures in exact reverse order and
// clears the tape.

namespace avcl::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t dim(std::size_t i) const { return impl_->shape.at(i); }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t size() const { return impl_->data.size(); }

  // Handle semantics: constness of the handle does not extend to the buffer.
  std::span<double> data() const { return impl_->data; }
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool on) const { impl_->requires_grad = on; }

  bool has_grad() const { return !impl_->grad.empty(); }
  /// Allocates a zero gradient on first use.
  std::span<double> grad() const;
  /// Sets the gradient to zeros (allocating it if absent).
  void zero_grad() const;
  void drop_grad() const { impl_->grad.clear(); }

  /// New leaf holding a copy of the values; never requires grad.
  Tensor detach() const;
  /// New leaf holding a copy of the values with the same requires_grad flag.
  Tensor clone() const;

  /// Identity of the underlying buffer.
  const void* id() const { return impl_.get(); }

 private:
  struct Impl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;
};

class Tape {
 public:
  using BackwardFn = std::function<void()>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  void record(BackwardFn fn) { ops_.push_back(std::move(fn)); }
  std::size_t size() const { return ops_.size(); }
  bool empty() const { return ops_.empty(); }
  void clear() { ops_.clear(); }

  /// Seeds d(loss)/d(loss) = 1, runs every recorded op backward in reverse
  /// order, then clears the tape. Gradients accumulate into existing buffers.
  /// Throws std::invalid_argument for a non-scalar loss, std::logic_error for
  /// an empty tape.
  void backward(const Tensor& loss);

 private:
  std::vector<BackwardFn> ops_;
};

/// Result tensor for custom ops: requires_grad when any of `inputs` does.
Tensor make_result(Shape shape, std::vector<double> data, std::initializer_list<const Tensor*> inputs);

// Elementwise, shapes must match exactly.
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);

Tensor add_scalar(Tape& tape, const Tensor& a, double s);
Tensor mul_scalar(Tape& tape, const Tensor& a, double s);
Tensor neg(Tape& tape, const Tensor& a);

Tensor relu(Tape& tape, const Tensor& a);
Tensor sigmoid(Tape& tape, const Tensor& a);
Tensor softplus(Tape& tape, const Tensor& a);
Tensor abs(Tape& tape, const Tensor& a);
Tensor square(Tape& tape, const Tensor& a);

/// Scalar (shape {1}) reductions.
Tensor sum(Tape& tape, const Tensor& a);
Tensor mean(Tape& tape, const Tensor& a);

/// a: [m, k], b: [k, n] -> [m, n].
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

/// x: [C, H, W], weight: [O, C, k, k] with k in {1, 3}, bias: [O].
/// Stride 1, zero padding k / 2, output [O, H, W].
Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& weight, const Tensor& bias);

/// [C, H, W] -> [C, H / 2, W / 2], mean over non-overlapping 2x2 windows.
Tensor avg_pool2(Tape& tape, const Tensor& x);
/// [C, H, W] -> [1, C], spatial mean per channel.
Tensor channel_mean(Tape& tape, const Tensor& x);

/// Same buffer length, new shape.
Tensor reshape(Tape& tape, const Tensor& a, Shape shape);

/// Forward identity, backward multiplies the upstream gradient by -1.
Tensor gradient_reversal(Tape& tape, const Tensor& x);

/// p <- p - lr * grad(p), then zeroes the gradient. Throws std::logic_error
/// when a parameter has no gradient.
void sgd_step(std::span<Tensor> params, double lr);

/// SGD with optional momentum: v <- mu v + g, p <- p - lr v.
class Sgd {
 public:
  Sgd(std::vector<Tensor> params, double lr, double momentum = 0.0);
  void step();
  double lr() const { return lr_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> velocity_;
  double lr_;
  double momentum_;
};

}  // namespace avcl::ad
