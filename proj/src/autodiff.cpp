#include "avcl/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace avcl::ad {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                                shape_string(b.shape()));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

// Shared shape of unary elementwise ops: value and local derivative as
// functions of the input (and output) element.
template <typename Fwd, typename Deriv>
Tensor unary(Tape& tape, const Tensor& a, Fwd fwd, Deriv deriv) {
  std::vector<double> out(a.size());
  const auto in = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
  Tensor r = make_result(a.shape(), std::move(out), {&a});
  if (r.requires_grad()) {
    tape.record([a, r, deriv]() mutable {
      if (!r.has_grad()) return;
      auto ga = a.grad();
      const auto gr = r.grad();
      const auto x = a.data();
      const auto y = r.data();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gr[i] * deriv(x[i], y[i]);
    });
  }
  return r;
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_size(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape.empty()) throw std::invalid_argument("tensor shape must have at least one dimension");
  if (data.size() != shape_size(shape))
    throw std::invalid_argument("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                                shape_string(shape));
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = std::move(shape);
  t.impl_->data = std::move(data);
  t.impl_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item() requires a single-element tensor");
  return impl_->data[0];
}

std::span<double> Tensor::grad() const {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() const { impl_->grad.assign(impl_->data.size(), 0.0); }

Tensor Tensor::detach() const { return from(impl_->shape, impl_->data, false); }

Tensor Tensor::clone() const { return from(impl_->shape, impl_->data, impl_->requires_grad); }

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1)
    throw std::invalid_argument("backward requires a scalar loss, got shape " + shape_string(loss.shape()));
  if (ops_.empty()) throw std::logic_error("backward called on an empty tape");
  Tensor seed = loss;
  seed.grad()[0] += 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
  ops_.clear();
}

Tensor make_result(Shape shape, std::vector<double> data, std::initializer_list<const Tensor*> inputs) {
  bool rg = false;
  for (const Tensor* t : inputs) rg = rg || t->requires_grad();
  return Tensor::from(std::move(shape), std::move(data), rg);
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  Tensor r = make_result(a.shape(), std::move(out), {&a, &b});
  if (r.requires_grad()) {
    tape.record([a, b, r]() mutable {
      if (!r.has_grad()) return;
      const auto g = r.grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    });
  }
  return r;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  Tensor r = make_result(a.shape(), std::move(out), {&a, &b});
  if (r.requires_grad()) {
    tape.record([a, b, r]() mutable {
      if (!r.has_grad()) return;
      const auto g = r.grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
    });
  }
  return r;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  Tensor r = make_result(a.shape(), std::move(out), {&a, &b});
  if (r.requires_grad()) {
    tape.record([a, b, r]() mutable {
      if (!r.has_grad()) return;
      const auto g = r.grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        const auto bv = b.data();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        const auto av = a.data();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
      }
    });
  }
  return r;
}

Tensor add_scalar(Tape& tape, const Tensor& a, double s) {
  return unary(tape, a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(Tape& tape, const Tensor& a, double s) {
  return unary(tape, a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor neg(Tape& tape, const Tensor& a) { return mul_scalar(tape, a, -1.0); }

Tensor relu(Tape& tape, const Tensor& a) {
  return unary(
      tape, a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(Tape& tape, const Tensor& a) {
  return unary(tape, a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(Tape& tape, const Tensor& a) {
  return unary(tape, a, stable_softplus, [](double x, double) { return stable_sigmoid(x); });
}

Tensor abs(Tape& tape, const Tensor& a) {
  return unary(
      tape, a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor square(Tape& tape, const Tensor& a) {
  return unary(tape, a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor sum(Tape& tape, const Tensor& a) {
  double s = 0.0;
  for (double x : a.data()) s += x;
  Tensor r = make_result({1}, {s}, {&a});
  if (r.requires_grad()) {
    tape.record([a, r]() mutable {
      if (!r.has_grad()) return;
      const double g = r.grad()[0];
      for (double& ga : a.grad()) ga += g;
    });
  }
  return r;
}

Tensor mean(Tape& tape, const Tensor& a) {
  return mul_scalar(tape, sum(tape, a), 1.0 / static_cast<double>(a.size()));
}

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw std::invalid_argument("matmul: incompatible shapes " + shape_string(a.shape()) + " and " +
                                shape_string(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * bv[p * n + j];
    }
  Tensor r = make_result({m, n}, std::move(out), {&a, &b});
  if (r.requires_grad()) {
    tape.record([a, b, r, m, k, n]() mutable {
      if (!r.has_grad()) return;
      const auto g = r.grad();
      const auto av = a.data();
      const auto bv = b.data();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * bv[p * n + j];
            ga[i * k + p] += s;
          }
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
          }
      }
    });
  }
  return r;
}

namespace {

struct ConvGeometry {
  std::size_t channels, out_channels, height, width, kernel;
  int pad;
};

// For kernel offset d in [-pad, pad], the output columns x whose input column
// x + d lies inside [0, extent).
inline std::pair<std::size_t, std::size_t> valid_range(int d, std::size_t extent) {
  const int lo = std::max(0, -d);
  const int hi = std::min(static_cast<int>(extent), static_cast<int>(extent) - d);
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(std::max(lo, hi))};
}

}  // namespace

Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() != 3 || weight.rank() != 4 || bias.rank() != 1)
    throw std::invalid_argument("conv2d: expected x [C,H,W], weight [O,C,k,k], bias [O]");
  const std::size_t k = weight.dim(2);
  if ((k != 1 && k != 3) || weight.dim(3) != k)
    throw std::invalid_argument("conv2d: only 1x1 and 3x3 kernels are supported");
  if (weight.dim(1) != x.dim(0) || bias.dim(0) != weight.dim(0))
    throw std::invalid_argument("conv2d: channel mismatch between " + shape_string(x.shape()) + ", " +
                                shape_string(weight.shape()) + ", " + shape_string(bias.shape()));
  const ConvGeometry g{x.dim(0), weight.dim(0), x.dim(1), x.dim(2), k, static_cast<int>(k / 2)};
  const std::size_t plane = g.height * g.width;

  std::vector<double> out(g.out_channels * plane);
  const auto in = x.data();
  const auto w = weight.data();
  for (std::size_t o = 0; o < g.out_channels; ++o) {
    double* dst = out.data() + o * plane;
    std::fill(dst, dst + plane, bias.data()[o]);
    for (std::size_t c = 0; c < g.channels; ++c) {
      const double* src = in.data() + c * plane;
      for (std::size_t ky = 0; ky < k; ++ky) {
        const int dy = static_cast<int>(ky) - g.pad;
        const auto [y0, y1] = valid_range(dy, g.height);
        for (std::size_t kx = 0; kx < k; ++kx) {
          const int dx = static_cast<int>(kx) - g.pad;
          const auto [x0, x1] = valid_range(dx, g.width);
          const double wv = w[((o * g.channels + c) * k + ky) * k + kx];
          for (std::size_t yy = y0; yy < y1; ++yy) {
            double* drow = dst + yy * g.width;
            const double* srow = src + (yy + dy) * g.width + dx;
            for (std::size_t xx = x0; xx < x1; ++xx) drow[xx] += wv * srow[xx];
          }
        }
      }
    }
  }

  Tensor r = make_result({g.out_channels, g.height, g.width}, std::move(out), {&x, &weight, &bias});
  if (r.requires_grad()) {
    tape.record([x, weight, bias, r, g, plane]() mutable {
      if (!r.has_grad()) return;
      const auto gout = r.grad();
      const auto in = x.data();
      const auto w = weight.data();
      const std::size_t k = g.kernel;
      if (bias.requires_grad()) {
        auto gb = bias.grad();
        for (std::size_t o = 0; o < g.out_channels; ++o) {
          double s = 0.0;
          for (std::size_t i = 0; i < plane; ++i) s += gout[o * plane + i];
          gb[o] += s;
        }
      }
      const bool want_x = x.requires_grad();
      const bool want_w = weight.requires_grad();
      std::span<double> gx = want_x ? x.grad() : std::span<double>{};
      std::span<double> gw = want_w ? weight.grad() : std::span<double>{};
      for (std::size_t o = 0; o < g.out_channels; ++o) {
        const double* go = gout.data() + o * plane;
        for (std::size_t c = 0; c < g.channels; ++c) {
          const double* src = in.data() + c * plane;
          for (std::size_t ky = 0; ky < k; ++ky) {
            const int dy = static_cast<int>(ky) - g.pad;
            const auto [y0, y1] = valid_range(dy, g.height);
            for (std::size_t kx = 0; kx < k; ++kx) {
              const int dx = static_cast<int>(kx) - g.pad;
              const auto [x0, x1] = valid_range(dx, g.width);
              const std::size_t widx = ((o * g.channels + c) * k + ky) * k + kx;
              const double wv = w[widx];
              double acc = 0.0;
              for (std::size_t yy = y0; yy < y1; ++yy) {
                const double* grow = go + yy * g.width;
                const std::size_t sofs = c * plane + (yy + dy) * g.width + dx;
                if (want_w) {
                  const double* srow = src + (yy + dy) * g.width + dx;
                  for (std::size_t xx = x0; xx < x1; ++xx) acc += grow[xx] * srow[xx];
                }
                if (want_x) {
                  double* gxrow = gx.data() + sofs;
                  for (std::size_t xx = x0; xx < x1; ++xx) gxrow[xx] += wv * grow[xx];
                }
              }
              if (want_w) gw[widx] += acc;
            }
          }
        }
      }
    });
  }
  return r;
}

Tensor avg_pool2(Tape& tape, const Tensor& x) {
  if (x.rank() != 3 || x.dim(1) < 2 || x.dim(2) < 2)
    throw std::invalid_argument("avg_pool2: expected [C,H,W] with H, W >= 2");
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2), h = H / 2, w = W / 2;
  std::vector<double> out(C * h * w);
  const auto in = x.data();
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        const std::size_t base = c * H * W + 2 * i * W + 2 * j;
        out[(c * h + i) * w + j] = 0.25 * (in[base] + in[base + 1] + in[base + W] + in[base + W + 1]);
      }
  Tensor r = make_result({C, h, w}, std::move(out), {&x});
  if (r.requires_grad()) {
    tape.record([x, r, C, H, W, h, w]() mutable {
      if (!r.has_grad()) return;
      const auto g = r.grad();
      auto gx = x.grad();
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < h; ++i)
          for (std::size_t j = 0; j < w; ++j) {
            const double q = 0.25 * g[(c * h + i) * w + j];
            const std::size_t base = c * H * W + 2 * i * W + 2 * j;
            gx[base] += q;
            gx[base + 1] += q;
            gx[base + W] += q;
            gx[base + W + 1] += q;
          }
    });
  }
  return r;
}

Tensor channel_mean(Tape& tape, const Tensor& x) {
  if (x.rank() != 3) throw std::invalid_argument("channel_mean: expected [C,H,W]");
  const std::size_t C = x.dim(0), plane = x.dim(1) * x.dim(2);
  std::vector<double> out(C, 0.0);
  const auto in = x.data();
  for (std::size_t c = 0; c < C; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += in[c * plane + i];
    out[c] = s / static_cast<double>(plane);
  }
  Tensor r = make_result({1, C}, std::move(out), {&x});
  if (r.requires_grad()) {
    tape.record([x, r, C, plane]() mutable {
      if (!r.has_grad()) return;
      const auto g = r.grad();
      auto gx = x.grad();
      for (std::size_t c = 0; c < C; ++c) {
        const double q = g[c] / static_cast<double>(plane);
        for (std::size_t i = 0; i < plane; ++i) gx[c * plane + i] += q;
      }
    });
  }
  return r;
}

Tensor reshape(Tape& tape, const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size())
    throw std::invalid_argument("reshape: " + shape_string(a.shape()) + " cannot become " + shape_string(shape));
  Tensor r = make_result(std::move(shape), std::vector<double>(a.data().begin(), a.data().end()), {&a});
  if (r.requires_grad()) {
    tape.record([a, r]() mutable {
      if (!r.has_grad()) return;
      auto ga = a.grad();
      const auto g = r.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }
  return r;
}

Tensor gradient_reversal(Tape& tape, const Tensor& x) {
  Tensor r = make_result(x.shape(), std::vector<double>(x.data().begin(), x.data().end()), {&x});
  if (r.requires_grad()) {
    tape.record([x, r]() mutable {
      if (!r.has_grad()) return;
      auto gx = x.grad();
      const auto g = r.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] -= g[i];
    });
  }
  return r;
}

void sgd_step(std::span<Tensor> params, double lr) {
  for (Tensor& p : params)
    if (!p.has_grad()) throw std::logic_error("sgd_step: parameter has no gradient");
  for (Tensor& p : params) {
    auto d = p.data();
    auto g = p.grad();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] -= lr * g[i];
    p.zero_grad();
  }
}

Sgd::Sgd(std::vector<Tensor> params, double lr, double momentum)
    : params_(std::move(params)), lr_(lr), momentum_(momentum) {
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("momentum must lie in [0, 1)");
  for (const Tensor& p : params_) velocity_.emplace_back(p.size(), 0.0);
}

void Sgd::step() {
  if (momentum_ == 0.0) {
    sgd_step(params_, lr_);
    return;
  }
  for (Tensor& p : params_)
    if (!p.has_grad()) throw std::logic_error("sgd_step: parameter has no gradient");
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto d = params_[k].data();
    auto g = params_[k].grad();
    auto& v = velocity_[k];
    for (std::size_t i = 0; i < d.size(); ++i) {
      v[i] = momentum_ * v[i] + g[i];
      d[i] -= lr_ * v[i];
    }
    params_[k].zero_grad();
  }
}

}  // namespace avcl::ad
