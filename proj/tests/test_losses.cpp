#include <doctest.h>

#include <cmath>

#include "avcl/losses.hpp"
#include "avcl/random.hpp"

using namespace avcl;

namespace {

ad::Tensor map_tensor(const std::vector<double>& v, std::size_t H, std::size_t W, bool grad = false) {
  return ad::Tensor::from({H, W}, v, grad);
}

std::vector<double> random_values(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace

TEST_CASE("masked L1") {
  ad::Tape tape;
  const std::vector<double> gt{1, 2, 3, 4, 5, 6};
  const Mask all(6, 1);
  CHECK(masked_l1(tape, map_tensor(gt, 2, 3), map_tensor(gt, 2, 3), all).item() == 0.0);
  std::vector<double> shifted = gt;
  for (double& x : shifted) x += 0.3;
  CHECK(masked_l1(tape, map_tensor(shifted, 2, 3), map_tensor(gt, 2, 3), all).item() == doctest::Approx(0.3).epsilon(1e-15));

  SUBCASE("subgradient is sign / |mask| on masked pixels only") {
    const Mask m{1, 0, 1, 1, 0, 1};
    ad::Tensor pred = map_tensor({0, 9, 4, 3, 9, 7}, 2, 3, true);
    ad::Tape t;
    t.backward(masked_l1(t, pred, map_tensor(gt, 2, 3), m));
    const double expected[6] = {-0.25, 0, 0.25, -0.25, 0, 0.25};
    for (std::size_t i = 0; i < 6; ++i) CHECK(pred.grad()[i] == expected[i]);
  }
  SUBCASE("ground-truth overload drops invalid pixels") {
    const DepthMap g = DepthMap::from_values(3, 2, {1, 0, 3, 4, -1, 6});
    const double l = masked_l1(tape, map_tensor({2, 100, 3, 4, 100, 6}, 2, 3), g, all).item();
    CHECK(l == 0.25);
  }
  SUBCASE("empty mask is degenerate") {
    CHECK_THROWS_AS(masked_l1(tape, map_tensor(gt, 2, 3), map_tensor(gt, 2, 3), Mask(6, 0)), DegenerateMaskError);
    CHECK_THROWS_AS(masked_berhu(tape, map_tensor(gt, 2, 3), map_tensor(gt, 2, 3), Mask(6, 0)), DegenerateMaskError);
  }
}

TEST_CASE("berHu") {
  ad::Tape tape;
  const std::vector<double> gt{1, 2, 3, 4};
  const Mask all(4, 1);
  SUBCASE("uniform error lands on the quadratic branch") {
    std::vector<double> pred = gt;
    for (double& x : pred) x += 0.3;
    // c = 0.06, (0.09 + 0.0036) / 0.12 = 0.78 per pixel.
    CHECK(masked_berhu(tape, map_tensor(pred, 2, 2), map_tensor(gt, 2, 2), all).item() ==
          doctest::Approx(0.78).epsilon(1e-12));
  }
  SUBCASE("zero error") { CHECK(masked_berhu(tape, map_tensor(gt, 2, 2), map_tensor(gt, 2, 2), all).item() == 0.0); }
  SUBCASE("both branches meet at the threshold") {
    // Errors 1 and 0.2 give c = 0.2; the second pixel sits exactly on the branch point.
    const std::vector<double> t{0, 0, 0, 0};
    const double l = masked_berhu(tape, map_tensor({1, 0.2, 0, 0}, 2, 2), map_tensor(t, 2, 2), all).item();
    const double c = 0.2;
    const double quad_at_c = (c * c + c * c) / (2 * c);
    CHECK(std::abs(quad_at_c - c) <= 1e-15);
    const double expected = ((1.0 + c * c) / (2 * c) + c) / 4.0;
    CHECK(std::abs(l - expected) <= 1e-12);
    // Just either side of the threshold the penalty is continuous.
    const double below = masked_berhu(tape, map_tensor({1, 0.2 - 1e-9, 0, 0}, 2, 2), map_tensor(t, 2, 2), all).item();
    const double above = masked_berhu(tape, map_tensor({1, 0.2 + 1e-9, 0, 0}, 2, 2), map_tensor(t, 2, 2), all).item();
    CHECK(std::abs(below - l) <= 1e-9);
    CHECK(std::abs(above - l) <= 1e-9);
  }
}

TEST_CASE("mask perturbation invariance") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const auto pred = random_values(rng, 30, 0.5, 5), gt = random_values(rng, 30, 0.5, 5);
    Mask m(30);
    for (auto& x : m) x = rng.unit() < 0.6;
    m[0] = 1;
    auto pred2 = pred, gt2 = gt;
    for (std::size_t i = 0; i < 30; ++i)
      if (!m[i]) pred2[i] = rng.uniform(0.1, 50), gt2[i] = rng.uniform(0.1, 50);
    ad::Tape tape;
    CHECK(masked_l1(tape, map_tensor(pred, 5, 6), map_tensor(gt, 5, 6), m).item() ==
          masked_l1(tape, map_tensor(pred2, 5, 6), map_tensor(gt2, 5, 6), m).item());
    CHECK(masked_berhu(tape, map_tensor(pred, 5, 6), map_tensor(gt, 5, 6), m).item() ==
          masked_berhu(tape, map_tensor(pred2, 5, 6), map_tensor(gt2, 5, 6), m).item());
    LossConfig cfg;
    cfg.dorn_bins = 4;
    const auto logits = random_values(rng, 4 * 30, -3, 3);
    auto logits2 = logits;
    for (std::size_t i = 0; i < 30; ++i)
      if (!m[i])
        for (std::size_t d = 0; d < 4; ++d) logits2[d * 30 + i] = rng.uniform(-9, 9);
    CHECK(dorn_loss(tape, ad::Tensor::from({4, 5, 6}, logits), DepthMap::from_values(6, 5, gt), m, cfg).item() ==
          dorn_loss(tape, ad::Tensor::from({4, 5, 6}, logits2), DepthMap::from_values(6, 5, gt2), m, cfg).item());
  }
}

TEST_CASE("DORN soft decoding") {
  ad::Tape tape;
  LossConfig cfg;
  cfg.dorn_bins = 10;
  SUBCASE("half-confident classifiers count half") {
    const ad::Tensor c = dorn_soft_count(tape, ad::Tensor::full({10, 2, 3}, 0.5), cfg);
    for (double v : c.data()) CHECK(v == 5.0);
  }
  SUBCASE("saturated classifiers count all bins") {
    const ad::Tensor c = dorn_soft_count(tape, ad::Tensor::full({10, 1, 2}, 1.0), cfg);
    for (double v : c.data()) CHECK(std::abs(v - 10.0) <= 1e-9);
  }
  SUBCASE("count to depth is monotone and spans the range") {
    CHECK(dorn_count_to_depth(0, cfg) == doctest::Approx(0.1));
    CHECK(dorn_count_to_depth(10, cfg) == doctest::Approx(10.0));
    double prev = 0;
    for (int k = 0; k <= 100; ++k) {
      const double d = dorn_count_to_depth(k / 10.0, cfg);
      CHECK(d > prev);
      prev = d;
    }
    const ad::Tensor d = dorn_soft_decode(tape, ad::Tensor::full({10, 1, 1}, 0.5), cfg);
    CHECK(d.item() == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("labels round in log depth and clamp") {
    CHECK(dorn_label(0.01, cfg) == 0);
    CHECK(dorn_label(100.0, cfg) == 10);
    for (int k = 0; k <= 10; ++k) CHECK(dorn_label(dorn_count_to_depth(k, cfg), cfg) == k);
  }
}

TEST_CASE("DORN ordinal loss") {
  ad::Tape tape;
  LossConfig cfg;
  cfg.dorn_bins = 8;
  const DepthMap gt = DepthMap::from_values(2, 1, {0.5, 3.0});
  const Mask all(2, 1);
  SUBCASE("uniform zero logits cost D log 2 per pixel") {
    CHECK(dorn_loss(tape, ad::Tensor::zeros({8, 1, 2}), gt, all, cfg).item() ==
          doctest::Approx(8 * std::log(2.0)).epsilon(1e-14));
  }
  SUBCASE("perfectly ordered logits cost nothing") {
    std::vector<double> x(16);
    for (std::size_t p = 0; p < 2; ++p) {
      const int k = dorn_label(gt[p], cfg);
      for (int i = 0; i < 8; ++i) x[static_cast<std::size_t>(i) * 2 + p] = i < k ? 60.0 : -60.0;
    }
    CHECK(dorn_loss(tape, ad::Tensor::from({8, 1, 2}, x), gt, all, cfg).item() < 1e-20);
  }
  SUBCASE("loss falls as the correct logits grow") {
    Rng rng(12);
    std::vector<double> x(16);
    for (double& v : x) v = rng.uniform(-2, 2);
    double prev = INFINITY;
    for (int step = 0; step < 20; ++step) {
      std::vector<double> y = x;
      for (std::size_t p = 0; p < 2; ++p) {
        const int k = dorn_label(gt[p], cfg);
        for (int i = 0; i < 8; ++i) y[static_cast<std::size_t>(i) * 2 + p] += (i < k ? 0.5 : -0.5) * step;
      }
      const double l = dorn_loss(tape, ad::Tensor::from({8, 1, 2}, y), gt, all, cfg).item();
      // Direct evaluation of the ordinal cross-entropy.
      double direct = 0;
      for (std::size_t p = 0; p < 2; ++p) {
        const int k = dorn_label(gt[p], cfg);
        for (int i = 0; i < 8; ++i) {
          const double s = 1.0 / (1.0 + std::exp(-y[static_cast<std::size_t>(i) * 2 + p]));
          direct += i < k ? -std::log(s) : -std::log(1.0 - s);
        }
      }
      CHECK(l == doctest::Approx(direct / 2).epsilon(1e-12));
      CHECK(l < prev);
      prev = l;
    }
  }
}

TEST_CASE("adversarial objective") {
  ad::Tape tape;
  const std::array<double, 6> ones{1, 1, 1, 1, 1, 1};
  CHECK(adversarial_loss(tape, ad::Tensor::scalar(0.3), ad::Tensor::zeros({1, 6}), ones).item() == -0.3);
  CHECK(adversarial_loss(tape, ad::Tensor::scalar(0.0), ad::Tensor::from({1, 6}, {0.1, 0, 0, 0, 0, 0}), ones).item() ==
        doctest::Approx(0.01).epsilon(1e-15));

  ad::Tensor l = ad::Tensor::scalar(0.7, true);
  ad::Tensor p = ad::Tensor::from({1, 6}, {0.1, -0.2, 0.05, 0.3, 0, -0.1}, true);
  const std::array<double, 6> lambda{1, 2, 3, 0.5, 1, 4};
  ad::Tape t;
  t.backward(adversarial_loss(t, l, p, lambda));
  CHECK(l.grad()[0] == -1.0);
  for (std::size_t k = 0; k < 6; ++k) CHECK(p.grad()[k] == doctest::Approx(2 * lambda[k] * p.data()[k]));
}

TEST_CASE("loss configuration parsing") {
  CHECK(parse_loss_kind("l1") == LossKind::l1);
  CHECK(parse_loss_kind("berhu") == LossKind::berhu);
  CHECK(parse_loss_kind("dorn") == LossKind::dorn);
  CHECK_THROWS_AS(parse_loss_kind("l2"), std::invalid_argument);
  LossConfig c;
  c.dorn_bins = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}
