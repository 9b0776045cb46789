#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "avcl/autodiff.hpp"
#include "avcl/gradcheck.hpp"
#include "avcl/random.hpp"
#include "oracles.hpp"

using namespace avcl;
using namespace avcl::ad;

TEST_CASE("elementwise values") {
  Tape tape;
  CHECK(sigmoid(tape, Tensor::scalar(0.0)).item() == 0.5);
  CHECK(softplus(tape, Tensor::scalar(0.0)).item() == doctest::Approx(std::log(2.0)));
  CHECK(softplus(tape, Tensor::scalar(800.0)).item() == 800.0);
  CHECK(sigmoid(tape, Tensor::scalar(-800.0)).item() == 0.0);
  CHECK(relu(tape, Tensor::from({3}, {-1, 0, 2})).data()[2] == 2.0);
  CHECK(tape.empty());
}

TEST_CASE("matmul by the identity") {
  Tape tape;
  const Tensor I = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const Tensor A = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6});
  const Tensor r = matmul(tape, I, A);
  CHECK(r.shape() == Shape{3, 2});
  for (std::size_t i = 0; i < 6; ++i) CHECK(r.data()[i] == A.data()[i]);
  CHECK_THROWS_AS(matmul(tape, A, A), std::invalid_argument);
}

TEST_CASE("conv2d matches a nested-loop convolution") {
  Rng rng(17);
  for (std::size_t k : {1u, 3u}) {
    const std::size_t C = 2, O = 3, H = 5, W = 5;
    std::vector<double> x(C * H * W), w(O * C * k * k), b(O);
    for (double& v : x) v = rng.uniform(-1, 1);
    for (double& v : w) v = rng.uniform(-1, 1);
    for (double& v : b) v = rng.uniform(-1, 1);
    Tape tape;
    const Tensor r = conv2d(tape, Tensor::from({C, H, W}, x), Tensor::from({O, C, k, k}, w), Tensor::from({O}, b));
    const auto ref = oracle::conv2d(x, C, H, W, w, O, k, b);
    REQUIRE(r.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(r.data()[i] - ref[i]) < 1e-14);
  }
}

TEST_CASE("pooling and reductions") {
  Tape tape;
  const Tensor x = Tensor::from({1, 2, 4}, {1, 2, 3, 4, 5, 6, 7, 8});
  const Tensor p = avg_pool2(tape, x);
  CHECK(p.shape() == Shape{1, 1, 2});
  CHECK(p.data()[0] == 3.5);
  CHECK(p.data()[1] == 5.5);
  CHECK(channel_mean(tape, x).data()[0] == 4.5);
  CHECK(sum(tape, x).item() == 36);
  CHECK(mean(tape, x).item() == 4.5);
  CHECK_THROWS_AS(reshape(tape, x, {3, 3}), std::invalid_argument);
}

TEST_CASE("gradient of a sum is all ones") {
  Tensor x = Tensor::from({3}, {0.5, -1, 2}, true);
  Tape tape;
  tape.backward(sum(tape, x));
  for (double g : x.grad()) CHECK(g == 1.0);
  CHECK(tape.empty());
}

TEST_CASE("mean absolute difference gradient") {
  Tensor x = Tensor::from({4}, {1, 2, 3, 4}, true);
  const Tensor y = Tensor::from({4}, {2, 1, 5, 0});
  Tape tape;
  tape.backward(mean(tape, abs(tape, sub(tape, x, y))));
  const double expected[4] = {-0.25, 0.25, -0.25, 0.25};
  for (std::size_t i = 0; i < 4; ++i) CHECK(x.grad()[i] == expected[i]);
}

TEST_CASE("gradient reversal") {
  Tensor x = Tensor::from({3}, {1, 2, 3}, true);
  Tape tape;
  const Tensor r = gradient_reversal(tape, x);
  for (std::size_t i = 0; i < 3; ++i) CHECK(r.data()[i] == x.data()[i]);
  tape.backward(gradient_reversal(tape, sum(tape, x)));
  for (double g : x.grad()) CHECK(g == -1.0);
}

TEST_CASE("gradients accumulate over shared inputs") {
  Tensor x = Tensor::from({2}, {3, -2}, true);
  Tape tape;
  tape.backward(sum(tape, mul(tape, x, x)));
  CHECK(x.grad()[0] == 6.0);
  CHECK(x.grad()[1] == -4.0);
}

TEST_CASE("tape errors") {
  Tape tape;
  CHECK_THROWS_AS(tape.backward(Tensor::scalar(1.0)), std::logic_error);
  Tensor x = Tensor::from({2}, {1, 2}, true);
  const Tensor y = mul_scalar(tape, x, 2.0);
  CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), std::invalid_argument);
}

TEST_CASE("detach and clone do not alias") {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  const Tensor d = x.detach();
  const Tensor c = x.clone();
  CHECK_FALSE(d.requires_grad());
  CHECK(c.requires_grad());
  x.data()[0] = 5;
  CHECK(d.data()[0] == 1);
  CHECK(c.data()[0] == 1);
  CHECK(d.id() != x.id());
}

TEST_CASE("sgd") {
  SUBCASE("single update") {
    Tensor p = Tensor::scalar(1.0, true);
    p.grad()[0] = 2.0;
    std::vector<Tensor> ps{p};
    sgd_step(ps, 0.1);
    CHECK(p.item() == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(p.grad()[0] == 0.0);
  }
  SUBCASE("zero gradient leaves parameters unchanged") {
    Tensor p = Tensor::from({2}, {0.3, -0.7}, true);
    p.zero_grad();
    std::vector<Tensor> ps{p};
    sgd_step(ps, 0.5);
    CHECK(p.data()[0] == 0.3);
    CHECK(p.data()[1] == -0.7);
  }
  SUBCASE("two steps on a linear loss equal one doubled step") {
    Tensor a = Tensor::from({2}, {0.25, 1.5}, true), b = a.clone();
    const Tensor c = Tensor::from({2}, {0.5, -2.0});
    for (int s = 0; s < 2; ++s) {
      Tape tape;
      tape.backward(sum(tape, mul(tape, a, c)));
      std::vector<Tensor> ps{a};
      sgd_step(ps, 0.125);
    }
    Tape tape;
    tape.backward(sum(tape, mul(tape, b, c)));
    std::vector<Tensor> ps{b};
    sgd_step(ps, 0.25);
    CHECK(a.data()[0] == b.data()[0]);
    CHECK(a.data()[1] == b.data()[1]);
  }
  SUBCASE("missing gradient is an error") {
    std::vector<Tensor> ps{Tensor::scalar(1.0, true)};
    CHECK_THROWS_AS(sgd_step(ps, 0.1), std::logic_error);
  }
  SUBCASE("momentum accumulates velocity") {
    Tensor p = Tensor::scalar(0.0, true);
    Sgd opt({p}, 1.0, 0.5);
    p.grad()[0] = 1.0;
    opt.step();
    CHECK(p.item() == -1.0);
    p.grad()[0] = 1.0;
    opt.step();
    CHECK(p.item() == -2.5);
  }
}

TEST_CASE("finite-difference suite passes on a few seeds") {
  GradCheckOptions opt;
  opt.seeds = 3;
  for (const auto& r : run_gradcheck_suite(opt)) {
    INFO(r.name << " " << r.rel_error);
    CHECK(r.passed);
  }
}
