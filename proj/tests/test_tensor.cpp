#include <cmath>
#include <random>

#include "doctest.h"
#include "lmpn/gradcheck.hpp"
#include "lmpn/tensor.hpp"

using namespace lmpn;

namespace {

Tensor<double> randn(std::vector<int> shape, std::mt19937_64& rng, double sigma = 1.0) {
  std::normal_distribution<double> n(0.0, sigma);
  std::vector<double> data(numel(shape));
  for (auto& v : data) v = n(rng);
  return make_tensor<double>(std::move(shape), std::move(data), true);
}

}  // namespace

TEST_CASE("conv1d forward examples") {
  // input [[1,0],[0,1],[1,1],[0,0]], w=2, one all-ones filter, bias 0
  auto input = make_tensor<double>({4, 2}, {1, 0, 0, 1, 1, 1, 0, 0});
  auto kernel = make_tensor<double>({2, 2, 1}, {1, 1, 1, 1});
  auto bias = make_tensor<double>({1}, {0});
  auto out = conv1d<double>(nullptr, input, kernel, bias);
  REQUIRE(out->shape == std::vector<int>{3, 1});
  CHECK(out->data[0] == doctest::Approx(2));
  CHECK(out->data[1] == doctest::Approx(3));
  CHECK(out->data[2] == doctest::Approx(2));

  // all-zero kernel and bias annihilate any input
  auto zk = zeros<double>({2, 2, 3});
  auto zb = zeros<double>({3});
  auto zo = conv1d<double>(nullptr, input, zk, zb);
  for (double v : zo->data) CHECK(v == 0.0);

  // L == w: one output equal to the full-window dot product
  auto in2 = make_tensor<double>({2, 2}, {1, 2, 3, 4});
  auto k2 = make_tensor<double>({2, 2, 1}, {1, 1, 1, 1});
  auto o2 = conv1d<double>(nullptr, in2, k2, bias);
  REQUIRE(o2->shape == std::vector<int>{1, 1});
  CHECK(o2->data[0] == doctest::Approx(10));
}

TEST_CASE("conv1d rejects sequences shorter than the window") {
  auto input = make_tensor<double>({2, 2}, {1, 2, 3, 4});
  auto kernel = zeros<double>({3, 2, 1});
  auto bias = zeros<double>({1});
  CHECK_THROWS_WITH_AS(conv1d<double>(nullptr, input, kernel, bias),
                       "sequence shorter than window", std::invalid_argument);
}

TEST_CASE("maxpool examples and tie-break") {
  auto in = make_tensor<double>({3, 1}, {2, 3, 2});
  CHECK(maxpool_over_time<double>(nullptr, in)->data[0] == 3);

  auto single = make_tensor<double>({1, 3}, {5, -1, 0});
  auto out = maxpool_over_time<double>(nullptr, single);
  CHECK(out->data == std::vector<double>{5, -1, 0});

  // tie routes gradient to index 0 only
  auto tie = make_tensor<double>({2, 1}, {1, 1}, true);
  Tape<double> tape;
  auto pooled = maxpool_over_time(&tape, tie);
  CHECK(pooled->data[0] == 1);
  tape.backward(pooled);
  CHECK(tie->grad[0] == 1.0);
  CHECK(tie->grad[1] == 0.0);
}

TEST_CASE("relu basics and idempotence") {
  auto x = make_tensor<double>({2}, {-1, 2});
  auto y = relu<double>(nullptr, x);
  CHECK(y->data == std::vector<double>{0, 2});

  auto neg = make_tensor<double>({3}, {-1, -2, -3});
  auto clipped = relu<double>(nullptr, neg);
  for (double v : clipped->data) CHECK(v == 0.0);

  auto twice = relu<double>(nullptr, relu<double>(nullptr, x));
  CHECK(twice->data == y->data);
}

TEST_CASE("linear examples") {
  auto x = make_tensor<double>({2}, {3, 7});
  auto eye = make_tensor<double>({2, 2}, {1, 0, 0, 1});
  auto zb = zeros<double>({2});
  CHECK(linear<double>(nullptr, x, eye, zb)->data == x->data);

  auto zw = zeros<double>({2, 2});
  auto b = make_tensor<double>({2}, {4, 5});
  CHECK(linear<double>(nullptr, x, zw, b)->data == b->data);

  auto x2 = make_tensor<double>({2}, {1, 2});
  auto w = make_tensor<double>({2, 1}, {3, 4});
  auto zb1 = zeros<double>({1});
  CHECK(linear<double>(nullptr, x2, w, zb1)->data[0] == doctest::Approx(11));

  CHECK_THROWS_AS(linear<double>(nullptr, make_tensor<double>({3}, {1, 2, 3}), w, zb1),
                  std::invalid_argument);
}

TEST_CASE("concat examples") {
  auto a = make_tensor<double>({1}, {1});
  auto b = make_tensor<double>({2}, {2, 3});
  CHECK(concat<double>(nullptr, {a, b})->data == std::vector<double>{1, 2, 3});
  CHECK(concat<double>(nullptr, {b})->data == b->data);

  std::vector<Tensor<double>> five;
  int total = 0;
  for (int i = 1; i <= 5; ++i) {
    five.push_back(zeros<double>({i}));
    total += i;
  }
  CHECK(concat<double>(nullptr, five)->shape[0] == total);
}

TEST_CASE("squared euclidean examples") {
  auto a = make_tensor<double>({2}, {0, 0});
  auto b = make_tensor<double>({2}, {3, 4});
  CHECK(squared_euclidean<double>(nullptr, a, b)->data[0] == doctest::Approx(25));
  CHECK(squared_euclidean<double>(nullptr, b, b)->data[0] == 0.0);
  CHECK(squared_euclidean<double>(nullptr, a, b)->data[0] ==
        squared_euclidean<double>(nullptr, b, a)->data[0]);
  CHECK_THROWS_AS(squared_euclidean<double>(nullptr, a, make_tensor<double>({3}, {1, 2, 3})),
                  std::invalid_argument);
}

TEST_CASE("log_softmax_xent examples") {
  auto uniform = make_tensor<double>({2}, {0, 0});
  CHECK(log_softmax_xent<double>(nullptr, uniform, 0)->data[0] ==
        doctest::Approx(std::log(2.0)));

  auto extreme = make_tensor<double>({2}, {1000, -1000});
  const double l = log_softmax_xent<double>(nullptr, extreme, 0)->data[0];
  CHECK(std::isfinite(l));
  CHECK(l == doctest::Approx(0.0));

  std::mt19937_64 rng(1);
  auto logits = randn({6}, rng);
  const double base = log_softmax_xent<double>(nullptr, logits, 3)->data[0];
  auto shifted = add_const<double>(nullptr, logits, -11.25);
  CHECK(log_softmax_xent<double>(nullptr, shifted, 3)->data[0] ==
        doctest::Approx(base).epsilon(1e-6));

  CHECK_THROWS_AS(log_softmax_xent<double>(nullptr, uniform, 2), std::out_of_range);
  CHECK_THROWS_AS(log_softmax_xent<double>(nullptr, uniform, -1), std::out_of_range);
}

TEST_CASE("backward basics") {
  // identity loss
  auto x = scalar_tensor<double>(3.0, true);
  Tape<double> tape;
  tape.backward(x);
  CHECK(x->grad[0] == 1.0);

  // sum(relu(x)) with all-negative x has zero gradient
  auto neg = make_tensor<double>({3}, {-1, -2, -3}, true);
  Tape<double> t2;
  auto loss = sum_all(&t2, relu(&t2, neg));
  t2.backward(loss);
  for (double g : neg->grad) CHECK(g == 0.0);

  // non-scalar loss rejected
  Tape<double> t3;
  CHECK_THROWS_AS(t3.backward(make_tensor<double>({2}, {1, 2}, true)),
                  std::invalid_argument);
}

TEST_CASE("backward accumulates across repeated calls") {
  auto x = make_tensor<double>({2}, {1.5, -0.5}, true);
  Tape<double> tape;
  auto loss = squared_euclidean(&tape, x, zeros<double>({2}));
  tape.backward(loss);
  const auto once = x->grad;
  tape.backward(loss);
  for (std::size_t i = 0; i < once.size(); ++i) {
    CHECK(x->grad[i] == doctest::Approx(2.0 * once[i]));
  }
}

TEST_CASE("composite graph matches finite differences") {
  std::mt19937_64 rng(7);
  auto input = randn({6, 3}, rng);
  auto kernel = randn({2, 3, 4}, rng);
  auto bias = randn({4}, rng);
  auto w = randn({4, 3}, rng);
  auto b = randn({3}, rng);
  const double err = finite_diff_check(
      [&](Tape<double>& t) {
        auto conv = conv1d(&t, input, kernel, bias);
        auto pooled = maxpool_over_time(&t, relu(&t, conv));
        auto logits = linear(&t, pooled, w, b);
        return log_softmax_xent(&t, logits, 1);
      },
      {input, kernel, bias, w, b});
  CHECK(err < 1e-3);
}

TEST_CASE("quadratic gradcheck is tight") {
  std::mt19937_64 rng(11);
  auto x = randn({8}, rng);
  auto target = randn({8}, rng);
  target->requires_grad = false;
  target->grad.clear();
  const double err = finite_diff_check(
      [&](Tape<double>& t) { return squared_euclidean(&t, x, target); }, {x});
  CHECK(err < 1e-6);
}

TEST_CASE("determinism of forward ops") {
  std::mt19937_64 rng(3);
  auto input = randn({5, 4}, rng);
  auto kernel = randn({3, 4, 2}, rng);
  auto bias = randn({2}, rng);
  auto a = conv1d<double>(nullptr, input, kernel, bias);
  auto b = conv1d<double>(nullptr, input, kernel, bias);
  CHECK(a->data == b->data);
}

TEST_CASE("optimizer sgd examples") {
  auto p = scalar_tensor<float>(0.0f, true);
  p->grad[0] = 1.0f;
  Optimizer<float> opt(OptKind::sgd, 1.0f, 0.0f);
  opt.step({p});
  CHECK(p->data[0] == -1.0f);
  CHECK(p->grad[0] == 0.0f);  // gradients cleared

  // zero gradient, zero weight decay: unchanged
  auto q = scalar_tensor<float>(2.5f, true);
  opt.step({q});
  CHECK(q->data[0] == 2.5f);

  auto no_grad = scalar_tensor<float>(1.0f, false);
  CHECK_THROWS_AS(opt.step({no_grad}), std::runtime_error);
}

TEST_CASE("adam first step magnitude is about lr regardless of gradient size") {
  for (float g : {0.001f, 1.0f, 250.0f}) {
    auto p = scalar_tensor<float>(0.0f, true);
    p->grad[0] = g;
    Optimizer<float> opt(OptKind::adam, 0.01f, 0.0f);
    opt.step({p});
    // first-step update: lr * g / (|g| + eps) ~= lr
    CHECK(std::fabs(p->data[0]) == doctest::Approx(0.01).epsilon(1e-2));
  }
}

TEST_CASE("finite_diff_check flags a wrong gradient") {
  // piecewise-linear fn probed away from kinks
  auto x = make_tensor<double>({3}, {0.5, 1.5, -2.0}, true);
  const double ok = finite_diff_check(
      [&](Tape<double>& t) { return sum_all(&t, relu(&t, x)); }, {x});
  CHECK(ok < 1e-4);
}
