#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <numeric>
#include <random>

#include "ecgxai/autodiff.hpp"
#include "gradcheck.hpp"
#include "helpers.hpp"

using namespace ecgxai;
using namespace ecgxai::ad;

namespace {

std::vector<double> values_of(Var v) {
  auto d = v.value().data();
  return {d.begin(), d.end()};
}

}  // namespace

TEST_CASE("conv1d worked examples") {
  Graph g;
  auto x = g.input(Tensor({1, 3}, {1, 2, 3}));
  auto k = g.parameter(Tensor({1, 1, 2}, {1, 1}));
  CHECK(values_of(conv1d(x, k, 1, Padding::none())) == std::vector<double>{3, 5});

  auto k3 = g.parameter(Tensor({1, 1, 3}, {1, 0, 0}));
  CHECK(values_of(conv1d(x, k3, 1, Padding::replication(1))) == std::vector<double>{1, 1, 2});

  auto x4 = g.input(Tensor({1, 4}, {1, 2, 3, 4}));
  auto k10 = g.parameter(Tensor({1, 1, 2}, {1, 0}));
  CHECK(values_of(conv1d(x4, k10, 2, Padding::none())) == std::vector<double>{1, 3});
}

TEST_CASE("pooling, dropout and cross-entropy examples") {
  Graph g;
  auto x = g.input(Tensor({2, 2}, {1, 3, 2, 2}));
  CHECK(values_of(global_avg_pool(x)) == std::vector<double>{2, 2});

  auto y = g.input(Tensor({2, 3}, {1, -2, 3, 4, 5, -6}));
  CHECK(values_of(dropout(y, 0.5, false, 1, 1)) == values_of(y));

  auto logits = g.input(Tensor({1, 2}, {0, 0}));
  const int label[] = {1};
  CHECK(softmax_cross_entropy(logits, label).value().item() == doctest::Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("gradient of x squared and of a disconnected leaf") {
  Graph g;
  auto x = g.input(Tensor::from({3.0}), true);
  auto unused = g.input(Tensor::from({7.0}), true);
  g.backward(sum(mul(x, x)));
  CHECK(g.grad(x)[0] == doctest::Approx(6.0));
  CHECK(g.grad(unused)[0] == 0.0);
}

TEST_CASE("backward needs a scalar") {
  Graph g;
  auto x = g.input(Tensor::from({1.0, 2.0}), true);
  CHECK(kind_of([&] { g.backward(x); }) == ErrorKind::NotScalar);
}

TEST_CASE("non-finite values are rejected") {
  Graph g;
  CHECK(kind_of([&] { g.input(Tensor::from({std::nan("")})); }) == ErrorKind::NonFinite);
}

TEST_CASE("conv shape mismatches") {
  Graph g;
  auto x = g.input(Tensor({2, 5}, 1.0));
  auto k = g.parameter(Tensor({1, 3, 2}, 1.0));
  CHECK(kind_of([&] { conv1d(x, k, 1, Padding::none()); }) == ErrorKind::ShapeMismatch);
  auto big = g.parameter(Tensor({1, 2, 9}, 1.0));
  CHECK(kind_of([&] { conv1d(x, big, 1, Padding::none()); }) == ErrorKind::ShapeMismatch);
}

TEST_CASE("Adam first step moves by the learning rate") {
  std::vector<Tensor> params{Tensor::from({1.0, -2.0})};
  std::vector<Tensor> grads{Tensor::from({0.5, -3.0})};
  AdamState state;
  AdamOptions opt;
  opt.lr = 0.1;
  adam_step(params, grads, state, opt);
  CHECK(params[0][0] == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(params[0][1] == doctest::Approx(-1.9).epsilon(1e-6));

  std::vector<Tensor> still{Tensor::from({4.0})};
  std::vector<Tensor> zero{Tensor::from({0.0})};
  AdamState fresh;
  adam_step(still, zero, fresh, opt);
  CHECK(still[0][0] == 4.0);
}

TEST_CASE("identity kernel leaves the signal unchanged") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 1);
  Tensor x({3, 20});
  for (auto& v : x.data()) v = n(rng);
  Tensor k({3, 3, 3}, 0.0);
  for (std::size_t c = 0; c < 3; ++c) k[(c * 3 + c) * 3 + 1] = 1.0;
  Graph g;
  auto out = conv1d(g.input(x), g.parameter(k), 1, Padding::replication(1));
  CHECK(out.value() == x);
}

TEST_CASE("global average pooling ignores time order") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0, 1);
  Tensor x({2, 4, 10});
  for (auto& v : x.data()) v = n(rng);
  Tensor shuffled = x;
  std::vector<std::size_t> perm(10);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  for (std::size_t r = 0; r < 8; ++r) {
    for (std::size_t t = 0; t < 10; ++t) shuffled[r * 10 + t] = x[r * 10 + perm[t]];
  }
  Graph g;
  const auto a = values_of(global_avg_pool(g.input(x)));
  const auto b = values_of(global_avg_pool(g.input(shuffled)));
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-14));
}

TEST_CASE("batch norm with unit statistics is the identity in inference") {
  Tensor x({2, 2, 5});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i) - 4.0;
  BatchNormState st{Tensor({2}, 0.0), Tensor({2}, 1.0)};
  Graph g;
  auto out = batch_norm(g.input(x), g.parameter(Tensor({2}, 1.0)), g.parameter(Tensor({2}, 0.0)), st, false, 0.1, 0.0);
  CHECK(out.value() == x);
}

TEST_CASE("batch norm training output has zero mean and unit variance per channel") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(2.0, 3.0);
  Tensor x({4, 3, 8});
  for (auto& v : x.data()) v = n(rng);
  BatchNormState st{Tensor({3}, 0.0), Tensor({3}, 1.0)};
  Graph g;
  auto out = batch_norm(g.input(x), g.parameter(Tensor({3}, 1.0)), g.parameter(Tensor({3}, 0.0)), st, true, 0.1, 0.0);
  for (std::size_t c = 0; c < 3; ++c) {
    double s = 0, s2 = 0;
    for (std::size_t b = 0; b < 4; ++b) {
      for (std::size_t t = 0; t < 8; ++t) {
        const double v = out.value()[(b * 3 + c) * 8 + t];
        s += v;
        s2 += v * v;
      }
    }
    CHECK(s / 32 == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
    CHECK(s2 / 32 == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("softmax rows sum to one") {
  Graph g;
  auto p = softmax(g.input(Tensor({2, 3}, {1, 2, 3, -50, 0, 50})));
  CHECK(p.value()[0] + p.value()[1] + p.value()[2] == doctest::Approx(1.0));
  CHECK(p.value()[3] + p.value()[4] + p.value()[5] == doctest::Approx(1.0));
}

TEST_CASE("random networks agree with central differences") {
  std::mt19937_64 rng(2024);
  int checked = 0;
  for (int net_id = 0; net_id < 4; ++net_id) {
    gradcheck::Net net;
    net.dropout_seed = static_cast<std::uint64_t>(net_id);
    for (int point = 0; point < 3; ++point) {
      gradcheck::Result r;
      do {
        r = gradcheck::check(net, gradcheck::random_leaves(net, rng));
      } while (!r.valid);
      CHECK(r.max_rel_error <= 1e-4);
      ++checked;
    }
  }
  CHECK(checked == 12);
}
