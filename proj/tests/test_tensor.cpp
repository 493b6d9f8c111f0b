#include <cmath>
#include <vector>

#include "doctest.h"
#include "mpcc/grad_check.hpp"
#include "mpcc/rng.hpp"
#include "mpcc/tensor.hpp"

using namespace mpcc;

TEST_CASE("forward op values") {
  Tape t;
  CHECK(t.tanh(Tensor::scalar(0.0)).value() == 0.0);

  // max-shift keeps log-sum-exp finite for large inputs
  Tensor big = Tensor::from({2}, {1000.0, 1000.0});
  CHECK(t.logsumexp(big).value() == doctest::Approx(1000.0 + std::log(2.0)));

  Tensor a = Tensor::full({2, 3}, 1.0);
  Tensor b = Tensor::full({3, 1}, 1.0);
  Tensor c = t.matmul(a, b);
  REQUIRE(c.shape() == Shape{2, 1});
  CHECK(c.values()[0] == 3.0);
  CHECK(c.values()[1] == 3.0);

  CHECK(t.softplus(Tensor::scalar(0.0)).value() == doctest::Approx(std::log(2.0)));
  CHECK(t.softplus(Tensor::scalar(-800.0)).value() == 0.0);
  CHECK(t.softplus(Tensor::scalar(800.0)).value() == 800.0);
  CHECK(t.leaky_relu(Tensor::scalar(-2.0)).value() == doctest::Approx(-0.4));
  CHECK(t.relu(Tensor::scalar(-2.0)).value() == 0.0);
  CHECK(t.square(Tensor::scalar(-3.0)).value() == 9.0);
}

TEST_CASE("broadcasting add and mul") {
  Tape t;
  Tensor m = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor row = Tensor::from({3}, {10, 20, 30});
  Tensor s = t.add(m, row);
  CHECK(s.values() == std::vector<double>{11, 22, 33, 14, 25, 36});

  Tensor col = Tensor::from({2, 1}, {100, 200});
  Tensor s2 = t.add(m, col);
  CHECK(s2.values() == std::vector<double>{101, 102, 103, 204, 205, 206});

  Tensor sc = t.mul(m, Tensor::scalar(2.0));
  CHECK(sc.values() == std::vector<double>{2, 4, 6, 8, 10, 12});

  CHECK_THROWS_WITH_AS(t.add(m, Tensor::from({2}, {1, 2})),
                       doctest::Contains("add"), std::invalid_argument);
}

TEST_CASE("broadcast gradients reduce over the broadcast axes") {
  Tape t;
  Tensor m = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  Tensor row = Tensor::from({3}, {10, 20, 30}, true);
  Tensor loss = t.sum(t.mul(m, row));
  t.backward(loss);
  CHECK(*row.grad() == std::vector<double>{1 + 4, 2 + 5, 3 + 6});
  CHECK(*m.grad() == std::vector<double>{10, 20, 30, 10, 20, 30});
}

TEST_CASE("shape errors name op and shapes") {
  Tape t;
  Tensor a = Tensor::full({2, 3}, 1.0);
  Tensor b = Tensor::full({4, 1}, 1.0);
  CHECK_THROWS_WITH_AS(t.matmul(a, b), doctest::Contains("2x3"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(t.matmul(a, b), doctest::Contains("4x1"),
                       std::invalid_argument);
  CHECK_THROWS_AS(t.log(Tensor::scalar(0.0)), std::invalid_argument);
  CHECK_THROWS_AS(t.log(Tensor::scalar(-1.0)), std::invalid_argument);
  CHECK_THROWS_AS(Tensor::zeros({0}), std::invalid_argument);
  CHECK_THROWS_AS(t.backward(Tensor::full({2}, 1.0, true)),
                  std::invalid_argument);
}

TEST_CASE("backward: sum of squares") {
  Tape t;
  Tensor x = Tensor::from({3}, {1, 2, 3}, true);
  Tensor loss = t.sum(t.square(x));
  t.backward(loss);
  REQUIRE(x.grad() != nullptr);
  CHECK(*x.grad() == std::vector<double>{2, 4, 6});
}

TEST_CASE("backward: constant root leaves grads empty") {
  Tape t;
  Tensor x = Tensor::from({3}, {1, 2, 3}, true);
  Tensor c = Tensor::scalar(5.0);
  t.backward(c);
  CHECK(x.grad() == nullptr);
}

TEST_CASE("fan-out accumulates additively") {
  // y = sum(x*x) + sum(3*x) => dy/dx = 2x + 3
  Tape t;
  Tensor x = Tensor::from({2}, {1.5, -2.0}, true);
  Tensor y = t.add(t.sum(t.mul(x, x)), t.sum(t.mul(x, Tensor::scalar(3.0))));
  t.backward(y);
  CHECK((*x.grad())[0] == doctest::Approx(2 * 1.5 + 3));
  CHECK((*x.grad())[1] == doctest::Approx(2 * -2.0 + 3));
}

TEST_CASE("matmul transpose flags match explicit transposition") {
  Rng rng(7);
  auto rand_mat = [&](long r, long c) {
    Tensor t = Tensor::zeros({r, c});
    for (auto& v : t.values()) v = rng.normal();
    return t;
  };
  Tensor a = rand_mat(3, 4), b = rand_mat(3, 5);
  Tape t;
  Tensor atb = t.matmul(a, b, true, false);  // (4x3)(3x5)
  REQUIRE(atb.shape() == Shape{4, 5});
  for (long i = 0; i < 4; ++i)
    for (long j = 0; j < 5; ++j) {
      double ref = 0;
      for (long k = 0; k < 3; ++k) ref += a.values()[k * 4 + i] * b.values()[k * 5 + j];
      CHECK(atb.values()[i * 5 + j] == doctest::Approx(ref));
    }
  Tensor c = rand_mat(5, 4);
  Tensor abt = t.matmul(c, a, false, true);  // (5x4)(4x3)
  REQUIRE(abt.shape() == Shape{5, 3});
  for (long i = 0; i < 5; ++i)
    for (long j = 0; j < 3; ++j) {
      double ref = 0;
      for (long k = 0; k < 4; ++k) ref += c.values()[i * 4 + k] * a.values()[j * 4 + k];
      CHECK(abt.values()[i * 3 + j] == doctest::Approx(ref));
    }
}

TEST_CASE("matmul gradients under transpose flags match finite differences") {
  Rng rng(19);
  for (int ta = 0; ta <= 1; ++ta)
    for (int tb = 0; tb <= 1; ++tb) {
      ParameterStore store;
      Tensor a = Tensor::zeros(ta ? Shape{3, 2} : Shape{2, 3}, true);
      Tensor b = Tensor::zeros(tb ? Shape{4, 3} : Shape{3, 4}, true);
      for (auto& v : a.values()) v = rng.normal();
      for (auto& v : b.values()) v = rng.normal();
      store.add("a", a);
      store.add("b", b);
      auto f = [&, ta, tb](Tape& tape) {
        return tape.mean(
            tape.square(tape.matmul(store.get("a"), store.get("b"), ta, tb)));
      };
      auto rep = finite_difference_check(f, store, {"a", "b"}, 1e-5, 1e-6);
      CAPTURE(ta);
      CAPTURE(tb);
      CHECK(rep.pass);
    }
}

TEST_CASE("reductions, concat, slice, reshape") {
  Tape t;
  Tensor m = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.sum(m).value() == 21.0);
  CHECK(t.mean(m).value() == 3.5);
  CHECK(t.sum_axis(m, 0).values() == std::vector<double>{5, 7, 9});
  CHECK(t.sum_axis(m, 1).values() == std::vector<double>{6, 15});
  CHECK(t.mean_axis(m, 1).values() == std::vector<double>{2, 5});
  CHECK(t.sum_axis(m, 1, true).shape() == Shape{2, 1});

  Tensor n = Tensor::from({2, 2}, {7, 8, 9, 10});
  Tensor cat = t.concat(m, n);
  REQUIRE(cat.shape() == Shape{2, 5});
  CHECK(cat.values() == std::vector<double>{1, 2, 3, 7, 8, 4, 5, 6, 9, 10});
  Tensor sl = t.slice(cat, 3, 5);
  CHECK(sl.values() == n.values());

  Tensor r = t.reshape(m, {3, 2});
  CHECK(r.values() == m.values());
  CHECK_THROWS_AS(t.reshape(m, {4, 2}), std::invalid_argument);
}

TEST_CASE("gradients flow through structural ops") {
  Tape t;
  Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4}, true);
  Tensor b = Tensor::from({2, 1}, {5, 6}, true);
  Tensor cat = t.concat(a, b);
  Tensor loss = t.sum(t.mul(t.slice(cat, 1, 3), Tensor::scalar(2.0)));
  t.backward(loss);
  CHECK(*a.grad() == std::vector<double>{0, 2, 0, 2});
  CHECK(*b.grad() == std::vector<double>{2, 2});
}

TEST_CASE("logsumexp gradient is the softmax") {
  Tape t;
  Tensor x = Tensor::from({1, 3}, {1.0, 2.0, 3.0}, true);
  Tensor l = t.sum(t.logsumexp(x));
  t.backward(l);
  double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  for (int j = 0; j < 3; ++j)
    CHECK((*x.grad())[j] == doctest::Approx(std::exp(1.0 + j) / z));
}

TEST_CASE("gradient matches finite differences on mean(tanh(Wx))") {
  Rng rng(42);
  ParameterStore store;
  Tensor w = Tensor::zeros({3, 3}, true);
  for (auto& v : w.values()) v = rng.normal();
  store.add("w", w);
  Tensor x = Tensor::zeros({4, 3});
  for (auto& v : x.values()) v = rng.normal();

  auto f = [&](Tape& tape) {
    return tape.mean(tape.tanh(tape.matmul(x, store.get("w"))));
  };
  auto rep = finite_difference_check(f, store, {"w"}, 1e-5, 1e-5);
  CHECK(rep.pass);
  CHECK(rep.worst < 1e-5);
}

TEST_CASE("finite_difference_check on a constant reports zero error") {
  ParameterStore store;
  store.add("p", Tensor::from({2}, {1.0, 2.0}, true));
  auto f = [](Tape&) { return Tensor::scalar(3.0); };
  auto rep = finite_difference_check(f, store, {"p"}, 1e-5, 1e-10);
  CHECK(rep.pass);
  CHECK(rep.worst == 0.0);
}

TEST_CASE("finite_difference_check reports non-finite objectives per parameter") {
  ParameterStore store;
  store.add("p", Tensor::from({1}, {0.00071}, true));
  // exp(p * 1e6) overflows at p + h but not at p - h
  auto f = [&](Tape& tape) {
    return tape.exp(tape.mul(store.get("p"), Tensor::scalar(1e6)));
  };
  auto rep = finite_difference_check(f, store, {"p"}, 1e-5, 1e-4);
  REQUIRE(rep.per_param.size() == 1);
  CHECK(rep.per_param[0].name == "p");
  CHECK_FALSE(rep.per_param[0].finite);
  CHECK_FALSE(rep.pass);
}

TEST_CASE("tape records only when an input needs gradients") {
  Tape t;
  Tensor a = Tensor::full({2}, 1.0);        // constant
  Tensor b = Tensor::full({2}, 2.0, true);  // parameter
  t.add(a, a);
  CHECK(t.size() == 0);
  t.add(a, b);
  CHECK(t.size() == 1);
}

TEST_CASE("detach cuts the gradient path") {
  Tape t;
  Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
  Tensor y = t.detach(t.mul(x, x));
  Tensor loss = t.sum(y);
  t.backward(loss);
  CHECK(x.grad() == nullptr);
}

TEST_CASE("deterministic forward and gradients for a fixed seed") {
  auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    Tensor w = Tensor::zeros({4, 4}, true);
    for (auto& v : w.values()) v = rng.normal();
    Tensor x = Tensor::zeros({2, 4});
    for (auto& v : x.values()) v = rng.normal();
    Tape t;
    Tensor loss = t.mean(t.tanh(t.matmul(x, w)));
    t.backward(loss);
    auto g = *w.grad();
    g.push_back(loss.value());
    return g;
  };
  CHECK(run(123) == run(123));
}

TEST_CASE("hinge kink uses the zero branch") {
  Tape t;
  Tensor o = Tensor::from({1}, {1.0}, true);  // relu input is exactly 0
  Tensor loss = t.sum(t.relu(t.sub(Tensor::scalar(1.0), o)));
  t.backward(loss);
  CHECK((*o.grad())[0] == 0.0);
}
