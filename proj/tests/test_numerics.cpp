#include <cmath>
#include <random>

#include <doctest.h>

#include "sgp/fdcheck.hpp"
#include "sgp/tape.hpp"

using namespace sgp;
using namespace sgp::num;

TEST_SUITE_BEGIN("numerics");

TEST_CASE("cosine similarity basics") {
  Tape t;
  Var a = t.input(Tensor::vec({1, 0}));
  Var b = t.input(Tensor::vec({0, 1}));
  CHECK(t.val(cosine_similarity(a, b)).item() == doctest::Approx(0.0).epsilon(1e-12));

  Var v = t.input(Tensor::vec({0.3, -1.7, 2.0}));
  CHECK(t.val(cosine_similarity(v, v)).item() == doctest::Approx(1.0).epsilon(1e-12));

  Var c = t.input(Tensor::vec({1, 1}));
  Var d = t.input(Tensor::vec({1, 0}));
  CHECK(t.val(cosine_similarity(c, d)).item() ==
        doctest::Approx(0.70710678).epsilon(1e-8));

  Var z = t.constant(Tensor::vec({0, 0}));
  CHECK_THROWS_AS(cosine_similarity(z, d), NumericError);
}

TEST_CASE("cosine scale invariance") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(-1.0, 1.0), pos(0.1, 7.0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> u(5), v(5);
    for (auto& x : u) x = dist(rng);
    for (auto& x : v) x = dist(rng);
    double a = pos(rng), b = pos(rng);
    std::vector<double> ua = u, vb = v;
    for (auto& x : ua) x *= a;
    for (auto& x : vb) x *= b;
    Tape t;
    double s1 = t.val(cosine_similarity(t.constant(Tensor::vec(u)),
                                        t.constant(Tensor::vec(v)))).item();
    double s2 = t.val(cosine_similarity(t.constant(Tensor::vec(ua)),
                                        t.constant(Tensor::vec(vb)))).item();
    CHECK(std::abs(s1 - s2) < 1e-9);
  }
}

TEST_CASE("softmax examples and stability") {
  Tape t;
  Var s = softmax(t.constant(Tensor::vec({0, 0})), 1.0);
  CHECK(t.val(s)[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(t.val(s)[1] == doctest::Approx(0.5).epsilon(1e-12));

  Var big = softmax(t.constant(Tensor::vec({1000, 0})), 1.0);
  CHECK(t.val(big)[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(t.val(big)[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(t.val(big).all_finite());

  // High-precision oracle for the frozen values.
  long double e9 = expl(0.9L), e1 = expl(0.1L);
  long double p0 = e9 / (e9 + e1);
  Var m = softmax(t.constant(Tensor::vec({0.9, 0.1})), 1.0);
  CHECK(std::abs(t.val(m)[0] - static_cast<double>(p0)) < 1e-12);
  CHECK(t.val(m)[0] == doctest::Approx(0.68997).epsilon(1e-4));
  CHECK(t.val(m)[1] == doctest::Approx(0.31003).epsilon(1e-4));

  CHECK_THROWS_AS(softmax(t.constant(Tensor::vec({1, 2})), 0.0), NumericError);
  CHECK_THROWS_AS(softmax(t.constant(Tensor::vec({1, 2})), -0.5), NumericError);
}

TEST_CASE("softmax sums to one across temperatures") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> dist(-30.0, 30.0);
  for (double tau : {0.05, 0.1, 1.0, 10.0}) {
    for (int rep = 0; rep < 25; ++rep) {
      std::vector<double> v(1 + static_cast<int>(rng() % 8));
      for (auto& x : v) x = dist(rng);
      Tape t;
      const Tensor& y = t.val(softmax(t.constant(Tensor::vec(v)), tau));
      double sum = 0.0;
      for (int64_t i = 0; i < y.size(); ++i) sum += y[i];
      CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("pool_mean examples") {
  Tape t;
  Var m = t.constant(Tensor::mat(2, 2, {1, 2, 3, 4}));
  const Tensor& p = t.val(pool_mean(m));
  CHECK(p[0] == doctest::Approx(2.0));
  CHECK(p[1] == doctest::Approx(3.0));

  Var one = t.constant(Tensor::mat(1, 3, {7, 8, 9}));
  const Tensor& q = t.val(pool_mean(one));
  CHECK(q[0] == 7.0);
  CHECK(q[2] == 9.0);

  std::vector<double> rows;
  for (int i = 0; i < 100; ++i) {
    rows.push_back(0.25);
    rows.push_back(-1.5);
  }
  const Tensor& r = t.val(pool_mean(t.constant(Tensor::mat(100, 2, rows))));
  CHECK(r[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(r[1] == doctest::Approx(-1.5).epsilon(1e-12));

  // Empty matrices are unrepresentable: the shape itself is rejected.
  CHECK_THROWS_AS(Tensor({0, 2}), ContractError);
}

TEST_CASE("backward on linear and quadratic forms") {
  ParameterStore store;
  Param& w = store.create("w", {3});
  w.value[0] = 1.5;
  w.value[1] = -2.0;
  w.value[2] = 0.25;

  {
    Tape t;
    t.backward(sum(t.param(w)));
    for (int i = 0; i < 3; ++i) CHECK(w.grad[i] == 1.0);
  }
  store.zero_grad();
  {
    Tape t;
    Var wv = t.param(w);
    t.backward(dot(wv, wv));
    for (int i = 0; i < 3; ++i)
      CHECK(w.grad[i] == doctest::Approx(2.0 * w.value[i]).epsilon(1e-12));
  }
}

TEST_CASE("backward is rejected the second time and requires a scalar") {
  ParameterStore store;
  Param& w = store.create("w", {2});
  w.value[0] = 1.0;
  Tape t;
  Var loss = sum(t.param(w));
  t.backward(loss);
  CHECK_THROWS_AS(t.backward(loss), ContractError);

  Tape t2;
  Var vec = t2.param(w);
  CHECK_THROWS_AS(t2.backward(vec), ContractError);
}

TEST_CASE("non-finite outputs are rejected") {
  Tape t;
  Var x = t.constant(Tensor::vec({1e308}));
  CHECK_THROWS_AS(scale(scale(x, 1e308), 1e308), NumericError);
}

TEST_CASE("parameters off the loss path keep zero gradients") {
  ParameterStore store;
  Param& used = store.create("used", {2});
  used.value[0] = 2.0;
  Param& dead = store.create("dead", {2});
  dead.value[0] = 3.0;
  Tape t;
  Var loss = sum(t.param(used));
  t.param(dead);  // on the tape but unreachable from the loss
  t.backward(loss);
  CHECK(dead.grad[0] == 0.0);
  CHECK(dead.grad[1] == 0.0);
  CHECK(used.grad[0] == 1.0);
}

TEST_CASE("finite differences: linear forms are exact") {
  ParameterStore store;
  Param& w = store.create("w", {4});
  for (int i = 0; i < 4; ++i) w.value[i] = 0.3 * i - 0.5;
  Tensor c = Tensor::vec({0.2, -1.0, 0.7, 2.0});
  auto f = [&](ParameterStore& s) {
    Tape t;
    Var loss = dot(t.param(s.get("w")), t.constant(c));
    t.backward(loss);
    return t.val(loss).item();
  };
  FdReport rep = finite_difference_check(f, store);
  CHECK_FALSE(rep.aborted);
  CHECK(rep.max_rel_error < 1e-8);
}

TEST_CASE("finite differences: dead coordinate reports as both-zero") {
  ParameterStore store;
  Param& w = store.create("w", {2});
  w.value[0] = 1.0;
  w.value[1] = 5.0;  // unused by the loss
  auto f = [&](ParameterStore& s) {
    Tape t;
    Var loss = mul(pick(t.param(s.get("w")), 0), pick(t.param(s.get("w")), 0));
    t.backward(loss);
    return t.val(loss).item();
  };
  FdReport rep = finite_difference_check(f, store);
  CHECK_FALSE(rep.aborted);
  CHECK(rep.both_zero >= 1);
  CHECK(rep.max_rel_error < 1e-6);
}

TEST_CASE("finite differences: non-deterministic objective aborts") {
  ParameterStore store;
  Param& w = store.create("w", {1});
  w.value[0] = 1.0;
  int calls = 0;
  auto f = [&](ParameterStore& s) {
    Tape t;
    Var loss = scale(pick(t.param(s.get("w")), 0), 1.0 + 0.001 * calls++);
    t.backward(loss);
    return t.val(loss).item();
  };
  FdReport rep = finite_difference_check(f, store);
  CHECK(rep.aborted);
  CHECK(rep.note.find("non-deterministic") != std::string::npos);
}

// Every differentiable primitive, composed into a scalar, against central
// differences on randomized inputs.
TEST_CASE("finite differences across the op set") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> dist(-0.9, 0.9);
  auto fill = [&](Param& p) {
    for (int64_t i = 0; i < p.value.size(); ++i) p.value[i] = dist(rng);
  };

  ParameterStore store;
  fill(store.create("a", {6}));
  fill(store.create("b", {6}));
  fill(store.create("m", {4, 6}));
  fill(store.create("w", {3, 2, 3}));  // triaffine (d+1, d, d+1) with d=2
  fill(store.create("u", {2}));
  fill(store.create("p", {2}));

  auto f = [&](ParameterStore& s) {
    Tape t;
    Var a = t.param(s.get("a"));
    Var b = t.param(s.get("b"));
    Var m = t.param(s.get("m"));
    Var u = t.param(s.get("u"));
    Var pt = t.param(s.get("p"));
    Var w3 = t.param(s.get("w"));

    Var mixed = add(mul(relu(a), sigmoid(b)), tanh_op(sub(a, b)));
    Var mv = matvec(m, mixed);                       // 4
    Var nm = neighbor_mean(m, {{1, 2}, {}, {0}, {3, 0, 1}});
    Var pooled = pool_mean(add(nm, m));              // 6
    Var sm = softmax(mv, 0.7);
    Var ls = log_softmax(concat(sm, row(m, 2)), 1.3);
    Var cs = cosine_similarity(a, pooled);
    Var tri = triaffine(w3, u, pt);                  // 2
    Var gathered = pool_mean(rows_gather(m, {0, 2, 2}));
    Var stacked = stack_scalars({pick(ls, 1), cs, sum(tri), dot(a, gathered)});
    Var loss = add(sum(stacked), mse(a, b));
    loss = add(loss, sum(pool_mean(add_rowwise(matmul_nt(m, m), mv))));
    loss = add(loss, sum(vecmat(mixed, stack_rows({a, b, mixed, gathered,
                                                   pooled, row(m, 1)}))));
    t.backward(loss);
    return t.val(loss).item();
  };
  FdReport rep = finite_difference_check(f, store, 1e-5, 200);
  CAPTURE(rep.worst_param);
  CAPTURE(rep.worst_index);
  CHECK_FALSE(rep.aborted);
  CHECK(rep.max_rel_error < 1e-4);
}

TEST_SUITE_END();
