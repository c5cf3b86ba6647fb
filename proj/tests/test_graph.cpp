#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "mobility/nn/adam.hpp"
#include "mobility/nn/graph.hpp"

using namespace mobility::nn;

namespace {

using Builder = std::function<Var(Graph&, std::vector<Var>&)>;

// Central differences on every entry of every parameter.
double max_gradient_error(std::vector<Parameter>& params, const Builder& build) {
  for (auto& p : params) p.zero_grad();
  {
    Graph g;
    std::vector<Var> leaves;
    for (auto& p : params) leaves.push_back(g.param(p));
    g.backward(build(g, leaves));
  }
  const auto eval = [&] {
    Graph g;
    std::vector<Var> leaves;
    for (auto& p : params) leaves.push_back(g.param(p));
    return g.value(build(g, leaves))(0, 0);
  };
  double worst = 0.0;
  const double h = 1e-5;
  for (auto& p : params)
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double keep = p.value.data[i];
      p.value.data[i] = keep + h;
      const double up = eval();
      p.value.data[i] = keep - h;
      const double down = eval();
      p.value.data[i] = keep;
      const double numeric = (up - down) / (2 * h);
      const double analytic = p.grad.data[i];
      worst = std::max(worst, std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6}));
    }
  return worst;
}

Parameter random_param(const char* name, int r, int c, std::mt19937_64& rng, double scale = 1.0) {
  Parameter p(name, r, c);
  init_normal(p.value, rng, scale);
  return p;
}

// Reduces any matrix node to a scalar with a fixed random projection so
// every output entry gets a distinct upstream gradient.
Var project(Graph& g, Var x, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  const auto& v = g.value(x);
  Matrix w(v.cols, 1);
  init_normal(w, rng, 1.0);
  Matrix ones(1, v.rows, 1.0);
  std::vector<double> row_w(static_cast<std::size_t>(v.rows));
  for (auto& r : row_w) r = std::normal_distribution<double>(0.0, 1.0)(rng);
  ones.data = row_w;
  return matmul(g, g.constant(ones), matmul(g, x, g.constant(w)));
}

}  // namespace

TEST_CASE("elementwise and structural ops have correct gradients") {
  std::mt19937_64 rng(5);
  std::vector<Parameter> ps;
  ps.push_back(random_param("a", 4, 3, rng));
  ps.push_back(random_param("b", 3, 5, rng));
  ps.push_back(random_param("c", 4, 5, rng));
  ps.push_back(random_param("r", 1, 5, rng));

  CHECK(max_gradient_error(ps, [](Graph& g, std::vector<Var>& v) { return project(g, matmul(g, v[0], v[1])); }) < 1e-6);
  CHECK(max_gradient_error(ps, [](Graph& g, std::vector<Var>& v) {
          auto ab = matmul(g, v[0], v[1]);
          return project(g, add_row(g, mul(g, add(g, ab, v[2]), v[2]), v[3]));
        }) < 1e-6);
  CHECK(max_gradient_error(ps, [](Graph& g, std::vector<Var>& v) {
          return project(g, scale(g, sigmoid(g, tanh(g, gelu(g, v[2]))), -1.7));
        }) < 1e-6);
  CHECK(max_gradient_error(ps, [](Graph& g, std::vector<Var>& v) {
          auto s = slice_cols(g, v[2], 1, 3);
          auto cat = concat_cols(g, s, v[0]);
          return project(g, gather_rows(g, cat, {3, 0, 0, 2, 1}));
        }) < 1e-6);
  CHECK(max_gradient_error(ps, [](Graph& g, std::vector<Var>& v) {
          auto rows = slice_cols(g, v[2], 0, 2);
          return project(g, stack_steps(g, {repeat_rows(g, v[3], 4), v[2], add(g, v[2], v[2])}));
          (void)rows;
        }) < 1e-6);
}

TEST_CASE("embedding, layer norm and attention gradients") {
  std::mt19937_64 rng(6);
  std::vector<Parameter> ps;
  ps.push_back(random_param("table", 6, 4, rng));
  ps.push_back(random_param("gamma", 1, 4, rng));
  ps.push_back(random_param("beta", 1, 4, rng));
  ps.push_back(random_param("wqkv", 4, 12, rng, 0.5));

  CHECK(max_gradient_error(ps, [&ps](Graph& g, std::vector<Var>&) {
          return project(g, embedding(g, ps[0], {2, -1, 5, 2, 0}));
        }) < 1e-6);
  CHECK(max_gradient_error(ps, [&ps](Graph& g, std::vector<Var>& v) {
          auto x = embedding(g, ps[0], {1, 3, 4, 0, 5, 2});
          return project(g, layer_norm(g, x, v[1], v[2]));
        }) < 1e-6);
  // Two sequences of length 3, two heads of width 2.
  CHECK(max_gradient_error(ps, [&ps](Graph& g, std::vector<Var>& v) {
          auto x = embedding(g, ps[0], {1, 3, 4, 0, 5, 2});
          auto qkv = matmul(g, x, v[3]);
          auto q = slice_cols(g, qkv, 0, 4), k = slice_cols(g, qkv, 4, 4), val = slice_cols(g, qkv, 8, 4);
          return project(g, causal_attention(g, q, k, val, 2, 3, 2));
        }) < 1e-6);
}

TEST_CASE("attention is causal") {
  std::mt19937_64 rng(8);
  Matrix q(4, 2), k(4, 2), v(4, 2);
  init_normal(q, rng, 1.0);
  init_normal(k, rng, 1.0);
  init_normal(v, rng, 1.0);
  Graph g1, g2;
  const auto base = g1.value(causal_attention(g1, g1.constant(q), g1.constant(k), g1.constant(v), 1, 4, 1));
  auto k2 = k, v2 = v;
  k2(3, 0) += 5.0;
  v2(3, 1) -= 5.0;
  const auto moved = g2.value(causal_attention(g2, g2.constant(q), g2.constant(k2), g2.constant(v2), 1, 4, 1));
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 2; ++c) CHECK(base(r, c) == moved(r, c));
  CHECK(base(0, 0) == v(0, 0));
}

TEST_CASE("loss ops: values and gradients") {
  std::mt19937_64 rng(7);
  std::vector<Parameter> ps;
  ps.push_back(random_param("logits", 5, 6, rng));
  ps.push_back(random_param("col", 5, 1, rng));

  CHECK(max_gradient_error(ps, [](Graph& g, std::vector<Var>& v) {
          return softmax_cross_entropy(g, v[0], {3, -1, 0, 5, 5}, 4.0);
        }) < 1e-6);
  Matrix soft(5, 6, 1.0 / 6.0);
  for (int c = 0; c < 6; ++c) soft(0, c) = c == 0 ? 0.5 : (c == 1 ? 0.0 : 0.125);
  CHECK(max_gradient_error(ps, [&](Graph& g, std::vector<Var>& v) { return softmax_cross_entropy_soft(g, v[0], soft, 5.0); }) <
        1e-6);
  Matrix target(5, 1, 0.25);
  CHECK(max_gradient_error(ps, [&](Graph& g, std::vector<Var>& v) { return squared_error(g, v[1], target, 2.0); }) < 1e-6);
  CHECK(max_gradient_error(ps, [](Graph& g, std::vector<Var>& v) {
          return bce_with_logits(g, v[1], {1, 0, 0, 1, 1}, 5.0);
        }) < 1e-6);

  Graph g;
  const auto uniform = g.value(softmax_cross_entropy(g, g.constant(Matrix(2, 8)), {1, 7}, 2.0))(0, 0);
  CHECK(uniform == doctest::Approx(std::log(8.0)));
  Matrix z(1, 1);
  const auto half = g.value(bce_with_logits(g, g.constant(z), {1.0}, 1.0))(0, 0);
  CHECK(half == doctest::Approx(std::log(2.0)));
}

TEST_CASE("shape mismatches throw") {
  Graph g;
  auto a = g.constant(Matrix(2, 3)), b = g.constant(Matrix(2, 3));
  CHECK_THROWS_AS(matmul(g, a, b), std::invalid_argument);
  CHECK_THROWS_AS(add(g, a, g.constant(Matrix(3, 2))), std::invalid_argument);
}

TEST_CASE("gradients from separate graphs accumulate until the optimizer step") {
  Parameter p("w", 1, 1);
  p.value(0, 0) = 2.0;
  for (int i = 0; i < 3; ++i) {
    Graph g;
    auto w = g.param(p);
    g.backward(mul(g, w, w));
  }
  CHECK(p.grad(0, 0) == doctest::Approx(12.0));
  Adam opt(AdamConfig{0.1});
  opt.step({&p});
  CHECK(p.grad(0, 0) == 0.0);
  CHECK(p.value(0, 0) == doctest::Approx(1.9));
  CHECK(opt.steps_taken() == 1);
}
