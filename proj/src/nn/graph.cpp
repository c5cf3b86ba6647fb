#include "mobility/nn/graph.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mobility/nn/kernels.hpp"

namespace mobility::nn {

namespace {
void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}
}  // namespace

Var Graph::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size()) - 1};
}

Var Graph::param(Parameter& p) {
  Node n;
  n.param = &p;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size()) - 1};
}

const Matrix& Graph::value(Var v) const {
  const Node& n = nodes_[v.id];
  return n.param ? n.param->value : n.value;
}

Matrix& Graph::grad(Var v) {
  Node& n = nodes_[v.id];
  if (n.param) {
    if (n.param->grad.empty()) n.param->grad = Matrix(n.param->value.rows, n.param->value.cols);
    return n.param->grad;
  }
  if (n.grad.empty()) n.grad = Matrix(n.value.rows, n.value.cols);
  return n.grad;
}

Var Graph::push(Matrix value, std::initializer_list<Var> inputs, std::function<void()> backward) {
  Node n;
  n.value = std::move(value);
  for (Var in : inputs) n.requires_grad = n.requires_grad || nodes_[in.id].requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size()) - 1};
}

void Graph::backward(Var loss) {
  require(value(loss).rows == 1 && value(loss).cols == 1, "backward: loss must be 1x1");
  grad(loss)(0, 0) += 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.backward && !n.grad.empty()) n.backward();
  }
}

Var matmul(Graph& g, Var a, Var b) {
  const Matrix& av = g.value(a);
  const Matrix& bv = g.value(b);
  require(av.cols == bv.rows, "matmul: inner dimensions differ");
  Matrix out(av.rows, bv.cols);
  kernels::matmul_acc(av, bv, out);
  const int id = static_cast<int>(g.size());
  return g.push(std::move(out), {a, b}, [&g, a, b, id] {
    const Matrix& go = g.grad(Var{id});
    if (g.requires_grad(a)) kernels::matmul_nt_acc(go, g.value(b), g.grad(a));
    if (g.requires_grad(b)) kernels::matmul_tn_acc(g.value(a), go, g.grad(b));
  });
}

Var add(Graph& g, Var a, Var b) {
  const Matrix& av = g.value(a);
  const Matrix& bv = g.value(b);
  require(av.same_shape(bv), "add: shape mismatch");
  Matrix out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += bv.data[i];
  const int id = static_cast<int>(g.size());
  return g.push(std::move(out), {a, b}, [&g, a, b, id] {
    const Matrix& go = g.grad(Var{id});
    for (Var in : {a, b}) {
      if (!g.requires_grad(in)) continue;
      Matrix& gi = g.grad(in);
      for (std::size_t i = 0; i < go.size(); ++i) gi.data[i] += go.data[i];
    }
  });
}

Var add_row(Graph& g, Var a, Var row) {
  const Matrix& av = g.value(a);
  const Matrix& rv = g.value(row);
  require(rv.rows == 1 && rv.cols == av.cols, "add_row: row shape mismatch");
  Matrix out = av;
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j) out(i, j) += rv(0, j);
  const int id = static_cast<int>(g.size());
  return g.push(std::move(out), {a, row}, [&g, a, row, id] {
    const Matrix& go = g.grad(Var{id});
    if (g.requires_grad(a)) {
      Matrix& ga = g.grad(a);
      for (std::size_t i = 0; i < go.size(); ++i) ga.data[i] += go.data[i];
    }
    if (g.requires_grad(row)) {
      Matrix& gr = g.grad(row);
      for (int i = 0; i < go.rows; ++i)
        for (int j = 0; j < go.cols; ++j) gr(0, j) += go(i, j);
    }
  });
}

Var mul(Graph& g, Var a, Var b) {
  const Matrix& av = g.value(a);
  const Matrix& bv = g.value(b);
  require(av.same_shape(bv), "mul: shape mismatch");
  Matrix out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= bv.data[i];
  const int id = static_cast<int>(g.size());
  return g.push(std::move(out), {a, b}, [&g, a, b, id] {
    const Matrix& go = g.grad(Var{id});
    if (g.requires_grad(a)) {
      Matrix& ga = g.grad(a);
      const Matrix& bv = g.value(b);
      for (std::size_t i = 0; i < go.size(); ++i) ga.data[i] += go.data[i] * bv.data[i];
    }
    if (g.requires_grad(b)) {
      Matrix& gb = g.grad(b);
      const Matrix& av = g.value(a);
      for (std::size_t i = 0; i < go.size(); ++i) gb.data[i] += go.data[i] * av.data[i];
    }
  });
}

Var scale(Graph& g, Var a, double s) {
  Matrix out = g.value(a);
  for (auto& x : out.data) x *= s;
  const int id = static_cast<int>(g.size());
  return g.push(std::move(out), {a}, [&g, a, s, id] {
    const Matrix& go = g.grad(Var{id});
    Matrix& ga = g.grad(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga.data[i] += s * go.data[i];
  });
}

namespace {
// Elementwise op whose derivative is expressed through input x and output y.
template <typename F, typename D>
Var unary(Graph& g, Var a, F f, D dfdx) {
  Matrix out = g.value(a);
  for (auto& x : out.data) x = f(x);
  const int id = static_cast<int>(g.size());
  return g.push(std::move(out), {a}, [&g, a, id, dfdx] {
    const Matrix& go = g.grad(Var{id});
    const Matrix& x = g.value(a);
    const Matrix& y = g.value(Var{id});
    Matrix& ga = g.grad(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga.data[i] += go.data[i] * dfdx(x.data[i], y.data[i]);
  });
}
}  // namespace

Var sigmoid(Graph& g, Var a) {
  return unary(
      g, a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); }, [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Graph& g, Var a) {
  return unary(
      g, a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var gelu(Graph& g, Var a) {
  static const double c = std::sqrt(2.0 / std::numbers::pi);
  return unary(
      g, a,
      [](double x) { return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x))); },
      [](double x, double) {
        const double u = c * (x + 0.044715 * x * x * x);
        const double t = std::tanh(u);
        const double du = c * (1.0 + 3.0 * 0.044715 * x * x);
        return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
      });
}

Var slice_cols(Graph& g, Var a, int first, int count) {
  const Matrix& av = g.value(a);
  require(first >= 0 && count >= 0 && first + count <= av.cols, "slice_cols: out of range");
  Matrix out(av.rows, count);
  for (int i = 0; i < av.rows; ++i)
    for (int j = 0; j < count; ++j) out(i, j) = av(i, first + j);
  const int id = static_cast<int>(g.size());
  return g.push(std::move(out), {a}, [&g, a, first, count, id] {
    const Matrix& go = g.grad(Var{id});
    Matrix& ga = g.grad(a);
    for (int i = 0; i < go.rows; ++i)
      for (int j = 0; j < count; ++j) ga(i, first + j) += go(i, j);
  });
}

Var concat_cols(Graph& g, Var a, Var b) {
  const Matrix& av = g.value(a);
  const Matrix& bv = g.value(b);
  require(av.rows == bv.rows, "concat_cols: row mismatch");
  Matrix out(av.rows, av.cols + bv.cols);
  for (int i = 0; i < av.rows; ++i) {
    for (int j = 0; j < av.cols; ++j) out(i, j) = av(i, j);
    for (int j = 0; j < bv.cols; ++j) out(i, av.cols + j) = bv(i, j);
  }
  const int id = static_cast<int>(g.size());
  return g.push(std::move(out), {a, b}, [&g, a, b, id] {
    const Matrix& go = g.grad(Var{id});
    const int ac = g.value(a).cols;
    if (g.requires_grad(a)) {
      Matrix& ga = g.grad(a);
      for (int i = 0; i < go.rows; ++i)
        for (int j = 0; j < ac; ++j) ga(i, j) += go(i, j);
    }
    if (g.requires_grad(b)) {
      Matrix& gb = g.grad(b);
      for (int i = 0; i < go.rows; ++i)
        for (int j = 0; j < gb.cols; ++j) gb(i, j) += go(i, ac + j);
    }
  });
}

Var gather_rows(Graph& g, Var a, std::vector<int> rows) {
  const Matrix& av = g.value(a);
  Matrix out(static_cast<int>(rows.size()), av.cols);
  for (int i = 0; i < out.rows; ++i) {
    require(rows[i] >= 0 && rows[i] < av.rows, "gather_rows: index out of range");
    std::copy_n(av.row(rows[i]), av.cols, out.row(i));
  }
  const int id = static_cast<int>(g.size());
  return g.push(std::move(out), {a}, [&g, a, rows = std::move(rows), id] {
    const Matrix& go = g.grad(Var{id});
    Matrix& ga = g.grad(a);
    for (int i = 0; i < go.rows; ++i) {
      double* dst = ga.row(rows[i]);
      const double* src = go.row(i);
      for (int j = 0; j < go.cols; ++j) dst[j] += src[j];
    }
  });
}

Var stack_steps(Graph& g, const std::vector<Var>& steps) {
  require(!steps.empty(), "stack_steps: no steps");
  const int batch = g.value(steps[0]).rows;
  const int d = g.value(steps[0]).cols;
  const int t_count = static_cast<int>(steps.size());
  Matrix out(batch * t_count, d);
  for (int t = 0; t < t_count; ++t) {
    const Matrix& s = g.value(steps[t]);
    require(s.rows == batch && s.cols == d, "stack_steps: shape mismatch");
    for (int b = 0; b < batch; ++b) std::copy_n(s.row(b), d, out.row(b * t_count + t));
  }
  const int id = static_cast<int>(g.size());
  // push() takes a fixed input list; any step that requires grad stands in
  // for all of them, the closure routes gradient to each step.
  Var dep = steps[0];
  for (Var s : steps)
    if (g.requires_grad(s)) dep = s;
  return g.push(std::move(out), {dep}, [&g, steps, batch, d, t_count, id] {
    const Matrix& go = g.grad(Var{id});
    for (int t = 0; t < t_count; ++t) {
      if (!g.requires_grad(steps[t])) continue;
      Matrix& gs = g.grad(steps[t]);
      for (int b = 0; b < batch; ++b) {
        const double* src = go.row(b * t_count + t);
        double* dst = gs.row(b);
        for (int j = 0; j < d; ++j) dst[j] += src[j];
      }
    }
  });
}

Var repeat_rows(Graph& g, Var a, int times) {
  const Matrix& av = g.value(a);
  Matrix out(av.rows * times, av.cols);
  for (int b = 0; b < av.rows; ++b)
    for (int t = 0; t < times; ++t) std::copy_n(av.row(b), av.cols, out.row(b * times + t));
  const int id = static_cast<int>(g.size());
  return g.push(std::move(out), {a}, [&g, a, times, id] {
    const Matrix& go = g.grad(Var{id});
    Matrix& ga = g.grad(a);
    for (int b = 0; b < ga.rows; ++b)
      for (int t = 0; t < times; ++t) {
        const double* src = go.row(b * times + t);
        for (int j = 0; j < ga.cols; ++j) ga(b, j) += src[j];
      }
  });
}

Var embedding(Graph& g, Parameter& table, std::vector<int> ids) {
  const int d = table.value.cols;
  Matrix out(static_cast<int>(ids.size()), d);
  for (int i = 0; i < out.rows; ++i) {
    if (ids[i] < 0) continue;
    require(ids[i] < table.value.rows, "embedding: id out of range");
    std::copy_n(table.value.row(ids[i]), d, out.row(i));
  }
  const Var tv = g.param(table);
  const int id = static_cast<int>(g.size());
  return g.push(std::move(out), {tv}, [&g, tv, ids = std::move(ids), id] {
    const Matrix& go = g.grad(Var{id});
    Matrix& gt = g.grad(tv);
    for (int i = 0; i < go.rows; ++i) {
      if (ids[i] < 0) continue;
      double* dst = gt.row(ids[i]);
      const double* src = go.row(i);
      for (int j = 0; j < go.cols; ++j) dst[j] += src[j];
    }
  });
}

Var layer_norm(Graph& g, Var x, Var gamma, Var beta, double eps) {
  const Matrix& xv = g.value(x);
  const Matrix& gv = g.value(gamma);
  const Matrix& bv = g.value(beta);
  require(gv.rows == 1 && gv.cols == xv.cols && bv.same_shape(gv), "layer_norm: parameter shape");
  const int n = xv.rows, d = xv.cols;
  auto xhat = std::make_shared<Matrix>(n, d);
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n));
  Matrix out(n, d);
  for (int i = 0; i < n; ++i) {
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += xv(i, j);
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) var += (xv(i, j) - mean) * (xv(i, j) - mean);
    var /= d;
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (int j = 0; j < d; ++j) {
      const double h = (xv(i, j) - mean) * is;
      (*xhat)(i, j) = h;
      out(i, j) = h * gv(0, j) + bv(0, j);
    }
  }
  const int id = static_cast<int>(g.size());
  return g.push(std::move(out), {x, gamma, beta}, [&g, x, gamma, beta, xhat, inv_std, id] {
    const Matrix& go = g.grad(Var{id});
    const Matrix& gv = g.value(gamma);
    const int n = go.rows, d = go.cols;
    if (g.requires_grad(gamma) || g.requires_grad(beta)) {
      Matrix& gg = g.grad(gamma);
      Matrix& gb = g.grad(beta);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) {
          gg(0, j) += go(i, j) * (*xhat)(i, j);
          gb(0, j) += go(i, j);
        }
    }
    if (g.requires_grad(x)) {
      Matrix& gx = g.grad(x);
      for (int i = 0; i < n; ++i) {
        double mean_dh = 0.0, mean_dh_h = 0.0;
        for (int j = 0; j < d; ++j) {
          const double dh = go(i, j) * gv(0, j);
          mean_dh += dh;
          mean_dh_h += dh * (*xhat)(i, j);
        }
        mean_dh /= d;
        mean_dh_h /= d;
        for (int j = 0; j < d; ++j) {
          const double dh = go(i, j) * gv(0, j);
          gx(i, j) += (*inv_std)[i] * (dh - mean_dh - (*xhat)(i, j) * mean_dh_h);
        }
      }
    }
  });
}

Var causal_attention(Graph& g, Var q, Var k, Var v, int batch, int seq, int heads) {
  const Matrix& qv = g.value(q);
  const Matrix& kv = g.value(k);
  const Matrix& vv = g.value(v);
  require(qv.same_shape(kv) && qv.same_shape(vv), "causal_attention: q/k/v shape mismatch");
  require(qv.rows == batch * seq, "causal_attention: rows != batch * seq");
  require(heads > 0 && qv.cols % heads == 0, "causal_attention: width not divisible by heads");
  const int d = qv.cols, dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  // probs[(b * heads + h)] is a seq x seq lower-triangular matrix.
  auto probs = std::make_shared<std::vector<Matrix>>(static_cast<std::size_t>(batch * heads));
  Matrix out(qv.rows, d);
#pragma omp parallel for schedule(static) if (batch * heads > 1 && seq > 16)
  for (int bh = 0; bh < batch * heads; ++bh) {
    const int b = bh / heads, h = bh % heads, off = h * dh, base = b * seq;
    Matrix p(seq, seq);
    for (int i = 0; i < seq; ++i) {
      double mx = -1e300;
      for (int j = 0; j <= i; ++j) {
        double s = 0.0;
        for (int c = 0; c < dh; ++c) s += qv(base + i, off + c) * kv(base + j, off + c);
        s *= inv_sqrt;
        p(i, j) = s;
        mx = std::max(mx, s);
      }
      double sum = 0.0;
      for (int j = 0; j <= i; ++j) {
        p(i, j) = std::exp(p(i, j) - mx);
        sum += p(i, j);
      }
      for (int j = 0; j <= i; ++j) p(i, j) /= sum;
      for (int j = 0; j <= i; ++j) {
        const double w = p(i, j);
        for (int c = 0; c < dh; ++c) out(base + i, off + c) += w * vv(base + j, off + c);
      }
    }
    (*probs)[bh] = std::move(p);
  }
  const int id = static_cast<int>(g.size());
  return g.push(std::move(out), {q, k, v}, [&g, q, k, v, batch, seq, heads, dh, inv_sqrt, probs, id] {
    const Matrix& go = g.grad(Var{id});
    const Matrix& qv = g.value(q);
    const Matrix& kv = g.value(k);
    const Matrix& vv = g.value(v);
    Matrix& gq = g.grad(q);
    Matrix& gk = g.grad(k);
    Matrix& gvv = g.grad(v);
#pragma omp parallel for schedule(static) if (batch * heads > 1 && seq > 16)
    for (int bh = 0; bh < batch * heads; ++bh) {
      const int b = bh / heads, h = bh % heads, off = h * dh, base = b * seq;
      const Matrix& p = (*probs)[bh];
      std::vector<double> dp(static_cast<std::size_t>(seq));
      for (int i = 0; i < seq; ++i) {
        double dot = 0.0;
        for (int j = 0; j <= i; ++j) {
          double s = 0.0;
          for (int c = 0; c < dh; ++c) s += go(base + i, off + c) * vv(base + j, off + c);
          dp[j] = s;
          dot += s * p(i, j);
        }
        for (int j = 0; j <= i; ++j) {
          const double w = p(i, j);
          for (int c = 0; c < dh; ++c) gvv(base + j, off + c) += w * go(base + i, off + c);
          const double ds = w * (dp[j] - dot) * inv_sqrt;
          if (ds == 0.0) continue;
          for (int c = 0; c < dh; ++c) {
            gq(base + i, off + c) += ds * kv(base + j, off + c);
            gk(base + j, off + c) += ds * qv(base + i, off + c);
          }
        }
      }
    }
  });
}

Var softmax_cross_entropy(Graph& g, Var logits, std::vector<int> targets, double denom) {
  const Matrix& lv = g.value(logits);
  require(static_cast<int>(targets.size()) == lv.rows, "softmax_cross_entropy: target count");
  require(denom > 0.0, "softmax_cross_entropy: denom must be positive");
  auto probs = std::make_shared<Matrix>(lv);
  kernels::softmax_rows(*probs);
  double loss = 0.0;
  for (int i = 0; i < lv.rows; ++i) {
    if (targets[i] < 0) continue;
    require(targets[i] < lv.cols, "softmax_cross_entropy: target out of range");
    // log p = z_t - logsumexp(z); recomputed here to avoid log(0) underflow.
    const double* r = lv.row(i);
    const double mx = *std::max_element(r, r + lv.cols);
    double sum = 0.0;
    for (int j = 0; j < lv.cols; ++j) sum += std::exp(r[j] - mx);
    loss += (mx + std::log(sum)) - r[targets[i]];
  }
  Matrix out(1, 1, loss / denom);
  const int id = static_cast<int>(g.size());
  return g.push(std::move(out), {logits}, [&g, logits, targets = std::move(targets), probs, denom, id] {
    const double go = g.grad(Var{id})(0, 0) / denom;
    Matrix& gl = g.grad(logits);
    for (int i = 0; i < gl.rows; ++i) {
      if (targets[i] < 0) continue;
      double* dst = gl.row(i);
      const double* p = probs->row(i);
      for (int j = 0; j < gl.cols; ++j) dst[j] += go * p[j];
      dst[targets[i]] -= go;
    }
  });
}

Var softmax_cross_entropy_soft(Graph& g, Var logits, Matrix target_probs, double denom) {
  const Matrix& lv = g.value(logits);
  require(lv.same_shape(target_probs), "softmax_cross_entropy_soft: shape mismatch");
  auto probs = std::make_shared<Matrix>(lv);
  kernels::softmax_rows(*probs);
  double loss = 0.0;
  for (int i = 0; i < lv.rows; ++i) {
    const double* r = lv.row(i);
    const double mx = *std::max_element(r, r + lv.cols);
    double sum = 0.0;
    for (int j = 0; j < lv.cols; ++j) sum += std::exp(r[j] - mx);
    const double lse = mx + std::log(sum);
    for (int j = 0; j < lv.cols; ++j) loss -= target_probs(i, j) * (r[j] - lse);
  }
  Matrix out(1, 1, loss / denom);
  auto targets = std::make_shared<Matrix>(std::move(target_probs));
  const int id = static_cast<int>(g.size());
  return g.push(std::move(out), {logits}, [&g, logits, targets, probs, denom, id] {
    const double go = g.grad(Var{id})(0, 0) / denom;
    Matrix& gl = g.grad(logits);
    for (std::size_t i = 0; i < gl.size(); ++i) gl.data[i] += go * (probs->data[i] - targets->data[i]);
  });
}

Var squared_error(Graph& g, Var a, Matrix target, double denom) {
  const Matrix& av = g.value(a);
  require(av.same_shape(target), "squared_error: shape mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) loss += (av.data[i] - target.data[i]) * (av.data[i] - target.data[i]);
  auto t = std::make_shared<Matrix>(std::move(target));
  const int id = static_cast<int>(g.size());
  return g.push(Matrix(1, 1, loss / denom), {a}, [&g, a, t, denom, id] {
    const double go = g.grad(Var{id})(0, 0) / denom;
    const Matrix& av = g.value(a);
    Matrix& ga = g.grad(a);
    for (std::size_t i = 0; i < av.size(); ++i) ga.data[i] += go * 2.0 * (av.data[i] - t->data[i]);
  });
}

Var bce_with_logits(Graph& g, Var logits, std::vector<double> labels, double denom) {
  const Matrix& zv = g.value(logits);
  require(zv.cols == 1 && static_cast<int>(labels.size()) == zv.rows, "bce_with_logits: shape mismatch");
  double loss = 0.0;
  for (int i = 0; i < zv.rows; ++i) {
    const double z = zv(i, 0);
    // log(1 + e^z) - y z, computed stably
    loss += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - labels[i] * z;
  }
  const int id = static_cast<int>(g.size());
  return g.push(Matrix(1, 1, loss / denom), {logits}, [&g, logits, labels = std::move(labels), denom, id] {
    const double go = g.grad(Var{id})(0, 0) / denom;
    const Matrix& zv = g.value(logits);
    Matrix& gz = g.grad(logits);
    for (int i = 0; i < zv.rows; ++i) gz(i, 0) += go * (1.0 / (1.0 + std::exp(-zv(i, 0))) - labels[i]);
  });
}

}  // namespace mobility::nn
