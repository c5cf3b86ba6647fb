#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "mobility/nn/matrix.hpp"

namespace mobility::nn {

struct Var {
  int id = -1;
};

// Single-use reverse-mode tape. Parameter leaves alias the Parameter's value
// and accumulate straight into Parameter::grad, so gradients from several
// graphs (micro-batches) add up until the optimizer consumes them.
class Graph {
 public:
  Var constant(Matrix value);
  Var param(Parameter& p);

  const Matrix& value(Var v) const;
  // Lazily allocated (zero-filled) gradient buffer of a node.
  Matrix& grad(Var v);
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  // Registers a computed node. `backward` runs only when the node has
  // received gradient and some input requires it.
  Var push(Matrix value, std::initializer_list<Var> inputs, std::function<void()> backward);

  // Seeds d(loss)/d(loss) = 1 for a 1x1 node and propagates.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Parameter* param = nullptr;
    bool requires_grad = false;
    std::function<void()> backward;
  };
  std::vector<Node> nodes_;
};

// Elementwise and structural ops. Shapes are checked; mismatches throw
// std::invalid_argument.
Var matmul(Graph& g, Var a, Var b);
Var add(Graph& g, Var a, Var b);
Var add_row(Graph& g, Var a, Var row);  // row: 1 x cols, broadcast over rows
Var mul(Graph& g, Var a, Var b);
Var scale(Graph& g, Var a, double s);
Var sigmoid(Graph& g, Var a);
Var tanh(Graph& g, Var a);
Var gelu(Graph& g, Var a);  // tanh approximation
Var slice_cols(Graph& g, Var a, int first, int count);
Var concat_cols(Graph& g, Var a, Var b);
Var gather_rows(Graph& g, Var a, std::vector<int> rows);
// Interleaves `steps` (each batch x d) into (batch * steps) x d with row
// b * steps + t taken from steps[t] row b.
Var stack_steps(Graph& g, const std::vector<Var>& steps);
// Repeats each row of a (batch x d) `times` times consecutively.
Var repeat_rows(Graph& g, Var a, int times);
// Rows for negative ids are zero.
Var embedding(Graph& g, Parameter& table, std::vector<int> ids);
Var layer_norm(Graph& g, Var x, Var gamma, Var beta, double eps = 1e-5);
// Multi-head causal self-attention over `batch` sequences of length `seq`
// laid out batch-major in the rows of q, k and v.
Var causal_attention(Graph& g, Var q, Var k, Var v, int batch, int seq, int heads);

// Sum over rows with target >= 0 of -log softmax(logits)[target], divided by
// `denom`. Result is 1 x 1.
Var softmax_cross_entropy(Graph& g, Var logits, std::vector<int> targets, double denom);
// Same with a full target distribution per row (rows sum to 1).
Var softmax_cross_entropy_soft(Graph& g, Var logits, Matrix target_probs, double denom);
// Sum of squared differences / denom.
Var squared_error(Graph& g, Var a, Matrix target, double denom);
// Binary cross-entropy on logits (n x 1) against 0/1 labels, / denom.
Var bce_with_logits(Graph& g, Var logits, std::vector<double> labels, double denom);

}  // namespace mobility::nn
