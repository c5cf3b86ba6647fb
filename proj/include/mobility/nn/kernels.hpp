#pragma once

#include "mobility/nn/matrix.hpp"

// Dense kernels used by the training engine. The unqualified versions are
// OpenMP-parallel over output rows, so every output element is reduced by a
// single thread in a fixed order and results do not depend on thread count.
// The `reference` namespace holds straightforward serial versions that the
// tests and benchmarks compare against.
namespace mobility::nn::kernels {

// c += a * b        a: n x k, b: k x m, c: n x m
void matmul_acc(const Matrix& a, const Matrix& b, Matrix& c);
// c += a^T * b      a: n x k, b: n x m, c: k x m
void matmul_tn_acc(const Matrix& a, const Matrix& b, Matrix& c);
// c += a * b^T      a: n x m, b: k x m, c: n x k
void matmul_nt_acc(const Matrix& a, const Matrix& b, Matrix& c);
// In-place row-wise softmax.
void softmax_rows(Matrix& m);
// Adam update with bias correction; `step` is 1-based.
void adam_update(Matrix& value, const Matrix& grad, Matrix& m, Matrix& v, double lr, double beta1, double beta2,
                 double eps, long step);

namespace reference {
void matmul_acc(const Matrix& a, const Matrix& b, Matrix& c);
void matmul_tn_acc(const Matrix& a, const Matrix& b, Matrix& c);
void matmul_nt_acc(const Matrix& a, const Matrix& b, Matrix& c);
void softmax_rows(Matrix& m);
void adam_update(Matrix& value, const Matrix& grad, Matrix& m, Matrix& v, double lr, double beta1, double beta2,
                 double eps, long step);
}  // namespace reference

}  // namespace mobility::nn::kernels
