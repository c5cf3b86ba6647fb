#include "mobility/nn/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mobility::nn::kernels {

namespace {
void check(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}
// Below this many multiply-adds the fork/join overhead dominates.
constexpr long kParallelThreshold = 32 * 1024;
}  // namespace

void matmul_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  check(a.cols == b.rows && c.rows == a.rows && c.cols == b.cols, "matmul_acc: shape mismatch");
  const int n = a.rows, k = a.cols, m = b.cols;
  const bool par = static_cast<long>(n) * k * m > kParallelThreshold;
#pragma omp parallel for schedule(static) if (par)
  for (int i = 0; i < n; ++i) {
    double* ci = c.row(i);
    const double* ai = a.row(i);
    for (int p = 0; p < k; ++p) {
      const double aip = ai[p];
      if (aip == 0.0) continue;
      const double* bp = b.row(p);
      for (int j = 0; j < m; ++j) ci[j] += aip * bp[j];
    }
  }
}

void matmul_tn_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  check(a.rows == b.rows && c.rows == a.cols && c.cols == b.cols, "matmul_tn_acc: shape mismatch");
  const int n = a.rows, k = a.cols, m = b.cols;
  const bool par = static_cast<long>(n) * k * m > kParallelThreshold;
#pragma omp parallel for schedule(static) if (par)
  for (int p = 0; p < k; ++p) {
    double* cp = c.row(p);
    for (int i = 0; i < n; ++i) {
      const double aip = a(i, p);
      if (aip == 0.0) continue;
      const double* bi = b.row(i);
      for (int j = 0; j < m; ++j) cp[j] += aip * bi[j];
    }
  }
}

void matmul_nt_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  check(a.cols == b.cols && c.rows == a.rows && c.cols == b.rows, "matmul_nt_acc: shape mismatch");
  const int n = a.rows, m = a.cols, k = b.rows;
  const bool par = static_cast<long>(n) * k * m > kParallelThreshold;
#pragma omp parallel for schedule(static) if (par)
  for (int i = 0; i < n; ++i) {
    const double* ai = a.row(i);
    double* ci = c.row(i);
    for (int p = 0; p < k; ++p) {
      const double* bp = b.row(p);
      double s = 0.0;
      for (int j = 0; j < m; ++j) s += ai[j] * bp[j];
      ci[p] += s;
    }
  }
}

void softmax_rows(Matrix& x) {
  const bool par = static_cast<long>(x.rows) * x.cols > kParallelThreshold;
#pragma omp parallel for schedule(static) if (par)
  for (int i = 0; i < x.rows; ++i) {
    double* r = x.row(i);
    const double mx = *std::max_element(r, r + x.cols);
    double sum = 0.0;
    for (int j = 0; j < x.cols; ++j) {
      r[j] = std::exp(r[j] - mx);
      sum += r[j];
    }
    const double inv = 1.0 / sum;
    for (int j = 0; j < x.cols; ++j) r[j] *= inv;
  }
}

void adam_update(Matrix& value, const Matrix& grad, Matrix& m, Matrix& v, double lr, double beta1, double beta2,
                 double eps, long step) {
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  const long n = static_cast<long>(value.size());
#pragma omp parallel for schedule(static) if (n > kParallelThreshold)
  for (long i = 0; i < n; ++i) {
    const double g = grad.data[i];
    m.data[i] = beta1 * m.data[i] + (1.0 - beta1) * g;
    v.data[i] = beta2 * v.data[i] + (1.0 - beta2) * g * g;
    const double mhat = m.data[i] / c1;
    const double vhat = v.data[i] / c2;
    value.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

namespace reference {

void matmul_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  check(a.cols == b.rows && c.rows == a.rows && c.cols == b.cols, "matmul_acc: shape mismatch");
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (int p = 0; p < a.cols; ++p) s += a(i, p) * b(p, j);
      c(i, j) += s;
    }
}

void matmul_tn_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  check(a.rows == b.rows && c.rows == a.cols && c.cols == b.cols, "matmul_tn_acc: shape mismatch");
  for (int p = 0; p < a.cols; ++p)
    for (int j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (int i = 0; i < a.rows; ++i) s += a(i, p) * b(i, j);
      c(p, j) += s;
    }
}

void matmul_nt_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  check(a.cols == b.cols && c.rows == a.rows && c.cols == b.rows, "matmul_nt_acc: shape mismatch");
  for (int i = 0; i < a.rows; ++i)
    for (int p = 0; p < b.rows; ++p) {
      double s = 0.0;
      for (int j = 0; j < a.cols; ++j) s += a(i, j) * b(p, j);
      c(i, p) += s;
    }
}

void softmax_rows(Matrix& x) {
  for (int i = 0; i < x.rows; ++i) {
    double mx = x(i, 0);
    for (int j = 1; j < x.cols; ++j) mx = std::max(mx, x(i, j));
    double sum = 0.0;
    for (int j = 0; j < x.cols; ++j) sum += std::exp(x(i, j) - mx);
    for (int j = 0; j < x.cols; ++j) x(i, j) = std::exp(x(i, j) - mx) / sum;
  }
}

void adam_update(Matrix& value, const Matrix& grad, Matrix& m, Matrix& v, double lr, double beta1, double beta2,
                 double eps, long step) {
  for (std::size_t i = 0; i < value.size(); ++i) {
    m.data[i] = beta1 * m.data[i] + (1.0 - beta1) * grad.data[i];
    v.data[i] = beta2 * v.data[i] + (1.0 - beta2) * grad.data[i] * grad.data[i];
    const double mhat = m.data[i] / (1.0 - std::pow(beta1, static_cast<double>(step)));
    const double vhat = v.data[i] / (1.0 - std::pow(beta2, static_cast<double>(step)));
    value.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace reference

}  // namespace mobility::nn::kernels
