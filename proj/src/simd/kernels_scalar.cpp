#include <cmath>

#include "mad/simd/kernels.hpp"

namespace mad::simd {
namespace {

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
          const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * lda + p] * b[p * ldb + j];
      c[i * ldc + j] = accumulate ? c[i * ldc + j] + acc : acc;
    }
  }
}

void exp_kernel(const double* in, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(in[i]);
}

void silu(const double* z, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = z[i] / (1.0 + std::exp(-z[i]));
}

void silu_backward(const double* z, const double* upstream, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double s = 1.0 / (1.0 + std::exp(-z[i]));
    out[i] = upstream[i] * s * (1.0 + z[i] * (1.0 - s));
  }
}

void squared_distances(const double* points, std::size_t n, std::size_t d, const double* x,
                       double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = points[i * d + j] - x[j];
      s += diff * diff;
    }
    out[i] = s;
  }
}

void dot_rows(const double* rows, std::size_t n, std::size_t d, const double* x, double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += rows[i * d + j] * x[j];
    out[i] = s;
  }
}

double rbf_sum(const double* x, std::size_t n, const double* y, std::size_t m, std::size_t d,
               double gamma) {
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < d; ++t) {
        const double diff = x[i * d + t] - y[j * d + t];
        s += diff * diff;
      }
      row += std::exp(-gamma * s);
    }
    total += row;
  }
  return total;
}

void adam(double* theta, double* m, double* v, const double* grad, std::size_t n,
          const AdamCoeffs& c) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * grad[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
    const double m_hat = m[i] / c.bias_correction1;
    const double v_hat = v[i] / c.bias_correction2;
    theta[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
  }
}

constexpr KernelTable kTable{
    Isa::kScalar, "scalar", gemm, exp_kernel, silu, silu_backward, squared_distances, dot_rows,
    rbf_sum,      adam,
};

}  // namespace

const KernelTable& scalar_kernels() { return kTable; }

}  // namespace mad::simd
