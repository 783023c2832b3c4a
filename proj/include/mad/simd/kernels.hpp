#pragma once

// Data-parallel inner loops used by the network, the score oracles and the
// evaluation metrics. Every kernel has a portable scalar reference and, where
// the build and the CPU allow, an AVX2/FMA variant. The variant is chosen once
// at startup; MAD_SIMD=scalar|avx2 in the environment overrides the choice.
//
// Variants agree to rounding, not bit-for-bit. Within one variant results are
// deterministic, and each gemm output element depends only on its own row of A
// (same accumulation order wherever the row sits in the batch).

#include <cstddef>
#include <string_view>

namespace mad::simd {

enum class Isa { kScalar, kAvx2 };

struct AdamCoeffs {
  double lr;
  double beta1;
  double beta2;
  double eps;
  double bias_correction1;  // 1 - beta1^t
  double bias_correction2;  // 1 - beta2^t
};

struct KernelTable {
  Isa isa;
  std::string_view name;

  // C[m x n] (+)= A[m x k] * B[k x n], all row-major with leading dimensions.
  void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
               const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate);

  void (*exp)(const double* in, double* out, std::size_t n);

  // out = z * sigmoid(z)
  void (*silu)(const double* z, double* out, std::size_t n);
  // out = upstream * d/dz silu(z)
  void (*silu_backward)(const double* z, const double* upstream, double* out, std::size_t n);

  // out[i] = ||points[i] - x||^2 for n points of dimension d.
  void (*squared_distances)(const double* points, std::size_t n, std::size_t d, const double* x,
                            double* out);
  // out[i] = <rows[i], x>.
  void (*dot_rows)(const double* rows, std::size_t n, std::size_t d, const double* x, double* out);

  // sum_{i,j} exp(-gamma * ||x_i - y_j||^2)
  double (*rbf_sum)(const double* x, std::size_t n, const double* y, std::size_t m, std::size_t d,
                    double gamma);

  // In-place bias-corrected Adam update over a flat parameter vector.
  void (*adam)(double* theta, double* m, double* v, const double* grad, std::size_t n,
               const AdamCoeffs& coeffs);
};

const KernelTable& scalar_kernels();
// nullptr when the variant was not compiled in or the CPU lacks the features.
const KernelTable* kernels_for(Isa isa);
// The table selected for this process.
const KernelTable& active();

}  // namespace mad::simd
