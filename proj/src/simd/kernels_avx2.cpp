#include <immintrin.h>

#include <cmath>
#include <cstdint>

#include "mad/simd/kernels.hpp"

namespace mad::simd {
namespace {

// exp(x) for four doubles: x = k ln2 + r with |r| <= ln2/2, degree-13 Taylor
// polynomial for exp(r), then scaling by 2^k split in two factors so that
// results in the subnormal range are still produced.
inline __m256d exp_pd(__m256d x) {
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634074);
  const __m256d ln2_hi = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d ln2_lo = _mm256_set1_pd(1.42860682030941723212e-6);
  const __m256d hi_limit = _mm256_set1_pd(709.782712893384);
  const __m256d lo_limit = _mm256_set1_pd(-745.2);

  const __m256d xc = _mm256_max_pd(_mm256_min_pd(x, hi_limit), lo_limit);
  const __m256d k = _mm256_round_pd(_mm256_mul_pd(xc, log2e),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(k, ln2_hi, xc);
  r = _mm256_fnmadd_pd(k, ln2_lo, r);

  static constexpr double c[] = {
      1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0,
      1.0 / 362880.0,     1.0 / 40320.0,     1.0 / 5040.0,     1.0 / 720.0,
      1.0 / 120.0,        1.0 / 24.0,        1.0 / 6.0,        0.5,
      1.0,                1.0,
  };
  __m256d p = _mm256_set1_pd(c[0]);
  for (int i = 1; i < 14; ++i) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(c[i]));

  // 2^k built as 2^kh * 2^kl from exponent bits (1.5 * 2^52 rounding trick).
  const __m256d magic = _mm256_set1_pd(6755399441055744.0);
  const __m256d kh = _mm256_floor_pd(_mm256_mul_pd(k, _mm256_set1_pd(0.5)));
  const __m256d kl = _mm256_sub_pd(k, kh);
  const __m256i bias = _mm256_set1_epi64x(1023);
  const __m256i khi = _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(kh, magic)),
                                       _mm256_castpd_si256(magic));
  const __m256i kli = _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(kl, magic)),
                                       _mm256_castpd_si256(magic));
  const __m256d s1 = _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_add_epi64(khi, bias), 52));
  const __m256d s2 = _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_add_epi64(kli, bias), 52));
  __m256d result = _mm256_mul_pd(_mm256_mul_pd(p, s1), s2);

  // Overflow to +inf, deep underflow to 0, NaN passthrough.
  const __m256d inf = _mm256_set1_pd(HUGE_VAL);
  result = _mm256_blendv_pd(result, inf, _mm256_cmp_pd(x, hi_limit, _CMP_GT_OQ));
  result = _mm256_blendv_pd(result, _mm256_setzero_pd(), _mm256_cmp_pd(x, lo_limit, _CMP_LT_OQ));
  result = _mm256_blendv_pd(result, x, _mm256_cmp_pd(x, x, _CMP_UNORD_Q));
  return result;
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
          const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
  const std::size_t n8 = n - n % 8;
  const std::size_t m4 = m - m % 4;

  auto store = [&](double* dst, __m256d acc) {
    if (accumulate) acc = _mm256_add_pd(_mm256_loadu_pd(dst), acc);
    _mm256_storeu_pd(dst, acc);
  };

  for (std::size_t j = 0; j < n8; j += 8) {
    std::size_t i = 0;
    for (; i < m4; i += 4) {
      __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
      __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
      __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
      __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
      const double* a0 = a + i * lda;
      const double* a1 = a0 + lda;
      const double* a2 = a1 + lda;
      const double* a3 = a2 + lda;
      for (std::size_t p = 0; p < k; ++p) {
        const __m256d b0 = _mm256_loadu_pd(b + p * ldb + j);
        const __m256d b1 = _mm256_loadu_pd(b + p * ldb + j + 4);
        __m256d av = _mm256_broadcast_sd(a0 + p);
        c00 = _mm256_fmadd_pd(av, b0, c00);
        c01 = _mm256_fmadd_pd(av, b1, c01);
        av = _mm256_broadcast_sd(a1 + p);
        c10 = _mm256_fmadd_pd(av, b0, c10);
        c11 = _mm256_fmadd_pd(av, b1, c11);
        av = _mm256_broadcast_sd(a2 + p);
        c20 = _mm256_fmadd_pd(av, b0, c20);
        c21 = _mm256_fmadd_pd(av, b1, c21);
        av = _mm256_broadcast_sd(a3 + p);
        c30 = _mm256_fmadd_pd(av, b0, c30);
        c31 = _mm256_fmadd_pd(av, b1, c31);
      }
      store(c + i * ldc + j, c00);
      store(c + i * ldc + j + 4, c01);
      store(c + (i + 1) * ldc + j, c10);
      store(c + (i + 1) * ldc + j + 4, c11);
      store(c + (i + 2) * ldc + j, c20);
      store(c + (i + 2) * ldc + j + 4, c21);
      store(c + (i + 3) * ldc + j, c30);
      store(c + (i + 3) * ldc + j + 4, c31);
    }
    for (; i < m; ++i) {
      __m256d c0 = _mm256_setzero_pd(), c1 = _mm256_setzero_pd();
      const double* ai = a + i * lda;
      for (std::size_t p = 0; p < k; ++p) {
        const __m256d av = _mm256_broadcast_sd(ai + p);
        c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + p * ldb + j), c0);
        c1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + p * ldb + j + 4), c1);
      }
      store(c + i * ldc + j, c0);
      store(c + i * ldc + j + 4, c1);
    }
  }

  // Column tail: same fma chain, one element at a time.
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = n8; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc = std::fma(a[i * lda + p], b[p * ldb + j], acc);
      c[i * ldc + j] = accumulate ? c[i * ldc + j] + acc : acc;
    }
  }
}

// Tails go through the same vector code on a zero-padded copy, so an element's
// result never depends on its position in the array.
inline __m256d load_partial(const double* p, std::size_t count) {
  alignas(32) double buf[4] = {0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < count; ++i) buf[i] = p[i];
  return _mm256_load_pd(buf);
}

inline void store_partial(double* p, __m256d v, std::size_t count) {
  alignas(32) double buf[4];
  _mm256_store_pd(buf, v);
  for (std::size_t i = 0; i < count; ++i) p[i] = buf[i];
}

void exp_kernel(const double* in, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, exp_pd(_mm256_loadu_pd(in + i)));
  if (i < n) store_partial(out + i, exp_pd(load_partial(in + i, n - i)), n - i);
}

void silu(const double* z, double* out, std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d sign = _mm256_set1_pd(-0.0);
  auto op = [&](__m256d zv) {
    return _mm256_div_pd(zv, _mm256_add_pd(one, exp_pd(_mm256_xor_pd(zv, sign))));
  };
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, op(_mm256_loadu_pd(z + i)));
  if (i < n) store_partial(out + i, op(load_partial(z + i, n - i)), n - i);
}

void silu_backward(const double* z, const double* upstream, double* out, std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d sign = _mm256_set1_pd(-0.0);
  auto op = [&](__m256d zv, __m256d up) {
    const __m256d s = _mm256_div_pd(one, _mm256_add_pd(one, exp_pd(_mm256_xor_pd(zv, sign))));
    const __m256d d = _mm256_mul_pd(s, _mm256_fmadd_pd(zv, _mm256_sub_pd(one, s), one));
    return _mm256_mul_pd(up, d);
  };
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, op(_mm256_loadu_pd(z + i), _mm256_loadu_pd(upstream + i)));
  if (i < n)
    store_partial(out + i, op(load_partial(z + i, n - i), load_partial(upstream + i, n - i)),
                  n - i);
}

inline __m256i row_offsets(std::size_t d) {
  const auto sd = static_cast<long long>(d);
  return _mm256_set_epi64x(3 * sd, 2 * sd, sd, 0);
}

void squared_distances(const double* points, std::size_t n, std::size_t d, const double* x,
                       double* out) {
  const __m256i idx = row_offsets(d);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d s = _mm256_setzero_pd();
    const double* base = points + i * d;
    for (std::size_t t = 0; t < d; ++t) {
      const __m256d p = _mm256_i64gather_pd(base + t, idx, 8);
      const __m256d diff = _mm256_sub_pd(p, _mm256_set1_pd(x[t]));
      s = _mm256_fmadd_pd(diff, diff, s);
    }
    _mm256_storeu_pd(out + i, s);
  }
  for (; i < n; ++i) {
    double s = 0.0;
    for (std::size_t t = 0; t < d; ++t) {
      const double diff = points[i * d + t] - x[t];
      s = std::fma(diff, diff, s);
    }
    out[i] = s;
  }
}

void dot_rows(const double* rows, std::size_t n, std::size_t d, const double* x, double* out) {
  const __m256i idx = row_offsets(d);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d s = _mm256_setzero_pd();
    const double* base = rows + i * d;
    for (std::size_t t = 0; t < d; ++t)
      s = _mm256_fmadd_pd(_mm256_i64gather_pd(base + t, idx, 8), _mm256_set1_pd(x[t]), s);
    _mm256_storeu_pd(out + i, s);
  }
  for (; i < n; ++i) {
    double s = 0.0;
    for (std::size_t t = 0; t < d; ++t) s = std::fma(rows[i * d + t], x[t], s);
    out[i] = s;
  }
}

double rbf_sum(const double* x, std::size_t n, const double* y, std::size_t m, std::size_t d,
               double gamma) {
  const __m256i idx = row_offsets(d);
  const __m256d neg_gamma = _mm256_set1_pd(-gamma);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x + i * d;
    __m256d acc = _mm256_setzero_pd();
    std::size_t j = 0;
    for (; j + 4 <= m; j += 4) {
      __m256d s = _mm256_setzero_pd();
      const double* base = y + j * d;
      for (std::size_t t = 0; t < d; ++t) {
        const __m256d diff =
            _mm256_sub_pd(_mm256_set1_pd(xi[t]), _mm256_i64gather_pd(base + t, idx, 8));
        s = _mm256_fmadd_pd(diff, diff, s);
      }
      acc = _mm256_add_pd(acc, exp_pd(_mm256_mul_pd(neg_gamma, s)));
    }
    double row = hsum(acc);
    for (; j < m; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < d; ++t) {
        const double diff = xi[t] - y[j * d + t];
        s = std::fma(diff, diff, s);
      }
      row += std::exp(-gamma * s);
    }
    total += row;
  }
  return total;
}

void adam(double* theta, double* m, double* v, const double* grad, std::size_t n,
          const AdamCoeffs& c) {
  const __m256d b1 = _mm256_set1_pd(c.beta1);
  const __m256d b2 = _mm256_set1_pd(c.beta2);
  const __m256d omb1 = _mm256_set1_pd(1.0 - c.beta1);
  const __m256d omb2 = _mm256_set1_pd(1.0 - c.beta2);
  const __m256d bc1 = _mm256_set1_pd(c.bias_correction1);
  const __m256d bc2 = _mm256_set1_pd(c.bias_correction2);
  const __m256d lr = _mm256_set1_pd(c.lr);
  const __m256d eps = _mm256_set1_pd(c.eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d g = _mm256_loadu_pd(grad + i);
    const __m256d mv = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)),
                                     _mm256_mul_pd(omb1, g));
    const __m256d vv = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                                     _mm256_mul_pd(_mm256_mul_pd(omb2, g), g));
    _mm256_storeu_pd(m + i, mv);
    _mm256_storeu_pd(v + i, vv);
    const __m256d m_hat = _mm256_div_pd(mv, bc1);
    const __m256d v_hat = _mm256_div_pd(vv, bc2);
    const __m256d step =
        _mm256_div_pd(_mm256_mul_pd(lr, m_hat), _mm256_add_pd(_mm256_sqrt_pd(v_hat), eps));
    _mm256_storeu_pd(theta + i, _mm256_sub_pd(_mm256_loadu_pd(theta + i), step));
  }
  for (; i < n; ++i) {
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * grad[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
    const double m_hat = m[i] / c.bias_correction1;
    const double v_hat = v[i] / c.bias_correction2;
    theta[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
  }
}

constexpr KernelTable kTable{
    Isa::kAvx2, "avx2", gemm, exp_kernel, silu, silu_backward, squared_distances, dot_rows,
    rbf_sum,    adam,
};

}  // namespace

const KernelTable& avx2_kernels() { return kTable; }

}  // namespace mad::simd
