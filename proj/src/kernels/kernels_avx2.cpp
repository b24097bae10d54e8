// Compiled with -mavx2 -mfma; only reached after a CPUID check.
#include "atscc/kernels.hpp"

#include <immintrin.h>

#include <cmath>

namespace atscc::kernels::avx2 {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// Every output element is produced by the same ascending-p chain of fused
// multiply-adds starting from zero, whichever path (block or tail) computes
// it. A row's result therefore never depends on its position in the batch.
template <int Rows>
void row_block(const double* a, std::size_t lda, MatView b, double* c,
               std::size_t ldc, std::size_t k, bool accumulate) {
  const std::size_t n = b.cols;
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    __m256d acc0[Rows];
    __m256d acc1[Rows];
    for (int r = 0; r < Rows; ++r) {
      acc0[r] = _mm256_setzero_pd();
      acc1[r] = _mm256_setzero_pd();
    }
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b.data + p * b.ld + j;
      const __m256d b0 = _mm256_loadu_pd(brow);
      const __m256d b1 = _mm256_loadu_pd(brow + 4);
      for (int r = 0; r < Rows; ++r) {
        const __m256d av = _mm256_broadcast_sd(a + r * lda + p);
        acc0[r] = _mm256_fmadd_pd(av, b0, acc0[r]);
        acc1[r] = _mm256_fmadd_pd(av, b1, acc1[r]);
      }
    }
    for (int r = 0; r < Rows; ++r) {
      double* crow = c + r * ldc + j;
      if (accumulate) {
        acc0[r] = _mm256_add_pd(_mm256_loadu_pd(crow), acc0[r]);
        acc1[r] = _mm256_add_pd(_mm256_loadu_pd(crow + 4), acc1[r]);
      }
      _mm256_storeu_pd(crow, acc0[r]);
      _mm256_storeu_pd(crow + 4, acc1[r]);
    }
  }
  for (; j + 4 <= n; j += 4) {
    __m256d acc[Rows];
    for (int r = 0; r < Rows; ++r) acc[r] = _mm256_setzero_pd();
    for (std::size_t p = 0; p < k; ++p) {
      const __m256d bv = _mm256_loadu_pd(b.data + p * b.ld + j);
      for (int r = 0; r < Rows; ++r) {
        acc[r] = _mm256_fmadd_pd(_mm256_broadcast_sd(a + r * lda + p), bv, acc[r]);
      }
    }
    for (int r = 0; r < Rows; ++r) {
      double* crow = c + r * ldc + j;
      if (accumulate) acc[r] = _mm256_add_pd(_mm256_loadu_pd(crow), acc[r]);
      _mm256_storeu_pd(crow, acc[r]);
    }
  }
  for (; j < n; ++j) {
    for (int r = 0; r < Rows; ++r) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s = std::fma(a[r * lda + p], b.data[p * b.ld + j], s);
      double& out = c[r * ldc + j];
      out = accumulate ? out + s : s;
    }
  }
}

}  // namespace

void gemm_nn(MatView a, MatView b, MutMatView c, bool accumulate) {
  const std::size_t m = a.rows;
  const std::size_t k = a.cols;
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    row_block<4>(a.data + i * a.ld, a.ld, b, c.data + i * c.ld, c.ld, k, accumulate);
  }
  for (; i < m; ++i) {
    row_block<1>(a.data + i * a.ld, a.ld, b, c.data + i * c.ld, c.ld, k, accumulate);
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(&a[i]), _mm256_loadu_pd(&b[i]), s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(&a[i + 4]), _mm256_loadu_pd(&b[i + 4]), s1);
  }
  for (; i + 4 <= n; i += 4) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(&a[i]), _mm256_loadu_pd(&b[i]), s0);
  }
  double s = hsum(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) s = std::fma(a[i], b[i], s);
  return s;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  __m256d s0 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(&a[i]), _mm256_loadu_pd(&b[i]));
    s0 = _mm256_fmadd_pd(d, d, s0);
  }
  double s = hsum(s0);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s = std::fma(d, d, s);
  }
  return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  const std::size_t n = x.size();
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(&y[i], _mm256_fmadd_pd(av, _mm256_loadu_pd(&x[i]), _mm256_loadu_pd(&y[i])));
  }
  for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

}  // namespace atscc::kernels::avx2
