// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include <immintrin.h>

#include "fxchain/kernels.hpp"

namespace fxchain::kernels::detail {
namespace {

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  __m256d acc3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  const __m256d sum = _mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3));
  const __m128d lo = _mm256_castpd256_pd128(sum);
  const __m128d hi = _mm256_extractf128_pd(sum, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  double acc = _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void mul_avx2(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

// Two complex values per register: [re0 im0 re1 im1].
inline __m256d cmul2(__m256d va, __m256d vb) {
  const __m256d a_re = _mm256_movedup_pd(va);         // re re
  const __m256d a_im = _mm256_permute_pd(va, 0b1111);  // im im
  const __m256d b_sw = _mm256_permute_pd(vb, 0b0101);  // bi br
  return _mm256_addsub_pd(_mm256_mul_pd(a_re, vb), _mm256_mul_pd(a_im, b_sw));
}

void cmul_avx2(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t k = 0;
  for (; k + 2 <= n; k += 2) {
    _mm256_storeu_pd(out + 2 * k, cmul2(_mm256_loadu_pd(a + 2 * k), _mm256_loadu_pd(b + 2 * k)));
  }
  for (; k < n; ++k) {
    const double ar = a[2 * k], ai = a[2 * k + 1];
    const double br = b[2 * k], bi = b[2 * k + 1];
    out[2 * k] = ar * br - ai * bi;
    out[2 * k + 1] = ar * bi + ai * br;
  }
}

void cmul_conj_avx2(const double* a, const double* b, double* out, std::size_t n) {
  const __m256d conj_mask = _mm256_set_pd(-0.0, 0.0, -0.0, 0.0);
  std::size_t k = 0;
  for (; k + 2 <= n; k += 2) {
    const __m256d vb = _mm256_xor_pd(_mm256_loadu_pd(b + 2 * k), conj_mask);
    _mm256_storeu_pd(out + 2 * k, cmul2(_mm256_loadu_pd(a + 2 * k), vb));
  }
  for (; k < n; ++k) {
    const double ar = a[2 * k], ai = a[2 * k + 1];
    const double br = b[2 * k], bi = b[2 * k + 1];
    out[2 * k] = ar * br + ai * bi;
    out[2 * k + 1] = ai * br - ar * bi;
  }
}

}  // namespace

const Table kAvx2Table{Isa::Avx2, dot_avx2, axpy_avx2, mul_avx2, cmul_avx2, cmul_conj_avx2};

}  // namespace fxchain::kernels::detail
