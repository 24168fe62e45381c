#include <arm_neon.h>

#include "fxchain/kernels.hpp"

namespace fxchain::kernels::detail {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void mul_neon(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void cmul_neon(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) {
    const float64x2_t va = vld1q_f64(a + 2 * k);
    const float64x2_t vb = vld1q_f64(b + 2 * k);
    const float64x2_t b_sw = vextq_f64(vb, vb, 1);
    const float64x2_t re = vmulq_laneq_f64(vb, va, 0);  // ar*br ar*bi
    float64x2_t im = vmulq_laneq_f64(b_sw, va, 1);      // ai*bi ai*br
    im = vsetq_lane_f64(-vgetq_lane_f64(im, 0), im, 0);
    vst1q_f64(out + 2 * k, vaddq_f64(re, im));
  }
}

void cmul_conj_neon(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) {
    const double ar = a[2 * k], ai = a[2 * k + 1];
    const double br = b[2 * k], bi = b[2 * k + 1];
    out[2 * k] = ar * br + ai * bi;
    out[2 * k + 1] = ai * br - ar * bi;
  }
}

}  // namespace

const Table kNeonTable{Isa::Neon, dot_neon, axpy_neon, mul_neon, cmul_neon, cmul_conj_neon};

}  // namespace fxchain::kernels::detail
