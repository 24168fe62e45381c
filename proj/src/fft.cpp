#include "fxchain/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <utility>

#include "fxchain/error.hpp"

namespace fxchain::fft {
namespace {

enum class PlanKind { R2C, C2R };

struct DoubleBuffer {
  explicit DoubleBuffer(std::size_t n) : ptr(static_cast<double*>(fftw_malloc(sizeof(double) * std::max<std::size_t>(n, 1)))) {
    if (ptr == nullptr) throw std::bad_alloc();
  }
  ~DoubleBuffer() { fftw_free(ptr); }
  DoubleBuffer(const DoubleBuffer&) = delete;
  DoubleBuffer& operator=(const DoubleBuffer&) = delete;
  double* ptr;
};

// FFTW planning is not thread-safe; execution with the new-array interface is.
class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(PlanKind kind, std::size_t n) {
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(kind, n);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    DoubleBuffer real(n);
    DoubleBuffer cplx(2 * (n / 2 + 1));
    const int ni = static_cast<int>(n);
    fftw_plan plan = kind == PlanKind::R2C
                         ? fftw_plan_dft_r2c_1d(ni, real.ptr, reinterpret_cast<fftw_complex*>(cplx.ptr), FFTW_ESTIMATE)
                         : fftw_plan_dft_c2r_1d(ni, reinterpret_cast<fftw_complex*>(cplx.ptr), real.ptr, FFTW_ESTIMATE);
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::pair<PlanKind, std::size_t>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

void check_size(std::size_t n) {
  if (n < 2) throw Error(Errc::InvalidArgument, "FFT size must be at least 2");
}

// Unnormalized c2r of a half spectrum (n/2+1 interleaved bins).
std::vector<double> c2r(std::span<const double> half, std::size_t n, std::size_t out_len) {
  const std::size_t bins = n / 2 + 1;
  DoubleBuffer in(2 * bins);
  DoubleBuffer out(n);
  std::copy_n(half.begin(), std::min(half.size(), 2 * bins), in.ptr);
  if (half.size() < 2 * bins) std::fill(in.ptr + half.size(), in.ptr + 2 * bins, 0.0);
  fftw_execute_dft_c2r(cache().get(PlanKind::C2R, n), reinterpret_cast<fftw_complex*>(in.ptr), out.ptr);
  return std::vector<double>(out.ptr, out.ptr + std::min(out_len, n));
}

}  // namespace

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<double> rfft(std::span<const double> x, std::size_t n) {
  check_size(n);
  const std::size_t bins = n / 2 + 1;
  DoubleBuffer in(n);
  DoubleBuffer out(2 * bins);
  const std::size_t m = std::min(x.size(), n);
  std::copy_n(x.begin(), m, in.ptr);
  std::fill(in.ptr + m, in.ptr + n, 0.0);
  fftw_execute_dft_r2c(cache().get(PlanKind::R2C, n), in.ptr, reinterpret_cast<fftw_complex*>(out.ptr));
  return std::vector<double>(out.ptr, out.ptr + 2 * bins);
}

std::vector<double> irfft(std::span<const double> spectrum, std::size_t n, std::size_t out_len) {
  check_size(n);
  auto y = c2r(spectrum, n, out_len);
  const double scale = 1.0 / static_cast<double>(n);
  for (double& v : y) v *= scale;
  y.resize(out_len, 0.0);
  return y;
}

std::vector<double> rfft_adjoint(std::span<const double> grad_spectrum, std::size_t n, std::size_t in_len) {
  check_size(n);
  const std::size_t bins = n / 2 + 1;
  // dx_t = Re sum_k G_k e^{+i 2 pi k t / n} over the stored half spectrum;
  // c2r doubles the interior bins, so halve them first.
  std::vector<double> g(grad_spectrum.begin(), grad_spectrum.end());
  g.resize(2 * bins, 0.0);
  const std::size_t last_interior = n % 2 == 0 ? bins - 2 : bins - 1;
  for (std::size_t k = 1; k <= last_interior; ++k) {
    g[2 * k] *= 0.5;
    g[2 * k + 1] *= 0.5;
  }
  // c2r ignores the imaginary part of DC and Nyquist, matching Re(G e^{i0}).
  auto dx = c2r(g, n, in_len);
  dx.resize(in_len, 0.0);
  return dx;
}

std::vector<double> irfft_adjoint(std::span<const double> grad_time, std::size_t n) {
  check_size(n);
  const std::size_t bins = n / 2 + 1;
  auto g = rfft(grad_time, n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < bins; ++k) {
    const bool edge = k == 0 || (n % 2 == 0 && k == n / 2);
    const double c = (edge ? 1.0 : 2.0) * inv_n;
    g[2 * k] *= c;
    g[2 * k + 1] *= c;
  }
  // c2r drops Im at DC/Nyquist, so their cotangent is exactly zero.
  g[1] = 0.0;
  if (n % 2 == 0) g[2 * (n / 2) + 1] = 0.0;
  return g;
}

}  // namespace fxchain::fft
