#pragma once

// Data-parallel inner loops shared by the DSP, loss and network code.
//
// Every kernel has a scalar reference implementation and, where the target
// allows it, an AVX2/FMA or NEON variant. The variant is chosen once at
// runtime from the CPU's capabilities; FXCHAIN_SIMD=scalar|avx2|neon in the
// environment overrides the choice. Variants agree with the scalar reference
// to rounding (reduction order differs), see tests/unit/test_kernels.cpp.

#include <cstddef>
#include <span>
#include <string_view>

namespace fxchain::kernels {

enum class Isa { Scalar, Avx2, Neon };

struct Table {
  Isa isa;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out[i] = a[i] * b[i]
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  // Interleaved complex: out[k] = a[k] * b[k], n_complex pairs.
  void (*cmul)(const double* a, const double* b, double* out, std::size_t n_complex);
  // Interleaved complex: out[k] = a[k] * conj(b[k]).
  void (*cmul_conj)(const double* a, const double* b, double* out, std::size_t n_complex);
};

bool supported(Isa isa);
const Table& table(Isa isa);

// The dispatched table. Selected lazily on first use.
const Table& active();
Isa active_isa();
// Forces a variant (tests, benchmarks). Throws if the CPU lacks it.
void set_active_isa(Isa isa);

std::string_view name(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size() < b.size() ? a.size() : b.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size() < y.size() ? x.size() : y.size());
}

inline void mul(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  active().mul(a.data(), b.data(), out.data(), out.size());
}

inline void cmul(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  active().cmul(a.data(), b.data(), out.data(), out.size() / 2);
}

inline void cmul_conj(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  active().cmul_conj(a.data(), b.data(), out.data(), out.size() / 2);
}

namespace detail {
extern const Table kScalarTable;
#if defined(FXCHAIN_HAVE_AVX2)
extern const Table kAvx2Table;
#endif
#if defined(FXCHAIN_HAVE_NEON)
extern const Table kNeonTable;
#endif
}  // namespace detail

}  // namespace fxchain::kernels
