#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "fxchain/kernels.hpp"

namespace fxchain::kernels {
namespace {

std::atomic<const Table*> g_active{nullptr};

const Table* select_default() {
  if (const char* env = std::getenv("FXCHAIN_SIMD")) {
    const std::string want(env);
    if (want == "scalar") return &table(Isa::Scalar);
    if (want == "avx2" && supported(Isa::Avx2)) return &table(Isa::Avx2);
    if (want == "neon" && supported(Isa::Neon)) return &table(Isa::Neon);
  }
  if (supported(Isa::Avx2)) return &table(Isa::Avx2);
  if (supported(Isa::Neon)) return &table(Isa::Neon);
  return &table(Isa::Scalar);
}

}  // namespace

bool supported(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(FXCHAIN_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::Neon:
#if defined(FXCHAIN_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const Table& table(Isa isa) {
  if (!supported(isa)) throw std::runtime_error("kernel variant not supported on this CPU: " + std::string(name(isa)));
  switch (isa) {
#if defined(FXCHAIN_HAVE_AVX2)
    case Isa::Avx2:
      return detail::kAvx2Table;
#endif
#if defined(FXCHAIN_HAVE_NEON)
    case Isa::Neon:
      return detail::kNeonTable;
#endif
    default:
      return detail::kScalarTable;
  }
}

const Table& active() {
  const Table* t = g_active.load(std::memory_order_acquire);
  if (t == nullptr) {
    t = select_default();
    g_active.store(t, std::memory_order_release);
  }
  return *t;
}

Isa active_isa() { return active().isa; }

void set_active_isa(Isa isa) { g_active.store(&table(isa), std::memory_order_release); }

std::string_view name(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return "scalar";
    case Isa::Avx2:
      return "avx2";
    case Isa::Neon:
      return "neon";
  }
  return "unknown";
}

}  // namespace fxchain::kernels
