#include <doctest.h>

#include <vector>

#include "fxchain/kernels.hpp"
#include "support.hpp"

using namespace fxchain;

namespace {

std::vector<kernels::Isa> available() {
  std::vector<kernels::Isa> out;
  for (auto isa : {kernels::Isa::Avx2, kernels::Isa::Neon}) {
    if (kernels::supported(isa)) out.push_back(isa);
  }
  return out;
}

}  // namespace

TEST_CASE("scalar kernels on a hand-checked input") {
  const auto& s = kernels::table(kernels::Isa::Scalar);
  const double a[] = {1, 2, 3}, b[] = {4, -5, 6};
  CHECK(s.dot(a, b, 3) == doctest::Approx(12.0));
  double y[] = {1, 1, 1};
  s.axpy(2.0, a, y, 3);
  CHECK(y[2] == 7.0);
  // (1+2i)(3-5i) = 13 + i ; (1+2i) conj(3-5i) = -7 + 11i
  const double ca[] = {1, 2}, cb[] = {3, -5};
  double out[2];
  s.cmul(ca, cb, out, 1);
  CHECK(out[0] == 13.0);
  CHECK(out[1] == 1.0);
  s.cmul_conj(ca, cb, out, 1);
  CHECK(out[0] == -7.0);
  CHECK(out[1] == 11.0);
}

TEST_CASE("SIMD kernels agree with the scalar reference") {
  const auto& ref = kernels::table(kernels::Isa::Scalar);
  for (auto isa : available()) {
    const auto& t = kernels::table(isa);
    CAPTURE(kernels::name(isa));
    testing::Gen gen(42);
    // Lengths around the vector width exercise the tails.
    for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 31u, 64u, 1000u, 4099u}) {
      CAPTURE(n);
      const auto a = gen.normal_vec(2 * n), b = gen.normal_vec(2 * n);
      double abs_sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) abs_sum += std::abs(a[i] * b[i]);
      CHECK(std::abs(t.dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <= 1e-14 * abs_sum + 1e-300);

      auto y1 = gen.normal_vec(n), y2 = y1;
      t.axpy(0.37, a.data(), y1.data(), n);
      ref.axpy(0.37, a.data(), y2.data(), n);
      CHECK(testing::max_abs_diff(y1, y2) <= 1e-15 * 4);

      std::vector<double> m1(n), m2(n);
      t.mul(a.data(), b.data(), m1.data(), n);
      ref.mul(a.data(), b.data(), m2.data(), n);
      CHECK(m1 == m2);

      std::vector<double> c1(2 * n), c2(2 * n);
      t.cmul(a.data(), b.data(), c1.data(), n);
      ref.cmul(a.data(), b.data(), c2.data(), n);
      CHECK(testing::max_abs_diff(c1, c2) <= 1e-14);
      t.cmul_conj(a.data(), b.data(), c1.data(), n);
      ref.cmul_conj(a.data(), b.data(), c2.data(), n);
      CHECK(testing::max_abs_diff(c1, c2) <= 1e-14);
    }
  }
}

TEST_CASE("forcing a variant changes the active table") {
  const auto before = kernels::active_isa();
  kernels::set_active_isa(kernels::Isa::Scalar);
  CHECK(kernels::active_isa() == kernels::Isa::Scalar);
  const std::vector<double> a = {1, 2, 3, 4, 5}, b = {1, 1, 1, 1, 1};
  CHECK(kernels::dot(a, b) == 15.0);
  kernels::set_active_isa(before);
  CHECK(kernels::active_isa() == before);
}

TEST_CASE("unsupported variants are rejected") {
  for (auto isa : {kernels::Isa::Avx2, kernels::Isa::Neon}) {
    if (!kernels::supported(isa)) CHECK_THROWS(kernels::table(isa));
  }
}
