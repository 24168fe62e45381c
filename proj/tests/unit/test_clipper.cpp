#include <doctest.h>

#include <cmath>
#include <functional>
#include <numbers>

#include "fxchain/clipper.hpp"
#include "fxchain/error.hpp"
#include "support.hpp"

using namespace fxchain;
using namespace fxchain::clipper;

TEST_CASE("Chebyshev recurrence against closed forms") {
  // Dyadic points keep every product exact, so equality is exact.
  for (int k = -64; k <= 64; ++k) {
    const double x = k / 64.0;
    CHECK(chebyshev_t(0, x) == 1.0);
    CHECK(chebyshev_t(1, x) == x);
    CHECK(chebyshev_t(2, x) == 2 * x * x - 1);
    CHECK(chebyshev_t(3, x) == 4 * x * x * x - 3 * x);
  }
  testing::Gen gen(51);
  for (int trial = 0; trial < 500; ++trial) {
    const double th = gen.uniform(0.0, std::numbers::pi);
    const int n = static_cast<int>(gen.index(24));
    CHECK(chebyshev_t(n, std::cos(th)) == doctest::Approx(std::cos(n * th)).scale(1.0).epsilon(1e-12));
  }
}

TEST_CASE("Clenshaw and Horner agree with explicit sums") {
  testing::Gen gen(52);
  for (int trial = 0; trial < 300; ++trial) {
    const auto g = gen.uniform_vec(1 + gen.index(24), -1.0, 1.0);
    const double x = gen.uniform(-1.0, 1.0);
    double cheb = 0.0, mono = 0.0;
    for (std::size_t h = 0; h < g.size(); ++h) {
      cheb += g[h] * std::cos(double(h) * std::acos(x));
      mono += g[h] * std::pow(x, double(h));
    }
    CHECK(chebyshev_eval(g, x) == doctest::Approx(cheb).scale(1.0).epsilon(1e-12));
    CHECK(taylor_eval(g, x) == doctest::Approx(mono).scale(1.0).epsilon(1e-12));
  }
  CHECK(chebyshev_eval(std::vector<double>{}, 0.3) == 0.0);
}

TEST_CASE("Chebyshev shaping of a cosine isolates harmonics") {
  // T_3 of a full-scale cosine is the third harmonic alone.
  std::vector<double> g(4, 0.0);
  g[3] = 1.0;
  const std::size_t n = 4410;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::cos(2 * std::numbers::pi * 100.0 * double(i) / 44100.0);
  const auto y = clip_chebyshev(x, g);
  for (std::size_t i = 0; i < n; i += 37) {
    CHECK(y[i] == doctest::Approx(std::cos(2 * std::numbers::pi * 300.0 * double(i) / 44100.0)).scale(1.0).epsilon(1e-12));
  }
}

TEST_CASE("cubic and hard curves") {
  CHECK(f_cubic(0.0) == 0.0);
  CHECK(f_cubic(1.5) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(f_cubic(4.0) == 1.0);
  CHECK(f_cubic(-4.0) == -1.0);
  CHECK(f_hard(0.5) == 0.5);
  CHECK(f_hard(-2.0) == -1.0);
  testing::Gen gen(53);
  for (int trial = 0; trial < 500; ++trial) {
    const double x = gen.uniform(-3.0, 3.0);
    CHECK(f_cubic(-x) == -f_cubic(x));
    CHECK(std::abs(f_cubic(x)) <= 1.0);
    for (double h : {0.0, 0.3, 1.0, 1.7, 2.0}) CHECK(std::abs(blend(x, h)) <= 1.0);
  }
  // Slope is continuous at the knee: derivative 1 - 4x^2/9 vanishes there.
  const double e = 1e-7;
  CHECK(std::abs((f_cubic(1.5) - f_cubic(1.5 - e)) / e) <= 1e-6);
}

TEST_CASE("blend endpoints and continuity at h = 1") {
  testing::Gen gen(54);
  for (int trial = 0; trial < 1000; ++trial) {
    const double x = gen.uniform(-4.0, 4.0);
    CHECK(blend(x, 0.0) == std::tanh(x));
    CHECK(blend(x, 1.0) == f_cubic(x));
    CHECK(blend(x, 2.0) == f_hard(x));
    CHECK(std::abs(blend(x, std::nextafter(1.0, 0.0)) - blend(x, 1.0)) <= 1e-12);
    CHECK(std::abs(blend(x, std::nextafter(1.0, 2.0)) - blend(x, 1.0)) <= 1e-12);
  }
  try {
    blend(0.1, 2.5);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::HardnessOutOfRange);
  }
}

TEST_CASE("parametric clipper removes the offset at silence") {
  testing::Gen gen(55);
  for (int trial = 0; trial < 50; ++trial) {
    const ParametricClipperParams p{gen.uniform(0.0, 24.0), gen.uniform(-0.5, 0.5), gen.uniform(0.0, 2.0)};
    std::vector<double> x = gen.normal_vec(64, 0.5);
    x[0] = 0.0;
    const auto y = clip_parametric(x, p);
    CHECK(y[0] == 0.0);
    const double g = std::pow(10.0, p.gain_db / 20);
    for (std::size_t i = 1; i < x.size(); ++i) {
      CHECK(y[i] == doctest::Approx((blend(g * x[i] + p.offset, p.hardness) - blend(p.offset, p.hardness)) / g).epsilon(1e-12).scale(1.0));
    }
  }
  // At 0 dB gain and tiny input the tanh branch is nearly linear.
  const std::vector<double> small = {1e-6};
  CHECK(clip_parametric(small, ParametricClipperParams{0.0, 0.0, 0.0})[0] == doctest::Approx(1e-6).epsilon(1e-9));
}

TEST_CASE("differentiable clippers") {
  testing::Gen gen(56);
  const auto x = gen.normal_vec(300, 0.4);
  const auto w = gen.normal_vec(300);
  auto check = [&](const char* label, const std::function<ad::Var(ad::Tape&, ad::Var)>& f, const std::vector<double>& p, double h) {
    CAPTURE(label);
    const auto g = ad::gradient(f, p);
    for (std::size_t i = 0; i < p.size(); ++i) {
      auto at = [&](double v) {
        auto pp = p;
        pp[i] = v;
        ad::Tape t;
        return f(t, t.variable(pp)).item();
      };
      const double fd = (at(p[i] + h) - at(p[i] - h)) / (2 * h);
      CAPTURE(i);
      CHECK(std::abs(g[i] - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
    }
  };
  const auto coeffs = gen.uniform_vec(24, -0.2, 0.2);
  check("polyval", [&](ad::Tape& t, ad::Var v) { return ad::sum(polyval(t.constant(x), v) * t.constant(w)); }, coeffs, 1e-6);
  check("chebval", [&](ad::Tape& t, ad::Var v) { return ad::sum(chebval(t.constant(x), v) * t.constant(w)); }, coeffs, 1e-6);
  // Smooth region of every branch: small inputs, gain and hardness away from switches.
  for (double hard : {0.4, 1.6}) {
    check("parametric", [&](ad::Tape& t, ad::Var v) {
      const auto y = clip_parametric(t.constant(x), ad::element(v, 0), ad::element(v, 1), ad::element(v, 2));
      return ad::sum(y * t.constant(w));
    }, {-6.0, 0.1, hard}, 1e-6);
  }
  {
    ad::Tape t;
    const auto y = clip_parametric(t.constant(x), t.constant(9.0), t.constant(-0.2), t.constant(1.3));
    CHECK(testing::max_abs_diff(y.value(), clip_parametric(x, ParametricClipperParams{9.0, -0.2, 1.3})) <= 1e-12);
  }
}
