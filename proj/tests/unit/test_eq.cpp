#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "fxchain/eq.hpp"
#include "fxchain/error.hpp"
#include "support.hpp"

using namespace fxchain;
using namespace fxchain::eq;
using cd = std::complex<double>;

namespace {

constexpr double kFs = 44100.0;

// Cookbook coefficients written out from the textbook forms, unnormalized.
struct Raw {
  double b0, b1, b2, a0, a1, a2;
};

Raw rbj(BandKind kind, double f0, double g, double q) {
  const double A = std::pow(10.0, g / 40.0);
  const double w = 2 * std::numbers::pi * f0 / kFs;
  const double al = std::sin(w) / (2 * q);
  const double c = std::cos(w);
  const double s = 2 * std::sqrt(A) * al;
  switch (kind) {
    case BandKind::LowShelf:
      return {A * ((A + 1) - (A - 1) * c + s), 2 * A * ((A - 1) - (A + 1) * c), A * ((A + 1) - (A - 1) * c - s),
              (A + 1) + (A - 1) * c + s, -2 * ((A - 1) + (A + 1) * c), (A + 1) + (A - 1) * c - s};
    case BandKind::HighShelf:
      return {A * ((A + 1) + (A - 1) * c + s), -2 * A * ((A - 1) + (A + 1) * c), A * ((A + 1) + (A - 1) * c - s),
              (A + 1) - (A - 1) * c + s, 2 * ((A - 1) - (A + 1) * c), (A + 1) - (A - 1) * c - s};
    default:
      return {1 + al * A, -2 * c, 1 - al * A, 1 + al / A, -2 * c, 1 - al / A};
  }
}

cd raw_response(const Raw& r, double hz) {
  const cd z = std::polar(1.0, -2 * std::numbers::pi * hz / kFs);
  return (r.b0 + r.b1 * z + r.b2 * z * z) / (r.a0 + r.a1 * z + r.a2 * z * z);
}

// Direct form I, straight from the difference equation.
std::vector<double> df1(const std::vector<double>& x, const Raw& r) {
  std::vector<double> y(x.size());
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    y[n] = (r.b0 * x[n] + r.b1 * x1 + r.b2 * x2 - r.a1 * y1 - r.a2 * y2) / r.a0;
    x2 = x1;
    x1 = x[n];
    y2 = y1;
    y1 = y[n];
  }
  return y;
}

std::vector<double> random_peq(testing::Gen& gen) {
  const auto specs = default_specs("peq");
  std::vector<double> p;
  for (const auto& s : specs) p.push_back(s.denormalize(gen.uniform()));
  return p;
}

}  // namespace

TEST_CASE("graphic bandwidth") {
  CHECK(bandwidth_to_q(2.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(graphic_center(0) == 31.25);
  CHECK(graphic_center(9) == 16000.0);
}

TEST_CASE("band design matches the cookbook") {
  testing::Gen gen(31);
  for (auto kind : {BandKind::LowShelf, BandKind::Peak, BandKind::HighShelf}) {
    for (int trial = 0; trial < 50; ++trial) {
      const double f0 = std::exp(gen.uniform(std::log(30.0), std::log(15000.0)));
      const double g = gen.uniform(-12.0, 12.0), q = gen.uniform(0.3, 4.0);
      const auto c = design_band(kind, f0, g, q, kFs);
      const Raw r = rbj(kind, f0, g, q);
      CHECK(c.b0 == doctest::Approx(r.b0 / r.a0).epsilon(1e-12));
      CHECK(c.b1 == doctest::Approx(r.b1 / r.a0).epsilon(1e-12));
      CHECK(c.b2 == doctest::Approx(r.b2 / r.a0).epsilon(1e-12));
      CHECK(c.a1 == doctest::Approx(r.a1 / r.a0).epsilon(1e-12));
      CHECK(c.a2 == doctest::Approx(r.a2 / r.a0).epsilon(1e-12));
    }
  }
}

TEST_CASE("gain at the defining frequencies") {
  const auto peak = design_band(BandKind::Peak, 1000.0, 6.0, 1.0, kFs);
  const BiquadCoeffs one[] = {peak};
  // Bin exactly at 1 kHz: w = pi k / (n - 1) with n - 1 = 22050.
  const auto h = freq_response(one, 22051);
  CHECK(20 * std::log10(std::abs(h[1000])) == doctest::Approx(6.0).epsilon(1e-9));

  const BiquadCoeffs low[] = {design_band(BandKind::LowShelf, 200.0, -9.0, 0.7, kFs)};
  CHECK(20 * std::log10(std::abs(freq_response(low, 16)[0])) == doctest::Approx(-9.0).epsilon(1e-9));
  const BiquadCoeffs high[] = {design_band(BandKind::HighShelf, 5000.0, 4.0, 0.7, kFs)};
  CHECK(20 * std::log10(std::abs(freq_response(high, 16)[15])) == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("cascade response is the product of direct evaluations") {
  testing::Gen gen(32);
  const auto eq = EqDefinition::parametric();
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_peq(gen);
    const auto cascade = eq.design(p, kFs);
    const std::size_t bins = 257;
    const auto h = freq_response(cascade, bins);
    for (std::size_t k = 0; k < bins; k += 16) {
      const double hz = kFs / 2 * double(k) / double(bins - 1);
      cd ref = 1.0;
      ref *= raw_response(rbj(BandKind::LowShelf, p[0], p[1], p[2]), hz);
      for (int b = 1; b <= 3; ++b) ref *= raw_response(rbj(BandKind::Peak, p[3 * b], p[3 * b + 1], p[3 * b + 2]), hz);
      ref *= raw_response(rbj(BandKind::HighShelf, p[12], p[13], p[14]), hz);
      CHECK(std::abs(h[k] - ref) <= 1e-9 * std::max(1.0, std::abs(ref)));
    }
  }
}

TEST_CASE("time-domain cascade matches direct form I") {
  testing::Gen gen(33);
  const auto x = gen.normal_vec(3000);
  for (int trial = 0; trial < 10; ++trial) {
    const double f0 = std::exp(gen.uniform(std::log(50.0), std::log(10000.0)));
    const double g = gen.uniform(-12.0, 12.0), q = gen.uniform(0.3, 4.0);
    const BiquadCoeffs c[] = {design_band(BandKind::Peak, f0, g, q, kFs)};
    CHECK(testing::rel_l2(filter_cascade(x, c), df1(x, rbj(BandKind::Peak, f0, g, q))) <= 1e-12);
  }
}

TEST_CASE("zero gain is the identity") {
  testing::Gen gen(34);
  const AudioBuffer x(gen.normal_vec(4410, 0.3), 44100);
  std::vector<double> p = random_peq(gen);
  for (int b = 0; b < 5; ++b) p[3 * b + 1] = 0.0;
  const ParamVector pv{p, ParamKind::Denormalized};
  const auto peq = EqDefinition::parametric();
  CHECK(testing::max_abs_diff(apply_time_domain(x, peq, pv).samples(), x.samples()) <= 1e-9);
  CHECK(testing::max_abs_diff(apply_frequency_sampled(x, peq, pv).samples(), x.samples()) <= 1e-9);
  const ParamVector flat{std::vector<double>(10, 0.0), ParamKind::Denormalized};
  CHECK(testing::max_abs_diff(apply_time_domain(x, EqDefinition::graphic(), flat).samples(), x.samples()) <= 1e-9);
}

TEST_CASE("frequency sampling agrees with the time-domain cascade") {
  testing::Gen gen(35);
  const auto x = gen_test_signal(SignalKind::WhiteNoise, 1.0, 9);
  for (int trial = 0; trial < 5; ++trial) {
    const ParamVector pv{random_peq(gen), ParamKind::Denormalized};
    const auto td = apply_time_domain(x, EqDefinition::parametric(), pv);
    const auto fs = apply_frequency_sampled(x, EqDefinition::parametric(), pv);
    CHECK(testing::rel_l2(fs.samples(), td.samples()) <= 1e-3);
  }
  CHECK(frequency_sampling_size(1000) == 2048);
  CHECK(frequency_sampling_size(1024) == 2048);
}

TEST_CASE("differentiable path matches the plain path and its derivative") {
  testing::Gen gen(36);
  const auto x = gen.normal_vec(512, 0.3);
  const auto w = gen.normal_vec(512);
  const auto eq = EqDefinition::parametric();
  const auto p = random_peq(gen);
  auto f = [&](ad::Tape& t, ad::Var v) {
    return ad::sum(apply_frequency_sampled(t.constant(x), eq, v, kFs) * t.constant(w));
  };
  {
    ad::Tape t;
    const auto y = apply_frequency_sampled(t.constant(x), eq, t.variable(p), kFs);
    const auto ref = apply_frequency_sampled(AudioBuffer(x, 44100), eq, ParamVector{p, ParamKind::Denormalized});
    CHECK(testing::max_abs_diff(y.value(), ref.samples()) <= 1e-12);
  }
  const auto g = ad::gradient(f, p);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(p[i]));
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
}

TEST_CASE("invalid bands") {
  try {
    design_band(BandKind::Peak, 30000.0, 0.0, 1.0, kFs);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::FrequencyOutOfRange);
  }
  CHECK_THROWS_AS(design_band(BandKind::Peak, 1000.0, 0.0, 0.0, kFs), Error);
  CHECK_THROWS_AS(EqDefinition::parametric().design(std::vector<double>(3, 1.0), kFs), Error);
}
