#include <doctest.h>

#include <cmath>
#include <functional>
#include <string>

#include "fxchain/autodiff.hpp"
#include "fxchain/error.hpp"
#include "support.hpp"

using namespace fxchain;
using ad::Tape;
using ad::Var;

namespace {

// Plain central differences, independent of the library's checker.
std::vector<double> numeric_gradient(const std::function<Var(Tape&, Var)>& f, std::vector<double> q, double h) {
  std::vector<double> g(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double c = q[i];
    q[i] = c + h;
    Tape tp;
    const double up = f(tp, tp.variable(q)).item();
    q[i] = c - h;
    Tape tm;
    const double dn = f(tm, tm.variable(q)).item();
    q[i] = c;
    g[i] = (up - dn) / (2 * h);
  }
  return g;
}

void check_gradient(const std::string& label, const std::function<Var(Tape&, Var)>& f, const std::vector<double>& q,
                    double tol = 1e-6) {
  CAPTURE(label);
  const auto analytic = ad::gradient(f, q);
  const auto numeric = numeric_gradient(f, q, 1e-6);
  REQUIRE(analytic.size() == numeric.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    CAPTURE(i);
    CHECK(std::abs(analytic[i] - numeric[i]) <= tol * std::max({1.0, std::abs(analytic[i]), std::abs(numeric[i])}));
  }
}

}  // namespace

TEST_CASE("values of elementary primitives") {
  Tape t;
  const Var a = t.variable({1.0, 2.0, 3.0});
  const Var b = t.constant(2.0);
  CHECK((a + b).value() == std::vector<double>{3.0, 4.0, 5.0});
  CHECK((a * b).value() == std::vector<double>{2.0, 4.0, 6.0});
  CHECK(ad::sum(a).item() == 6.0);
  CHECK(ad::mean(a).item() == 2.0);
  CHECK(ad::slice(a, 1, 2).value() == std::vector<double>{2.0, 3.0});
  const Var parts[] = {a, b};
  CHECK(ad::concat(parts).value() == std::vector<double>{1.0, 2.0, 3.0, 2.0});
  CHECK(ad::l1_mean(a, t.constant({0.0, 0.0, 6.0})).item() == doctest::Approx(2.0));
  CHECK(ad::mse(a, t.constant({0.0, 0.0, 0.0})).item() == doctest::Approx(14.0 / 3.0));
  // (1+2i)(3+4i) = -5 + 10i
  CHECK(ad::cmul(t.constant({1.0, 2.0}), t.constant({3.0, 4.0})).value() == std::vector<double>{-5.0, 10.0});
  CHECK(ad::cabs(t.constant({3.0, 4.0})).item() == 5.0);
  CHECK(ad::abs_floor(t.constant({-0.5, 1e-9}), 1e-3).value() == std::vector<double>{0.5, 1e-3});
}

TEST_CASE("unary primitive gradients") {
  testing::Gen gen(21);
  const auto q = gen.uniform_vec(7, 0.2, 1.5);
  check_gradient("exp", [](Tape&, Var v) { return ad::sum(ad::exp(v)); }, q);
  check_gradient("log", [](Tape&, Var v) { return ad::sum(ad::log(v)); }, q);
  check_gradient("sin", [](Tape&, Var v) { return ad::sum(ad::sin(v)); }, q);
  check_gradient("cos", [](Tape&, Var v) { return ad::sum(ad::cos(v)); }, q);
  check_gradient("sqrt", [](Tape&, Var v) { return ad::sum(ad::sqrt(v)); }, q);
  check_gradient("tanh", [](Tape&, Var v) { return ad::sum(ad::tanh(v)); }, q);
  check_gradient("sigmoid", [](Tape&, Var v) { return ad::sum(ad::sigmoid(v)); }, q);
  check_gradient("square", [](Tape&, Var v) { return ad::sum(ad::square(v)); }, q);
  check_gradient("reciprocal", [](Tape&, Var v) { return ad::sum(ad::reciprocal(v)); }, q);
  check_gradient("abs", [](Tape&, Var v) { return ad::sum(ad::abs(v - 0.8)); }, q);
  check_gradient("abs_floor", [](Tape&, Var v) { return ad::sum(ad::abs_floor(v - 0.8, 0.05)); }, q);
}

TEST_CASE("binary primitives broadcast and differentiate") {
  testing::Gen gen(22);
  const auto q = gen.uniform_vec(6, 0.5, 2.0);
  auto split = [](Var v) { return std::pair{ad::slice(v, 0, 3), ad::slice(v, 3, 3)}; };
  check_gradient("add", [&](Tape&, Var v) { auto [a, b] = split(v); return ad::sum(ad::square(a + b)); }, q);
  check_gradient("sub", [&](Tape&, Var v) { auto [a, b] = split(v); return ad::sum(ad::square(a - b)); }, q);
  check_gradient("mul", [&](Tape&, Var v) { auto [a, b] = split(v); return ad::sum(a * b); }, q);
  check_gradient("div", [&](Tape&, Var v) { auto [a, b] = split(v); return ad::sum(a / b); }, q);
  check_gradient("broadcast", [](Tape&, Var v) { return ad::sum(ad::element(v, 0) * v); }, q);
  check_gradient("affine", [](Tape&, Var v) { return ad::sum(ad::square(3.0 - v * 2.0)); }, q);
}

TEST_CASE("spectral primitive gradients") {
  testing::Gen gen(23);
  const auto q = gen.normal_vec(40);
  const auto w = gen.normal_vec(80);
  check_gradient("rfft", [&](Tape& t, Var v) { return ad::sum(ad::rfft(v, 64) * t.constant(std::vector<double>(w.begin(), w.begin() + 66))); }, q);
  check_gradient("irfft", [&](Tape& t, Var v) { return ad::sum(ad::irfft(ad::rfft(v, 64), 64, 50) * t.constant(std::vector<double>(w.begin(), w.begin() + 50))); }, q);
  check_gradient("cabs", [](Tape&, Var v) { return ad::sum(ad::cabs(ad::rfft(v, 64))); }, q);
  check_gradient("cmul", [](Tape&, Var v) { return ad::sum(ad::cmul(ad::slice(v, 0, 20), ad::slice(v, 20, 20))); }, q);
  check_gradient("stft", [](Tape&, Var v) { return ad::sum(ad::cabs(ad::stft(v, 16, 8))); }, q);
  check_gradient("peak_normalize", [&](Tape& t, Var v) { return ad::sum(ad::peak_normalize(v) * t.constant(std::vector<double>(w.begin(), w.begin() + 40))); }, q);
  check_gradient("rms_normalize", [&](Tape& t, Var v) { return ad::sum(ad::rms_normalize(v) * t.constant(std::vector<double>(w.begin(), w.begin() + 40))); }, q);
  check_gradient("l1_mean", [&](Tape& t, Var v) { return ad::l1_mean(v, t.constant(std::vector<double>(w.begin(), w.begin() + 40))); }, q);
  check_gradient("mse", [&](Tape& t, Var v) { return ad::mse(v, t.constant(std::vector<double>(w.begin(), w.begin() + 40))); }, q);
}

TEST_CASE("vjp with a vector cotangent and several leaves") {
  Tape t;
  const Var a = t.variable({1.0, 2.0});
  const Var b = t.variable({3.0, 5.0});
  const Var c = t.constant({7.0, 11.0});
  const Var out = a * b + c;
  const Var wrt[] = {a, b, c};
  const std::vector<double> cot = {1.0, -1.0};
  const auto g = t.vjp(out, cot, wrt);
  CHECK(g[0] == std::vector<double>{3.0, -5.0});
  CHECK(g[1] == std::vector<double>{1.0, -2.0});
  CHECK(g[2] == std::vector<double>{0.0, 0.0});
  CHECK_FALSE(c.requires_grad());
  CHECK(out.requires_grad());
}

TEST_CASE("registry behaviour") {
  const auto& builtin = ad::PrimitiveRegistry::builtin();
  for (const char* op : {"add", "mul", "rfft", "irfft", "stft", "cabs", "mel_project", "biquad_response",
                         "gain_computer", "smooth_branching", "polyval", "chebval", "denormalize", "proxy_gain"}) {
    CAPTURE(op);
    CHECK(builtin.contains(op));
  }

  ad::PrimitiveRegistry empty;
  Tape t(empty);
  const Var a = t.variable({1.0});
  const Var y = ad::exp(a);
  try {
    t.gradient(y, a);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnregisteredPrimitive);
  }

  ad::PrimitiveRegistry broken = builtin;
  broken.corrupt("exp", 2.0);
  const std::vector<double> q = {0.3};
  auto f = [](Tape&, Var v) { return ad::sum(ad::exp(v)); };
  CHECK(ad::gradient(f, q, broken)[0] == doctest::Approx(2.0 * std::exp(0.3)));
  CHECK(ad::gradient(f, q)[0] == doctest::Approx(std::exp(0.3)));
}

TEST_CASE("random compositions match finite differences") {
  testing::Gen gen(24);
  for (int trial = 0; trial < 30; ++trial) {
    const auto q = gen.uniform_vec(5, 0.3, 1.2);
    const int pick = static_cast<int>(gen.index(3));
    check_gradient("composition " + std::to_string(trial), [pick](Tape&, Var v) {
      Var h = ad::tanh(v * v + 0.3);
      if (pick == 0) h = ad::exp(h) / (v + 1.0);
      if (pick == 1) h = ad::log(ad::sqrt(h + 2.0)) * ad::sin(v);
      if (pick == 2) h = ad::sigmoid(h - v) * ad::element(v, 2);
      return ad::mean(h);
    }, q);
  }
}
