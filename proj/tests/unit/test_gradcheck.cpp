#include <doctest.h>

#include <cmath>

#include "fxchain/error.hpp"
#include "fxchain/gradcheck.hpp"
#include "support.hpp"

using namespace fxchain;

namespace {

MelConfig test_mel() {
  MelConfig m;
  m.fft_size = 512;
  m.hop = 256;
  m.mel_bands = 32;
  return m;
}

}  // namespace

TEST_CASE("relative error") {
  CHECK(relative_error(1.0, 1.0) == 0.0);
  CHECK(relative_error(2.0, 1.0) == 0.5);
  CHECK(relative_error(0.0, 0.0) == 0.0);
  CHECK(relative_error(1e-10, 0.0) == doctest::Approx(1e-2));
}

TEST_CASE("checker on a smooth function") {
  auto f = [](ad::Tape&, ad::Var v) { return ad::sum(ad::sin(v) * ad::exp(v)); };
  const std::vector<double> p = {0.1, -0.4, 1.3};
  const auto r = grad_check(f, p, 1e-5);
  REQUIRE(r.entries.size() == 3);
  CHECK(r.passed(1e-6));
  for (const auto& e : r.entries) {
    const double x = p[e.index];
    CHECK(e.analytic == doctest::Approx(std::exp(x) * (std::sin(x) + std::cos(x))));
  }
  const std::size_t only[] = {1};
  CHECK(grad_check(f, p, 1e-5, only).entries.size() == 1);
}

TEST_CASE("kinks are detected and avoided") {
  ad::Tape t;
  const auto v = t.variable({0.3, -0.2});
  (void)ad::abs(v);
  const auto k = kink_arguments(t);
  CHECK(k == std::vector<double>{0.3, -0.2});

  // |x| evaluated 1e-7 from its kink: a step of 1e-5 straddles it.
  auto f = [](ad::Tape&, ad::Var w) { return ad::sum(ad::abs(w)); };
  const std::vector<double> p = {1e-7, 0.5};
  const auto r = grad_check(f, p, 1e-5);
  CHECK(r.entries[0].step < 1e-5);
  CHECK(r.passed(1e-6));
  const std::vector<double> at_kink = {0.0, 0.5};
  const auto r2 = grad_check(f, at_kink, 1e-5);
  CHECK(r2.entries[0].excluded);
  CHECK(r2.excluded == 1);
}

TEST_CASE("every analysis effect passes on noise") {
  testing::Gen gen(81);
  const auto mel = test_mel();
  const auto x = gen_test_signal(SignalKind::WhiteNoise, 0.25, 5).samples();
  for (const char* id : {"peq", "geq", "comp-simple", "clip", "clip-taylor", "clip-cheb"}) {
    CAPTURE(id);
    const auto chain = EffectChain::parse(id);
    for (int draw = 0; draw < 3; ++draw) {
      const auto target = chain.render(x, gen.uniform_vec(chain.param_count(), 0.02, 0.98), 44100.0);
      const auto q = gen.uniform_vec(chain.param_count(), 0.02, 0.98);
      const auto r = grad_check(chain, x, target, q, 1e-5, mel, 44100.0);
      CHECK(r.max_rel_error < 1e-3);
      CHECK(r.excluded < r.entries.size());
    }
  }
}

TEST_CASE("a corrupted backward rule is caught") {
  testing::Gen gen(82);
  const auto mel = test_mel();
  const auto x = gen_test_signal(SignalKind::WhiteNoise, 0.25, 6).samples();
  const auto chain = EffectChain::parse("clip");
  const auto target = chain.render(x, gen.uniform_vec(3, 0.1, 0.9), 44100.0);
  const auto q = gen.uniform_vec(3, 0.1, 0.9);
  ad::PrimitiveRegistry broken = ad::PrimitiveRegistry::builtin();
  broken.corrupt("denormalize", 1.5);
  const auto r = grad_check(chain, x, target, q, 1e-5, mel, 44100.0, broken);
  CHECK(r.max_rel_error > 0.1);
  CHECK_FALSE(r.passed(1e-3));
}

TEST_CASE("argument validation") {
  const auto chain = EffectChain::parse("clip");
  const std::vector<double> x(12000, 0.1);
  const std::vector<double> q = {0.5, 0.5, 0.3};
  CHECK_THROWS_AS(grad_check(chain, x, x, q, 1e-7, test_mel(), 44100.0), Error);
  CHECK_THROWS_AS(grad_check(chain, x, x, q, 0.1, test_mel(), 44100.0), Error);
  const std::vector<double> edge = {0.0, 0.5, 0.3};
  CHECK_THROWS_AS(grad_check(chain, x, x, edge, 1e-5, test_mel(), 44100.0), Error);
}
