#include <doctest.h>

#include <cmath>

#include "fxchain/clipper.hpp"
#include "fxchain/dynamics.hpp"
#include "fxchain/effects.hpp"
#include "fxchain/eq.hpp"
#include "fxchain/error.hpp"
#include "support.hpp"

using namespace fxchain;

namespace {

const char* kDifferentiable[] = {"peq", "geq", "comp", "comp-simple", "clip", "clip-taylor", "clip-cheb"};

}  // namespace

TEST_CASE("chain parsing and parameter layout") {
  const auto chain = EffectChain::parse("peq+comp-simple+clip");
  CHECK(chain.id() == "peq+comp-simple+clip");
  CHECK(chain.param_count() == 15 + 4 + 3);
  CHECK(chain.specs()[0].name == "peq.low_shelf.freq");
  CHECK(chain.specs()[15].name == "comp-simple.threshold");
  CHECK(chain.specs().back().name == "clip.hardness");
  CHECK(chain.differentiable());
  CHECK_FALSE(EffectChain::parse("peq-td").differentiable());
  CHECK(EffectChain::parse("geq").param_count() == 10);
  CHECK(EffectChain::parse("clip-cheb").param_count() == 24);
  CHECK(EffectChain::parse("comp").param_count() == 5);
  CHECK_THROWS_AS(EffectChain::parse("peq++clip"), Error);
  CHECK_THROWS_AS(EffectChain::parse("flanger"), Error);
  CHECK_THROWS_AS(EffectChain::parse("comp-proxy"), Error);
  const auto narrowed = EffectChain::parse("clip", {{{"clip.gain", {0.0, 6.0}}}, nullptr});
  CHECK(narrowed.specs()[0].max == 6.0);
  CHECK(narrowed.range_table_hash() != EffectChain::parse("clip").range_table_hash());
}

TEST_CASE("chain rendering composes the modules with peak normalization") {
  testing::Gen gen(71);
  const auto x = gen.normal_vec(4096, 0.2);
  const auto chain = EffectChain::parse("geq+comp-simple+clip");
  const auto q = gen.uniform_vec(chain.param_count());
  const auto y = chain.render(x, q, 44100.0);

  std::vector<double> ref = peak_normalize(x);
  std::vector<double> pg, pc, pk;
  for (std::size_t i = 0; i < 10; ++i) pg.push_back(chain.specs()[i].denormalize(q[i]));
  for (std::size_t i = 10; i < 14; ++i) pc.push_back(chain.specs()[i].denormalize(q[i]));
  for (std::size_t i = 14; i < 17; ++i) pk.push_back(chain.specs()[i].denormalize(q[i]));
  ref = eq::apply_frequency_sampled(AudioBuffer(ref, 44100), eq::EqDefinition::graphic(),
                                    ParamVector{pg, ParamKind::Denormalized}).samples();
  ref = dynamics::compress_simplified(AudioBuffer(peak_normalize(ref), 44100),
                                      dynamics::SimplifiedCompressorParams{pc[0], pc[1], pc[2], pc[3]}).samples();
  ref = clipper::clip_parametric(peak_normalize(ref), clipper::ParametricClipperParams{pk[0], pk[1], pk[2]});
  ref = peak_normalize(ref);
  CHECK(testing::max_abs_diff(y, ref) <= 1e-12);
  CHECK(peak(y) == doctest::Approx(1.0));
  CHECK_THROWS_AS(chain.render(x, std::vector<double>(3, 0.5), 44100.0), Error);
}

TEST_CASE("recorded chains reproduce rendering") {
  testing::Gen gen(72);
  const auto x = gen.normal_vec(2048, 0.3);
  for (const char* id : kDifferentiable) {
    CAPTURE(id);
    const auto chain = EffectChain::parse(id);
    const auto q = gen.uniform_vec(chain.param_count(), 0.05, 0.95);
    ad::Tape t;
    const auto y = chain.record(t.constant(x), t.variable(q), 44100.0);
    CHECK(testing::max_abs_diff(y.value(), chain.render(x, q, 44100.0)) <= 1e-10);
  }
  const auto td = EffectChain::parse("peq-td");
  ad::Tape t;
  CHECK_THROWS_AS(td.record(t.constant(x), t.variable(std::vector<double>(15, 0.5)), 44100.0), Error);
}

TEST_CASE("time-domain and frequency-sampled EQ effects agree") {
  testing::Gen gen(73);
  const auto x = gen_test_signal(SignalKind::WhiteNoise, 1.0, 4);
  const auto a = EffectChain::parse("peq"), b = EffectChain::parse("peq-td");
  for (int trial = 0; trial < 3; ++trial) {
    const auto q = gen.uniform_vec(15);
    CHECK(testing::rel_l2(a.render(x.view(), q, 44100.0), b.render(x.view(), q, 44100.0)) <= 1e-3);
  }
}

TEST_CASE("non-smooth coordinates and start points") {
  const auto clip = EffectChain::parse("clip");
  const auto flags = clip.nonsmooth(std::vector<double>{0.5, 0.5, 0.5}, 1e-3);
  CHECK(flags == std::vector<bool>{false, false, true});
  CHECK(clip.nonsmooth(std::vector<double>{0.5, 0.5, 0.7}, 1e-3) == std::vector<bool>{false, false, false});

  const auto cheb = EffectChain::parse("clip-cheb");
  const auto q0 = cheb.initial_q();
  // Linear term only: g1 = 0.5, every other coefficient zero.
  CHECK(cheb.specs()[1].denormalize(q0[1]) == doctest::Approx(0.5));
  CHECK(cheb.specs()[0].denormalize(q0[0]) == doctest::Approx(0.0).scale(1.0));
  const auto peq = EffectChain::parse("peq").initial_q();
  CHECK(peq[3] != peq[6]);
  CHECK(peq[6] != peq[9]);
  CHECK(EffectChain::parse("peq+clip-taylor").initial_q().size() == 39);
}

TEST_CASE("rendered outputs are finite and peak normalized") {
  testing::Gen gen(74);
  const auto x = gen.normal_vec(3000, 0.5);
  for (const char* id : {"peq", "peq-td", "geq", "comp", "comp-simple", "clip", "clip-taylor", "clip-cheb"}) {
    CAPTURE(id);
    const auto chain = EffectChain::parse(id);
    for (int trial = 0; trial < 10; ++trial) {
      const auto y = chain.render(x, gen.uniform_vec(chain.param_count()), 44100.0);
      bool finite = true;
      for (double v : y) finite = finite && std::isfinite(v);
      CHECK(finite);
      CHECK(peak(y) <= 1.0 + 1e-12);
    }
  }
}
