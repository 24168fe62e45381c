#include <doctest.h>

#include <cmath>

#include "fxchain/autodiff.hpp"
#include "fxchain/error.hpp"
#include "fxchain/params.hpp"
#include "support.hpp"

using namespace fxchain;

namespace {

const char* kIds[] = {"peq", "peq-td", "geq", "comp", "comp-simple", "comp-proxy", "clip", "clip-taylor", "clip-cheb"};

}  // namespace

TEST_CASE("linear and logarithmic mappings") {
  const ParamSpec lin{"gain", -12.0, 12.0, Scale::Linear, "dB"};
  CHECK(lin.denormalize(0.0) == -12.0);
  CHECK(lin.denormalize(1.0) == 12.0);
  CHECK(lin.denormalize(0.5) == doctest::Approx(0.0));
  CHECK(lin.normalize(6.0) == doctest::Approx(0.75));

  const ParamSpec freq{"freq", 20.0, 20000.0, Scale::Logarithmic, "Hz"};
  CHECK(freq.denormalize(0.0) == 20.0);
  CHECK(freq.denormalize(1.0) == 20000.0);
  // Geometric midpoint.
  CHECK(freq.denormalize(0.5) == doctest::Approx(std::sqrt(20.0 * 20000.0)).epsilon(1e-12));
  CHECK(freq.normalize(200.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("invalid specs are rejected") {
  CHECK_THROWS_AS((ParamSpec{"x", 1.0, 1.0}.validate()), Error);
  CHECK_THROWS_AS((ParamSpec{"x", 0.0, 1.0, Scale::Logarithmic}.validate()), Error);
  CHECK_THROWS_AS(default_specs("reverb"), Error);
  CHECK_THROWS_AS(specs_for("clip", {{"clip.nope", {0.0, 1.0}}}), Error);
  CHECK_THROWS_AS(specs_for("clip", {{"clip.gain", {3.0, 1.0}}}), Error);
}

TEST_CASE("range overrides") {
  const auto specs = specs_for("clip", {{"clip.gain", {0.0, 12.0}}, {"peq.peak1.q", {1.0, 2.0}}});
  CHECK(specs[0].max == 12.0);
  CHECK(range_table_hash(specs) != range_table_hash(default_specs("clip")));
  CHECK(range_table_hash(default_specs("clip")) == range_table_hash(default_specs("clip")));
  CHECK(range_table_hash(specs).size() == 16);
}

TEST_CASE("parameter round trip over every default table") {
  testing::Gen gen(11);
  for (const char* id : kIds) {
    CAPTURE(id);
    const auto specs = default_specs(id);
    for (int trial = 0; trial < 200; ++trial) {
      ParamVector q{gen.uniform_vec(specs.size()), ParamKind::Normalized};
      if (trial == 0) q.values.assign(specs.size(), 0.0);
      if (trial == 1) q.values.assign(specs.size(), 1.0);
      const auto p = denormalize(q, specs);
      CHECK(p.kind == ParamKind::Denormalized);
      for (std::size_t c = 0; c < specs.size(); ++c) {
        CHECK(p[c] >= specs[c].min);
        CHECK(p[c] <= specs[c].max);
      }
      const auto back = normalize(p, specs);
      CHECK(testing::max_abs_diff(back.values, q.values) <= 1e-12);
    }
  }
}

TEST_CASE("out of range and mismatched vectors") {
  const auto specs = default_specs("clip");
  try {
    denormalize(ParamVector{{0.5, 1.5, 0.5}, ParamKind::Normalized}, specs);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::OutOfRange);
  }
  try {
    denormalize(ParamVector{{0.5, 0.5}, ParamKind::Normalized}, specs);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::LengthMismatch);
  }
  CHECK_THROWS_AS(normalize(ParamVector{{30.0, 0.0, 1.0}, ParamKind::Denormalized}, specs), Error);
  CHECK_THROWS_AS(normalize(ParamVector{{1.0, 0.0, 1.0}, ParamKind::Normalized}, specs), Error);
}

TEST_CASE("differentiable mapping matches its derivative") {
  testing::Gen gen(12);
  for (const char* id : kIds) {
    const auto specs = default_specs(id);
    const auto q = gen.uniform_vec(specs.size(), 0.05, 0.95);
    const auto w = gen.normal_vec(specs.size());
    auto loss = [&](ad::Tape& t, ad::Var v) { return ad::sum(denormalize(v, specs) * t.constant(w)); };
    const auto g = ad::gradient(loss, q);
    for (std::size_t c = 0; c < specs.size(); ++c) {
      const auto& s = specs[c];
      const double h = 1e-6;
      const double fd = w[c] * (s.denormalize(q[c] + h) - s.denormalize(q[c] - h)) / (2 * h);
      CHECK(g[c] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}
