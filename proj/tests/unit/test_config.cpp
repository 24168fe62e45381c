#include <doctest.h>

#include <fstream>

#include "fxchain/config.hpp"
#include "fxchain/error.hpp"
#include "support.hpp"

using namespace fxchain;

namespace {

Errc code_of(const nlohmann::json& j) {
  try {
    config_from_json(j);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::Io;
}

}  // namespace

TEST_CASE("defaults round trip through JSON") {
  const ExperimentConfig def;
  const auto j = to_json(def);
  const auto back = config_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(back.chain_a == "peq+comp-simple+clip");
  CHECK(back.mel == MelConfig{});
  CHECK(config_from_json(nlohmann::json::object()).chain_s == def.chain_s);
}

TEST_CASE("values are read and validated") {
  const auto c = config_from_json(nlohmann::json::parse(R"({
    "chain_a": "clip", "seed": 17, "ranges": {"clip.gain": [0, 12]},
    "mel": {"fft_size": 1024, "hop": 256, "mel_bands": 64},
    "train": {"objective": "param", "max_epochs": 5},
    "fit": {"learning_rate": 0.1}
  })"));
  CHECK(c.chain_a == "clip");
  CHECK(c.seed == 17);
  CHECK(c.ranges.at("clip.gain") == std::pair{0.0, 12.0});
  CHECK(c.mel.fft_size == 1024);
  CHECK(c.train.objective == Objective::ParamLoss);
  CHECK(c.train.max_epochs == 5);
  CHECK(c.fit.learning_rate == 0.1);
}

TEST_CASE("bad configs are rejected") {
  CHECK(code_of({{"chian_a", "clip"}}) == Errc::Config);
  CHECK(code_of({{"train", {{"epochs", 3}}}}) == Errc::Config);
  CHECK(code_of({{"seed", "seven"}}) == Errc::Config);
  CHECK(code_of({{"threads", 0}}) == Errc::Config);
  CHECK(code_of({{"mel", {{"hop", 0}}}}) == Errc::Config);
  CHECK(code_of({{"ranges", {{"clip.gain", {1}}}}}) == Errc::Config);
  CHECK(code_of({{"gradcheck", {{"eps", 0.5}}}}) == Errc::Config);
  CHECK(code_of({{"data", {{"test_fraction", 1.0}}}}) == Errc::Config);
}

TEST_CASE("overrides") {
  ExperimentConfig c;
  apply_override(c, "train.max_epochs=7");
  apply_override(c, "chain_a=clip");
  apply_override(c, "data.write_audio=true");
  apply_override(c, "fit.learning_rate=0.2");
  CHECK(c.train.max_epochs == 7);
  CHECK(c.chain_a == "clip");
  CHECK(c.data.write_audio);
  CHECK(c.fit.learning_rate == 0.2);
  CHECK_THROWS_AS(apply_override(c, "train.nope=1"), Error);
  CHECK_THROWS_AS(apply_override(c, "=1"), Error);
  CHECK_THROWS_AS(apply_override(c, "threads=0"), Error);
}

TEST_CASE("config files") {
  const auto dir = testing::fresh_dir("config");
  std::ofstream(dir / "ok.json") << R"({"seed": 3})";
  std::ofstream(dir / "bad.json") << "{ not json";
  CHECK(load_config(dir / "ok.json").seed == 3);
  try {
    load_config(dir / "bad.json");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::Config);
  }
  try {
    load_config(dir / "missing.json");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::Io);
  }
}

TEST_CASE("spec and Mel JSON") {
  const ParamSpec s{"peak1.freq", 100.0, 10000.0, Scale::Logarithmic, "Hz"};
  CHECK(spec_from_json(to_json(s)) == s);
  MelConfig m;
  m.mel_bands = 40;
  CHECK(mel_from_json(to_json(m)) == m);
}
