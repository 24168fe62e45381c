#pragma once

// Experiment configuration: one JSON document, validated before any run and
// embedded verbatim in every report. Unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "fxchain/encoder.hpp"
#include "fxchain/estimation.hpp"
#include "fxchain/mel.hpp"
#include "fxchain/params.hpp"
#include "fxchain/proxy.hpp"

namespace fxchain {

struct DataConfig {
  double duration_s = 10.0;
  std::size_t clips_per_song = 5;
  double test_fraction = 0.15;
  // Songs written by `synth --generate-corpus` when the corpus is synthetic.
  std::size_t synthetic_songs = 40;
  double synthetic_song_s = 30.0;
  bool write_audio = false;
};

struct GradCheckConfig {
  std::vector<std::string> effects = {"peq", "geq", "comp-simple", "clip", "clip-taylor", "clip-cheb"};
  std::size_t draws = 20;
  double eps = 1e-5;
  double duration_s = 0.25;
  double tolerance = 1e-3;
};

struct ExperimentConfig {
  std::string chain_s = "peq-td+comp+clip";
  std::string chain_a = "peq+comp-simple+clip";
  RangeOverrides ranges;
  MelConfig mel;
  bool waveform_stats = false;
  TrainConfig train;
  FitConfig fit;
  EvalConfig eval;
  DataConfig data;
  GradCheckConfig gradcheck;
  proxy::ProxyConfig proxy;
  proxy::ProxyTrainConfig proxy_train;
  std::string proxy_checkpoint;  // used by comp-proxy
  std::string corpus;
  std::string out = "out";
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  EncoderConfig encoder() const { return {mel, waveform_stats, 16}; }
  // Throws Errc::Config.
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
// Missing keys keep their defaults. Throws Errc::Config.
ExperimentConfig config_from_json(const nlohmann::json& j);
// Throws Errc::Io when unreadable, Errc::Config when invalid.
ExperimentConfig load_config(const std::filesystem::path& path);
// "a.b.c=value" where value is JSON (bare words are taken as strings).
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

nlohmann::json to_json(const MelConfig& m);
MelConfig mel_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ParamSpec& s);
ParamSpec spec_from_json(const nlohmann::json& j);

}  // namespace fxchain
