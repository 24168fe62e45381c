#pragma once

// The work behind each CLI subcommand. Every command validates the config,
// writes its artifacts under cfg.out and returns the report it wrote. Reports
// carry the config, the derived seeds and the library version, and nothing
// that varies between runs.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "fxchain/autodiff.hpp"
#include "fxchain/config.hpp"
#include "fxchain/estimation.hpp"

namespace fxchain::cli {

std::string version();

struct Seeds {
  std::uint64_t data = 0;
  std::uint64_t train = 0;
  std::uint64_t eval = 0;
  std::uint64_t gradcheck = 0;
  std::uint64_t proxy = 0;
};
Seeds derive_seeds(std::uint64_t master);

// Process exit code for an exception escaping a command: 2 config or
// validation, 3 I/O, 4 numerical failure, 1 anything else.
int exit_code(const std::exception& e);

// Parses a chain spec with the configured ranges; loads the proxy checkpoint
// when the spec uses comp-proxy.
EffectChain make_chain(const std::string& spec, const ExperimentConfig& cfg);

// Writes `songs` synthetic songs to dir as 32-bit float WAVs.
void generate_corpus(const std::filesystem::path& dir, std::size_t songs, const ExperimentConfig& cfg);

// Clips from cfg.corpus rendered through chain_s; writes manifest.json and,
// with data.write_audio, audio/<index>_{x,y}.wav.
nlohmann::json cmd_synth(const ExperimentConfig& cfg);

// Fits chain_a to the pair (x, y); writes fit.json. Throws
// Errc::NonFiniteLoss after writing the report when the fit diverged.
nlohmann::json cmd_fit(const ExperimentConfig& cfg, const std::filesystem::path& x_wav,
                       const std::filesystem::path& y_wav);

// Trains on the records of manifest.json; writes model.fxck and train.json.
nlohmann::json cmd_train(const ExperimentConfig& cfg);

// Evaluates model.fxck on the test records; writes eval.json and eval.csv.
nlohmann::json cmd_eval(const ExperimentConfig& cfg);

struct GradCheckRow {
  std::string target;
  std::size_t draws = 0;
  std::size_t checked = 0;
  std::size_t excluded = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

// One row per configured effect, plus the Mel-L1 loss with respect to audio
// samples and the parameter mapping.
std::vector<GradCheckRow> gradcheck_rows(const ExperimentConfig& cfg,
                                         const ad::PrimitiveRegistry& registry = ad::PrimitiveRegistry::builtin());

// Writes gradcheck.json and gradcheck.csv. corrupt names a primitive whose
// backward rule is scaled before checking (negative control).
nlohmann::json cmd_gradcheck(const ExperimentConfig& cfg, const std::string& corrupt = {});

// Trains the compressor proxy on cfg.corpus; writes proxy.fxck and proxy.json.
nlohmann::json cmd_proxy_train(const ExperimentConfig& cfg);

// implementation,encoder,Myy,Lyy,Mqq,runs,stddev
std::string metrics_csv(const std::vector<MetricRow>& rows);

}  // namespace fxchain::cli
