// fxchain: synthesize datasets, fit and train effect-chain estimators, and
// verify gradients.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "fxchain/commands.hpp"
#include "fxchain/config.hpp"
#include "fxchain/error.hpp"

namespace fs = std::filesystem;
using namespace fxchain;

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("fxchain");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("FXCHAIN_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to off; only accept real ones.
    if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
  }
}

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::string> out;
  std::optional<std::string> corpus;
  std::vector<std::string> overrides;
};

ExperimentConfig resolve(const Globals& g) {
  ExperimentConfig cfg = g.config.empty() ? ExperimentConfig{} : load_config(g.config);
  for (const auto& o : g.overrides) apply_override(cfg, o);
  if (g.seed) cfg.seed = *g.seed;
  if (g.threads) cfg.threads = *g.threads;
  if (g.out) cfg.out = *g.out;
  if (g.corpus) cfg.corpus = *g.corpus;
  cfg.validate();
  return cfg;
}

void print_rows(const nlohmann::json& rows, const std::vector<std::string>& keys) {
  for (const auto& r : rows) {
    std::string line;
    for (const auto& k : keys) {
      if (!line.empty()) line += "  ";
      line += r.at(k).is_string() ? r.at(k).get<std::string>() : r.at(k).dump();
    }
    std::cout << line << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Differentiable audio effect chains: synthesis, estimation and gradient checks"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "JSON experiment config");
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--threads", g.threads, "Worker threads");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--corpus", g.corpus, "Song corpus directory");
  app.add_option("--set", g.overrides, "Config override key.path=value (repeatable)");

  auto* synth = app.add_subcommand("synth", "Render a dataset manifest from a song corpus");
  std::size_t generate = 0;
  synth->add_option("--generate-corpus", generate, "First write this many synthetic songs to the corpus directory");

  auto* fit = app.add_subcommand("fit", "Fit chain_a to a dry/wet pair");
  std::string x_wav, y_wav;
  fit->add_option("x", x_wav, "Dry WAV")->required();
  fit->add_option("y", y_wav, "Wet WAV")->required();

  auto* train = app.add_subcommand("train", "Train the analysis network on the manifest");
  auto* eval = app.add_subcommand("eval", "Evaluate the trained network on the test split");
  auto* gradcheck = app.add_subcommand("gradcheck", "Compare tape gradients with central differences");
  std::string corrupt;
  gradcheck->add_option("--corrupt", corrupt, "Scale one backward rule (negative control)")->group("");
  auto* proxy = app.add_subcommand("proxy-train", "Train the neural compressor proxy");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    ExperimentConfig cfg = resolve(g);
    spdlog::debug("config: {}", to_json(cfg).dump());

    if (synth->parsed()) {
      if (generate > 0) {
        if (cfg.corpus.empty()) cfg.corpus = (fs::path(cfg.out) / "corpus").string();
        spdlog::info("writing {} synthetic songs to {}", generate, cfg.corpus);
        cli::generate_corpus(cfg.corpus, generate, cfg);
      }
      const auto summary = cli::cmd_synth(cfg);
      std::cout << summary.dump(2) << "\n";
      spdlog::info("manifest written to {}", (fs::path(cfg.out) / "manifest.json").string());
    } else if (fit->parsed()) {
      const auto r = cli::cmd_fit(cfg, x_wav, y_wav);
      std::cout << "status " << r["status"].get<std::string>() << ", steps " << r["steps"] << ", loss "
                << r["initial_loss"] << " -> " << r["final_loss"] << "\n";
      for (const auto& [k, v] : r["p_hat"].items()) std::cout << "  " << k << " = " << v << "\n";
    } else if (train->parsed()) {
      const auto r = cli::cmd_train(cfg);
      std::cout << "best epoch " << r["best_epoch"] << ", validation " << r["best_validation"] << "\n";
    } else if (eval->parsed()) {
      const auto r = cli::cmd_eval(cfg);
      std::cout << "implementation  encoder  Myy  Lyy  Mqq  runs  stddev\n";
      print_rows(r["rows"], {"implementation", "encoder", "Myy", "Lyy", "Mqq", "runs", "stddev"});
    } else if (gradcheck->parsed()) {
      const auto r = cli::cmd_gradcheck(cfg, corrupt);
      std::cout << "target  draws  checked  excluded  max_rel_error  status\n";
      print_rows(r["rows"], {"target", "draws", "checked", "excluded", "max_rel_error", "status"});
      if (!r["passed"].get<bool>()) return 1;
    } else if (proxy->parsed()) {
      const auto r = cli::cmd_proxy_train(cfg);
      std::cout << "receptive field " << r["receptive_field"] << " samples, held-out MAE " << r["baseline_mae"]
                << " (untrained) -> " << r["trained_mae"] << "\n";
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return cli::exit_code(e);
  }
  return 0;
}
