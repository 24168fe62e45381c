#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "fxchain/commands.hpp"
#include "fxchain/error.hpp"
#include "fxchain/wav.hpp"
#include "support.hpp"

using namespace fxchain;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(FXCHAIN_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Small settings shared by the CLI runs below.
const char* kSmall =
    " --set data.duration_s=0.25 --set data.clips_per_song=2 --set data.synthetic_song_s=1"
    " --set chain_s=clip --set chain_a=clip";

}  // namespace

TEST_CASE("exit code mapping") {
  CHECK(cli::exit_code(Error(Errc::Config, "x")) == 2);
  CHECK(cli::exit_code(Error(Errc::InvalidArgument, "x")) == 2);
  CHECK(cli::exit_code(Error(Errc::Io, "x")) == 3);
  CHECK(cli::exit_code(Error(Errc::CorruptHeader, "x")) == 3);
  CHECK(cli::exit_code(Error(Errc::NonFiniteLoss, "x")) == 4);
  CHECK(cli::exit_code(std::runtime_error("x")) == 1);
}

TEST_CASE("derived seeds differ per purpose and follow the master seed") {
  const auto a = cli::derive_seeds(1), b = cli::derive_seeds(1), c = cli::derive_seeds(2);
  CHECK(a.data == b.data);
  CHECK(a.data != a.train);
  CHECK(a.train != a.eval);
  CHECK(a.eval != a.gradcheck);
  CHECK(a.data != c.data);
  CHECK_FALSE(cli::version().empty());
}

TEST_CASE("metrics CSV") {
  const std::vector<MetricRow> rows = {{"clip", "mel", 0.5, 0.25, 0.125, 3, 0.01}};
  CHECK(cli::metrics_csv(rows) == "implementation,encoder,Myy,Lyy,Mqq,runs,stddev\nclip,mel,0.5,0.25,0.125,3,0.01\n");
}

TEST_CASE("CLI exit codes") {
  const auto dir = testing::fresh_dir("cli_codes");
  CHECK(run("") == 2);
  CHECK(run("bogus") == 2);
  CHECK(run("synth --no-such-flag") == 2);
  CHECK(run("--config " + (dir / "missing.json").string() + " synth") == 3);
  std::ofstream(dir / "bad.json") << R"({"unknown_key": 1})";
  CHECK(run("--config " + (dir / "bad.json").string() + " synth") == 2);
  CHECK(run("--out " + (dir / "o").string() + " --corpus " + (dir / "nowhere").string() + " synth") == 3);
  CHECK(run("--out " + (dir / "o").string() + " --set threads=0 synth") == 2);
  CHECK(run("--out " + (dir / "o").string() + " fit " + (dir / "x.wav").string() + " " + (dir / "y.wav").string()) == 3);
  CHECK(run("--out " + (dir / "empty").string() + " train") == 3);
}

TEST_CASE("CLI synth is reproducible and fit reads WAV pairs") {
  const auto dir = testing::fresh_dir("cli_synth");
  const std::string base = std::string(kSmall) + " --seed 5 --corpus " + (dir / "corpus").string();
  REQUIRE(run(base + " --out " + (dir / "a").string() + " synth --generate-corpus 4") == 0);
  const auto ma = slurp(dir / "a" / "manifest.json");
  CHECK_FALSE(ma.empty());
  REQUIRE(run(base + " --out " + (dir / "a").string() + " synth") == 0);
  CHECK(ma == slurp(dir / "a" / "manifest.json"));
  const auto m = nlohmann::json::parse(ma);
  CHECK(m.at("records").size() == 8);

  REQUIRE(run(std::string(kSmall) + " --seed 6 --corpus " + (dir / "corpus").string() + " --out " +
              (dir / "c").string() + " synth") == 0);
  CHECK(slurp(dir / "c" / "manifest.json") != ma);

  const auto x = gen_test_signal(SignalKind::WhiteNoise, 0.25, 1);
  const auto y = EffectChain::parse("clip").render(x, ParamVector{{0.6, 0.5, 0.3}});
  wav::save_wav(dir / "x.wav", x);
  wav::save_wav(dir / "y.wav", y);
  REQUIRE(run(std::string(kSmall) + " --set fit.max_steps=50 --out " + (dir / "fit").string() + " fit " +
              (dir / "x.wav").string() + " " + (dir / "y.wav").string()) == 0);
  const auto fit = nlohmann::json::parse(slurp(dir / "fit" / "fit.json"));
  CHECK(fit.at("q_hat").size() == 3);
  CHECK(fit.at("final_loss").get<double>() <= fit.at("initial_loss").get<double>());
  wav::save_wav(dir / "short.wav", AudioBuffer(std::vector<double>(100, 0.1), 44100));
  CHECK(run(std::string(kSmall) + " --out " + (dir / "fit2").string() + " fit " + (dir / "x.wav").string() + " " +
            (dir / "short.wav").string()) == 2);
}

TEST_CASE("gradcheck command flags a corrupted rule") {
  const auto dir = testing::fresh_dir("cli_gradcheck");
  const std::string base = " --set gradcheck.draws=1 --set gradcheck.effects=[\\\"clip\\\"] --out " + dir.string();
  CHECK(run(base + " gradcheck") == 0);
  const auto ok = nlohmann::json::parse(slurp(dir / "gradcheck.json"));
  CHECK(ok.at("passed").get<bool>());
  CHECK(run(base + " gradcheck --corrupt denormalize") == 1);
  const auto bad = nlohmann::json::parse(slurp(dir / "gradcheck.json"));
  CHECK_FALSE(bad.at("passed").get<bool>());
  CHECK(slurp(dir / "gradcheck.csv").rfind("target,draws,checked,excluded,max_rel_error,status\n", 0) == 0);
}
