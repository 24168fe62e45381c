#include <doctest.h>

#include <cmath>

#include "fxchain/error.hpp"
#include "fxchain/estimation.hpp"
#include "fxchain/loss.hpp"
#include "fxchain/random.hpp"
#include "support.hpp"

using namespace fxchain;

namespace {

MelConfig small_mel() {
  MelConfig m;
  m.fft_size = 512;
  m.hop = 256;
  m.mel_bands = 32;
  return m;
}

std::vector<data::DatasetRecord> toy_records(std::size_t songs, const EffectChain& chain, std::uint64_t seed) {
  data::SyntheticCorpusConfig cc;
  cc.songs = songs;
  cc.duration_s = 1.0;
  cc.seed = seed;
  const auto corpus = data::synthetic_corpus(cc, 0.2);
  const auto clips = data::extract_clips(corpus, 0.25, 3, seed);
  return data::synthesize_dataset(clips, chain, seed + 1);
}

}  // namespace

TEST_CASE("paired fit recovers a clipper setting") {
  const auto chain = EffectChain::parse("clip");
  const auto x = gen_test_signal(SignalKind::WhiteNoise, 0.5, 3).samples();
  const std::vector<double> q_true = {0.7, 0.35, 0.2};
  const auto y = chain.render(x, q_true, 44100.0);
  FitConfig cfg;
  cfg.max_steps = 400;
  const auto r = fit_paired(x, y, chain, small_mel(), cfg, 44100.0);
  CHECK(r.final_loss <= r.initial_loss);
  CHECK(r.final_loss < 0.05);
  CHECK(r.steps <= 400);
  CHECK(r.loss.size() == r.trajectory.size());
  CHECK(r.final_loss == doctest::Approx(loss_mel_l1(rms_normalize(chain.render(x, r.q, 44100.0)), rms_normalize(y), small_mel())).epsilon(1e-9));
  for (const auto& q : r.trajectory) {
    for (double v : q) CHECK((v > 0.0 && v < 1.0));
  }
}

TEST_CASE("paired fit stopping rules") {
  const auto chain = EffectChain::parse("geq");
  const auto x = gen_test_signal(SignalKind::WhiteNoise, 0.25, 4).samples();
  const auto y = chain.render(x, data::draw_q(1, 10), 44100.0);
  FitConfig cfg;
  cfg.max_steps = 30;
  const auto capped = fit_paired(x, y, chain, small_mel(), cfg, 44100.0);
  CHECK(capped.steps == 30);
  CHECK(capped.status == FitStatus::MaxSteps);
  cfg.max_steps = 1000;
  cfg.target_loss = 0.5;
  const auto early = fit_paired(x, y, chain, small_mel(), cfg, 44100.0);
  CHECK(early.status == FitStatus::Converged);
  CHECK(early.final_loss < 0.5);
  // Same inputs, same result.
  const auto again = fit_paired(x, y, chain, small_mel(), cfg, 44100.0);
  CHECK(again.q == early.q);
  CHECK_THROWS_AS(fit_paired(x, std::vector<double>(100, 0.1), chain, small_mel(), cfg, 44100.0), Error);
  CHECK_THROWS_AS(fit_paired(x, y, EffectChain::parse("peq-td"), small_mel(), cfg, 44100.0), Error);
}

TEST_CASE("objective names") {
  CHECK(parse_objective(to_string(Objective::ParamLoss)) == Objective::ParamLoss);
  CHECK(parse_objective(to_string(Objective::AudioLoss)) == Objective::AudioLoss);
  CHECK_THROWS_AS(parse_objective("nope"), Error);
  TrainConfig bad;
  bad.batch_size = 1;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("blind training on a tiny corpus") {
  const auto chain = EffectChain::parse("clip");
  const auto records = toy_records(10, chain, 21);
  EncoderConfig enc;
  enc.mel = small_mel();
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 8;
  cfg.max_epochs = 3;
  cfg.hidden_divisor = 32;
  cfg.objective = Objective::ParamLoss;
  TrainReport report;
  const auto net = train_blind(records, chain, enc, cfg, &report);
  CHECK(report.epochs.size() == 3);
  CHECK(report.best_epoch < 3);
  CHECK(net.chain_id == "clip");
  CHECK(net.clip_length == records.front().y.size());

  const auto q = predict(net, records.front().y.view());
  REQUIRE(q.size() == 3);
  for (double v : q) CHECK((v > 0.0 && v < 1.0));
  CHECK_THROWS_AS(predict(net, std::vector<double>(100, 0.1)), Error);

  const auto test = data::subset(records, data::Split::Test);
  REQUIRE_FALSE(test.empty());
  const auto rows = evaluate(net, test, chain, chain, EvalConfig{2, 5});
  REQUIRE(rows.size() == 3);
  for (const auto& r : rows) {
    CHECK(r.runs == 2);
    CHECK(std::isfinite(r.lyy));
    CHECK(r.lyy >= 0.0);
  }
  const auto rows2 = evaluate(net, test, chain, chain, EvalConfig{2, 5});
  CHECK(rows2[0].lyy == rows[0].lyy);

  CHECK_THROWS_AS(train_blind(std::span<const data::DatasetRecord>(), chain, enc, cfg), Error);
}
