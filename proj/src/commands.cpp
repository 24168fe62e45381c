#include "fxchain/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "fxchain/checkpoint.hpp"
#include "fxchain/dataset.hpp"
#include "fxchain/error.hpp"
#include "fxchain/gradcheck.hpp"
#include "fxchain/loss.hpp"
#include "fxchain/parallel.hpp"
#include "fxchain/random.hpp"
#include "fxchain/wav.hpp"

#ifndef FXCHAIN_VERSION
#define FXCHAIN_VERSION "0.0.0"
#endif

namespace fxchain::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Published full-scale results (MUSDB18 training, 400 epochs). Not expected
// at the scale this tool runs; reported for orientation only.
json reference_full_scale() {
  return {{"note", "full-scale published values; not reproduced at toy scale"},
          {"chain_lyy", 0.40},
          {"chain_mqq", 0.072},
          {"proxy_test_mae", 0.0060}};
}

json seeds_json(const Seeds& s) {
  return {{"data", s.data}, {"train", s.train}, {"eval", s.eval}, {"gradcheck", s.gradcheck}, {"proxy", s.proxy}};
}

json report_header(const ExperimentConfig& cfg, const std::string& command) {
  return {{"tool", "fxchain"},
          {"version", version()},
          {"command", command},
          {"config", to_json(cfg)},
          {"seeds", seeds_json(derive_seeds(cfg.seed))}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::Config, path.string() + ": " + e.what());
  }
}

void prepare(const ExperimentConfig& cfg) {
  cfg.validate();
  set_thread_count(cfg.threads);
}

fs::path corpus_dir(const ExperimentConfig& cfg) {
  if (cfg.corpus.empty()) throw Error(Errc::Config, "no corpus directory configured (corpus or --corpus)");
  const fs::path dir(cfg.corpus);
  if (!fs::is_directory(dir)) throw Error(Errc::Io, "corpus directory " + dir.string() + " does not exist");
  return dir;
}

json named_values(const std::vector<ParamSpec>& specs, std::span<const double> values) {
  json j = json::object();
  for (std::size_t i = 0; i < specs.size(); ++i) j[specs[i].name] = values[i];
  return j;
}

std::vector<data::DatasetRecord> load_dataset(const ExperimentConfig& cfg, const EffectChain& chain_s) {
  const json manifest = read_json(fs::path(cfg.out) / "manifest.json");
  const std::string corpus = cfg.corpus.empty() ? manifest.value("corpus", std::string()) : cfg.corpus;
  if (corpus.empty()) throw Error(Errc::Config, "no corpus directory configured (corpus or --corpus)");
  return data::load_records(manifest, corpus, chain_s);
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::string version() { return FXCHAIN_VERSION; }

Seeds derive_seeds(std::uint64_t master) {
  return {derive_seed(master, {1}), derive_seed(master, {2}), derive_seed(master, {3}), derive_seed(master, {4}),
          derive_seed(master, {5})};
}

int exit_code(const std::exception& e) {
  const auto* err = dynamic_cast<const Error*>(&e);
  if (err == nullptr) return 1;
  switch (err->code()) {
    case Errc::Io:
    case Errc::CorruptHeader:
    case Errc::UnsupportedFormat:
      return 3;
    case Errc::NonFiniteLoss:
      return 4;
    default:
      return 2;
  }
}

EffectChain make_chain(const std::string& spec, const ExperimentConfig& cfg) {
  EffectOptions options{cfg.ranges, nullptr};
  if (spec.find("comp-proxy") != std::string::npos) {
    if (cfg.proxy_checkpoint.empty()) throw Error(Errc::Config, "comp-proxy needs proxy.checkpoint");
    options.proxy = std::make_shared<const proxy::ProxyModel>(checkpoint::load_proxy(cfg.proxy_checkpoint));
  }
  return EffectChain::parse(spec, options);
}

void generate_corpus(const fs::path& dir, std::size_t songs, const ExperimentConfig& cfg) {
  data::SyntheticCorpusConfig sc;
  sc.songs = songs;
  sc.duration_s = cfg.data.synthetic_song_s;
  sc.sample_rate = cfg.mel.sample_rate;
  sc.seed = derive_seeds(cfg.seed).data;
  data::write_corpus(dir, data::synthetic_corpus(sc, cfg.data.test_fraction));
}

json cmd_synth(const ExperimentConfig& cfg) {
  prepare(cfg);
  const fs::path dir = corpus_dir(cfg);
  const Seeds seeds = derive_seeds(cfg.seed);
  const EffectChain chain_s = make_chain(cfg.chain_s, cfg);

  data::ExtractStats stats;
  const auto clips = data::extract_clips(dir, cfg.data.duration_s, cfg.data.clips_per_song, seeds.data, &stats,
                                         cfg.data.test_fraction);
  if (clips.empty()) throw Error(Errc::EmptyCorpus, "no song in " + dir.string() + " is long enough for one clip");
  const auto records = data::synthesize_dataset(clips, chain_s, seeds.data);
  const auto splits =
      data::split_songs(data::list_songs(dir), data::is_musdb_layout(dir), seeds.data, cfg.data.test_fraction);

  const data::ManifestInfo info{clips.front().audio.sample_rate(), cfg.data.duration_s, seeds.data,
                                cfg.data.clips_per_song};
  json manifest = report_header(cfg, "synth");
  manifest.update(data::manifest_json(records, chain_s, info, splits));
  manifest["corpus"] = dir.string();
  manifest["skipped_songs"] = stats.skipped;
  write_json(fs::path(cfg.out) / "manifest.json", manifest);

  if (cfg.data.write_audio) {
    for (std::size_t i = 0; i < records.size(); ++i) {
      char stem[32];
      std::snprintf(stem, sizeof stem, "%05zu", i);
      wav::save_wav(fs::path(cfg.out) / "audio" / (std::string(stem) + "_x.wav"), records[i].x);
      wav::save_wav(fs::path(cfg.out) / "audio" / (std::string(stem) + "_y.wav"), records[i].y);
    }
  }

  const std::size_t c = chain_s.param_count();
  std::vector<double> mean(c, 0.0), sq(c, 0.0);
  for (const auto& r : records) {
    for (std::size_t k = 0; k < c; ++k) {
      mean[k] += r.q[k];
      sq[k] += r.q[k] * r.q[k];
    }
  }
  json q_stats = json::object();
  const double n = static_cast<double>(records.size());
  for (std::size_t k = 0; k < c; ++k) {
    const double m = mean[k] / n;
    q_stats[chain_s.specs()[k].name] = {{"mean", m}, {"std", std::sqrt(std::max(0.0, sq[k] / n - m * m))}};
  }
  json summary = {{"records", records.size()},
                  {"train", data::subset(records, data::Split::Train).size()},
                  {"validation", data::subset(records, data::Split::Validation).size()},
                  {"test", data::subset(records, data::Split::Test).size()},
                  {"skipped_songs", stats.skipped},
                  {"q", q_stats}};
  return summary;
}

json cmd_fit(const ExperimentConfig& cfg, const fs::path& x_wav, const fs::path& y_wav) {
  prepare(cfg);
  const EffectChain chain_a = make_chain(cfg.chain_a, cfg);
  const AudioBuffer x = data::load_song(x_wav);
  const AudioBuffer y = data::load_song(y_wav);
  if (x.size() != y.size()) {
    throw Error(Errc::LengthMismatch, "x has " + std::to_string(x.size()) + " samples, y has " + std::to_string(y.size()));
  }
  if (x.sample_rate() != y.sample_rate()) throw Error(Errc::InvalidAudio, "x and y sample rates differ");
  MelConfig mel = cfg.mel;
  mel.sample_rate = x.sample_rate();
  const FitResult r = fit_paired(peak_normalize(x.view()), y.view(), chain_a, mel, cfg.fit, x.sample_rate());

  const auto p = denormalize(ParamVector{r.q, ParamKind::Normalized}, chain_a.specs());
  json report = report_header(cfg, "fit");
  report["x"] = x_wav.string();
  report["y"] = y_wav.string();
  report["status"] = to_string(r.status);
  report["steps"] = r.steps;
  report["initial_loss"] = r.initial_loss;
  report["final_loss"] = r.final_loss;
  report["q_hat"] = named_values(chain_a.specs(), r.q);
  report["p_hat"] = named_values(chain_a.specs(), p.values);
  report["loss"] = r.loss;
  write_json(fs::path(cfg.out) / "fit.json", report);
  if (r.status == FitStatus::NonFinite) throw Error(Errc::NonFiniteLoss, "fit diverged after " + std::to_string(r.steps) + " steps");
  return report;
}

json cmd_train(const ExperimentConfig& cfg) {
  prepare(cfg);
  const Seeds seeds = derive_seeds(cfg.seed);
  const EffectChain chain_s = make_chain(cfg.chain_s, cfg);
  const EffectChain chain_a = make_chain(cfg.chain_a, cfg);
  const auto records = load_dataset(cfg, chain_s);

  TrainConfig tc = cfg.train;
  tc.seed = seeds.train;
  TrainReport tr;
  const AnalysisNetwork net = train_blind(records, chain_a, cfg.encoder(), tc, &tr);
  const fs::path model = fs::path(cfg.out) / "model.fxck";
  checkpoint::save_network(model, net, {{"version", version()}, {"seed", seeds.train}});

  json report = report_header(cfg, "train");
  report["checkpoint"] = model.string();
  report["best_epoch"] = tr.best_epoch;
  report["best_validation"] = tr.best_validation;
  json epochs = json::array();
  for (const auto& e : tr.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"validation", e.validation},
                      {"learning_rate", e.learning_rate}});
  }
  report["epochs"] = epochs;
  write_json(fs::path(cfg.out) / "train.json", report);
  return report;
}

json cmd_eval(const ExperimentConfig& cfg) {
  prepare(cfg);
  const Seeds seeds = derive_seeds(cfg.seed);
  const EffectChain chain_s = make_chain(cfg.chain_s, cfg);
  const EffectChain chain_a = make_chain(cfg.chain_a, cfg);
  const auto records = load_dataset(cfg, chain_s);
  const AnalysisNetwork net = checkpoint::load_network(fs::path(cfg.out) / "model.fxck");
  if (net.chain_id != chain_a.id()) {
    throw Error(Errc::Config, "checkpoint was trained for chain '" + net.chain_id + "', config has '" + chain_a.id() + "'");
  }
  const auto test = data::subset(records, data::Split::Test);
  if (test.empty()) throw Error(Errc::EmptyDataset, "no test records");
  EvalConfig ec = cfg.eval;
  ec.seed = seeds.eval;
  const auto rows = evaluate(net, test, chain_a, chain_s, ec);

  json report = report_header(cfg, "eval");
  json jr = json::array();
  for (const auto& r : rows) {
    jr.push_back({{"implementation", r.implementation},
                  {"encoder", r.encoder},
                  {"Myy", r.myy},
                  {"Lyy", r.lyy},
                  {"Mqq", std::isnan(r.mqq) ? json(nullptr) : json(r.mqq)},
                  {"runs", r.runs},
                  {"stddev", r.stddev}});
  }
  report["test_records"] = test.size();
  report["rows"] = jr;
  report["reference_full_scale"] = reference_full_scale();
  write_json(fs::path(cfg.out) / "eval.json", report);
  write_text(fs::path(cfg.out) / "eval.csv", metrics_csv(rows));
  return report;
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream out;
  out << "implementation,encoder,Myy,Lyy,Mqq,runs,stddev\n";
  for (const auto& r : rows) {
    out << r.implementation << ',' << r.encoder << ',' << fmt(r.myy) << ',' << fmt(r.lyy) << ',' << fmt(r.mqq)
        << ',' << r.runs << ',' << fmt(r.stddev) << '\n';
  }
  return out.str();
}

std::vector<GradCheckRow> gradcheck_rows(const ExperimentConfig& cfg, const ad::PrimitiveRegistry& registry) {
  const auto& gc = cfg.gradcheck;
  const std::uint64_t seed = derive_seeds(cfg.seed).gradcheck;
  const int fs_rate = cfg.mel.sample_rate;
  const auto x = gen_test_signal(SignalKind::WhiteNoise, gc.duration_s, derive_seed(seed, {0}), fs_rate).samples();
  const double lo = 0.02, hi = 0.98;  // interior draws
  auto interior = [&](std::uint64_t s, std::size_t n) {
    auto q = data::draw_q(s, n);
    for (double& v : q) v = lo + (hi - lo) * v;
    return q;
  };
  auto finish = [&](GradCheckRow& row, const GradCheckReport& rep) {
    row.checked += rep.entries.size();
    row.excluded += rep.excluded;
    row.max_rel_error = std::max(row.max_rel_error, rep.max_rel_error);
  };

  std::vector<GradCheckRow> rows;
  for (std::size_t e = 0; e < gc.effects.size(); ++e) {
    const EffectChain chain = make_chain(gc.effects[e], cfg);
    GradCheckRow row{gc.effects[e], gc.draws};
    for (std::size_t d = 0; d < gc.draws; ++d) {
      const auto q_target = data::draw_q(derive_seed(seed, {1, e, d}), chain.param_count());
      const auto q = interior(derive_seed(seed, {2, e, d}), chain.param_count());
      const auto y = chain.render(x, q_target, fs_rate);
      finish(row, grad_check(chain, x, y, q, gc.eps, cfg.mel, fs_rate, registry));
    }
    row.passed = row.max_rel_error < gc.tolerance;
    rows.push_back(row);
  }

  {
    // Lyy with respect to a sample subset of the estimate.
    const EffectChain chain = make_chain("clip", cfg);
    GradCheckRow row{"mel_l1", gc.draws};
    constexpr std::size_t kSamples = 16;
    for (std::size_t d = 0; d < gc.draws; ++d) {
      const auto y = chain.render(x, data::draw_q(derive_seed(seed, {3, d}), chain.param_count()), fs_rate);
      const auto y_hat = chain.render(x, data::draw_q(derive_seed(seed, {4, d}), chain.param_count()), fs_rate);
      std::mt19937_64 rng(derive_seed(seed, {5, d}));
      std::vector<std::size_t> coords(kSamples);
      for (auto& c : coords) c = static_cast<std::size_t>(rng() % x.size());
      const MelL1Objective objective(y, cfg.mel);
      auto loss = [&](ad::Tape&, ad::Var v) { return objective(v); };
      finish(row, grad_check(loss, y_hat, gc.eps, coords, {}, registry));
    }
    row.passed = row.max_rel_error < gc.tolerance;
    rows.push_back(row);
  }

  {
    // q -> p for every effect, through a random linear functional.
    GradCheckRow row{"param_mapping", gc.draws};
    const EffectChain chain = make_chain(cfg.chain_a, cfg);
    const auto specs = chain.specs();
    for (std::size_t d = 0; d < gc.draws; ++d) {
      const auto q = interior(derive_seed(seed, {6, d}), specs.size());
      auto w = data::draw_q(derive_seed(seed, {7, d}), specs.size());
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = (2.0 * w[i] - 1.0) / std::max(1.0, std::abs(specs[i].max));
      auto loss = [&](ad::Tape& tape, ad::Var v) { return ad::sum(denormalize(v, specs) * tape.constant(w)); };
      finish(row, grad_check(loss, q, gc.eps, {}, {}, registry));
    }
    row.passed = row.max_rel_error < gc.tolerance;
    rows.push_back(row);
  }
  return rows;
}

json cmd_gradcheck(const ExperimentConfig& cfg, const std::string& corrupt) {
  prepare(cfg);
  ad::PrimitiveRegistry registry = ad::PrimitiveRegistry::builtin();
  if (!corrupt.empty()) registry.corrupt(corrupt);
  const auto rows = gradcheck_rows(cfg, registry);

  json report = report_header(cfg, "gradcheck");
  if (!corrupt.empty()) report["corrupted_primitive"] = corrupt;
  json jr = json::array();
  std::ostringstream csv;
  csv << "target,draws,checked,excluded,max_rel_error,status\n";
  bool all = true;
  for (const auto& r : rows) {
    all = all && r.passed;
    jr.push_back({{"target", r.target},
                  {"draws", r.draws},
                  {"checked", r.checked},
                  {"excluded", r.excluded},
                  {"max_rel_error", r.max_rel_error},
                  {"status", r.passed ? "PASS" : "FAIL"}});
    csv << r.target << ',' << r.draws << ',' << r.checked << ',' << r.excluded << ',' << fmt(r.max_rel_error) << ','
        << (r.passed ? "PASS" : "FAIL") << '\n';
  }
  report["tolerance"] = cfg.gradcheck.tolerance;
  report["rows"] = jr;
  report["passed"] = all;
  write_json(fs::path(cfg.out) / "gradcheck.json", report);
  write_text(fs::path(cfg.out) / "gradcheck.csv", csv.str());
  return report;
}

json cmd_proxy_train(const ExperimentConfig& cfg) {
  prepare(cfg);
  const Seeds seeds = derive_seeds(cfg.seed);
  const fs::path dir = corpus_dir(cfg);
  const auto clips = data::extract_clips(dir, cfg.data.duration_s, cfg.data.clips_per_song, seeds.data, nullptr,
                                         cfg.data.test_fraction);
  std::vector<AudioBuffer> audio;
  for (const auto& c : clips) {
    if (c.split != data::Split::Test) audio.push_back(c.audio);
  }
  const auto specs = specs_for("comp", cfg.ranges);
  proxy::ProxyTrainConfig pc = cfg.proxy_train;
  pc.seed = seeds.proxy;
  pc.threads = cfg.threads;
  proxy::ProxyTrainReport pr;
  const auto model = proxy::proxy_train(audio, specs, cfg.proxy, pc, &pr);
  const fs::path path = fs::path(cfg.out) / "proxy.fxck";
  checkpoint::save_proxy(path, model, specs, {{"version", version()}, {"seed", seeds.proxy}});

  json report = report_header(cfg, "proxy-train");
  report["checkpoint"] = path.string();
  report["clips"] = audio.size();
  report["receptive_field"] = pr.receptive_field;
  report["baseline_mae"] = pr.baseline_mae;
  report["trained_mae"] = pr.trained_mae;
  report["loss"] = pr.loss;
  report["reference_full_scale"] = reference_full_scale();
  write_json(fs::path(cfg.out) / "proxy.json", report);
  return report;
}

}  // namespace fxchain::cli
