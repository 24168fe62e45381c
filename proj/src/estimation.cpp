#include "fxchain/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

#include "fxchain/error.hpp"
#include "fxchain/loss.hpp"
#include "fxchain/parallel.hpp"
#include "fxchain/random.hpp"

namespace fxchain {
namespace {

double sigmoid(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double a) { return std::isfinite(a); });
}

std::string strip_effect(const std::string& name) { return name.substr(name.find('.') + 1); }

bool same_parameter_space(const EffectChain& a, const EffectChain& b) {
  if (a.param_count() != b.param_count()) return false;
  for (std::size_t i = 0; i < a.param_count(); ++i) {
    const auto& sa = a.specs()[i];
    const auto& sb = b.specs()[i];
    if (strip_effect(sa.name) != strip_effect(sb.name) || sa.min != sb.min || sa.max != sb.max ||
        sa.scale != sb.scale) {
      return false;
    }
  }
  return true;
}

double lyy_of(const EffectChain& chain, const data::DatasetRecord& r, std::span<const double> q_hat,
              const MelConfig& mel) {
  const auto y_hat = chain.render(r.x.view(), q_hat, r.x.sample_rate());
  return audio_metrics(y_hat, r.y.view(), mel).lyy;
}

}  // namespace

std::string_view to_string(FitStatus s) {
  switch (s) {
    case FitStatus::MaxSteps:
      return "max_steps";
    case FitStatus::Plateau:
      return "plateau";
    case FitStatus::Converged:
      return "converged";
    case FitStatus::NonFinite:
      return "non_finite";
  }
  return "max_steps";
}

FitResult fit_paired(std::span<const double> x, std::span<const double> y, const EffectChain& chain_a,
                     const MelConfig& mel, const FitConfig& cfg, double fs) {
  if (x.size() != y.size()) throw Error(Errc::LengthMismatch, "dry and wet signals differ in length");
  if (!chain_a.differentiable()) throw Error(Errc::InvalidArgument, "chain '" + chain_a.id() + "' is not differentiable");
  const std::size_t c = chain_a.param_count();
  std::vector<double> q0 = cfg.initial_q.empty() ? chain_a.initial_q() : cfg.initial_q;
  if (q0.size() != c) throw Error(Errc::LengthMismatch, "initial q has the wrong length");

  const MelL1Objective objective(y, mel);
  const std::vector<double> dry(x.begin(), x.end());
  auto loss_fn = [&](ad::Tape& tape, ad::Var q) { return objective(chain_a.record(tape.constant(dry), q, fs)); };

  std::mt19937_64 rng(cfg.seed);
  auto random_q = [&] {
    std::vector<double> q(c);
    for (double& v : q) v = 0.1 + 0.8 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    return q;
  };
  auto value_at = [&](const std::vector<double>& q) {
    ad::Tape tape;
    const double v = loss_fn(tape, tape.constant(q)).item();
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  // Best of `screen` random points, or of `from` and those points.
  auto screened = [&](std::vector<double> from) {
    if (cfg.screen == 0) return from.empty() ? random_q() : from;
    double best_v = from.empty() ? std::numeric_limits<double>::infinity() : value_at(from);
    for (std::size_t k = 0; k < cfg.screen; ++k) {
      auto q = random_q();
      if (const double v = value_at(q); v < best_v) {
        best_v = v;
        from = std::move(q);
      }
    }
    return from;
  };
  q0 = screened(std::move(q0));

  std::vector<double> s(c);
  auto set_logits = [&](const std::vector<double>& q) {
    for (std::size_t i = 0; i < c; ++i) {
      const double qi = std::clamp(q[i], 1e-6, 1.0 - 1e-6);
      s[i] = std::log(qi / (1.0 - qi));
    }
  };
  set_logits(q0);
  nn::Adam adam(c, {cfg.learning_rate});
  FitResult res;
  double best = std::numeric_limits<double>::infinity();
  double run_best = best;
  std::size_t since_best = 0, since_lr = 0, restarts = 0;
  std::vector<double> gs(c);
  for (std::size_t step = 0; step < cfg.max_steps; ++step) {
    std::vector<double> q(c);
    for (std::size_t i = 0; i < c; ++i) q[i] = sigmoid(s[i]);
    const auto vg = ad::value_and_gradient(loss_fn, q);
    res.steps = step + 1;
    res.trajectory.push_back(q);
    res.loss.push_back(vg.value);
    if (step == 0) res.initial_loss = vg.value;
    if (!std::isfinite(vg.value) || !all_finite(vg.gradient)) {
      res.status = FitStatus::NonFinite;
      break;
    }
    if (vg.value < best) {
      best = vg.value;
      res.q = q;
    }
    if (vg.value < run_best) {
      run_best = vg.value;
      since_best = since_lr = 0;
    } else {
      ++since_best;
      ++since_lr;
    }
    if (cfg.target_loss > 0.0 && vg.value < cfg.target_loss) {
      res.status = FitStatus::Converged;
      break;
    }
    if (cfg.plateau > 0 && since_best >= cfg.plateau) {
      if (restarts < cfg.restarts && step + 1 < cfg.max_steps) {
        ++restarts;
        set_logits(screened({}));
        adam = nn::Adam(c, {cfg.learning_rate});
        run_best = std::numeric_limits<double>::infinity();
        since_best = since_lr = 0;
        continue;
      }
      res.status = FitStatus::Plateau;
      break;
    }
    if (cfg.lr_patience > 0 && since_lr >= cfg.lr_patience) {
      adam.set_learning_rate(adam.learning_rate() * cfg.lr_factor);
      since_lr = 0;
    }
    for (std::size_t i = 0; i < c; ++i) gs[i] = vg.gradient[i] * q[i] * (1.0 - q[i]);
    adam.step(s, gs);
  }
  if (res.q.empty()) res.q = q0;
  res.final_loss = std::isfinite(best) ? best : res.initial_loss;
  return res;
}

std::string_view to_string(Objective o) { return o == Objective::AudioLoss ? "audio" : "param"; }

Objective parse_objective(std::string_view s) {
  if (s == "audio" || s == "lyy") return Objective::AudioLoss;
  if (s == "param" || s == "mqq") return Objective::ParamLoss;
  throw Error(Errc::Config, "unknown objective '" + std::string(s) + "' (expected audio or param)");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(Errc::Config, "learning_rate must be positive");
  if (batch_size < 2) throw Error(Errc::Config, "batch_size must be at least 2");
  if (max_epochs == 0) throw Error(Errc::Config, "max_epochs must be positive");
  if (patience_lr == 0 || patience_stop == 0) throw Error(Errc::Config, "patience values must be positive");
  if (patience_lr >= patience_stop) throw Error(Errc::Config, "patience_lr must be below patience_stop");
  if (hidden_divisor == 0 || hidden_divisor > 512) throw Error(Errc::Config, "hidden_divisor must be in [1, 512]");
}

AnalysisNetwork make_network(const EffectChain& chain_a, const EncoderConfig& encoder, FeatureScaler scaler,
                             std::size_t clip_length, int sample_rate, std::size_t hidden_divisor,
                             std::uint64_t seed) {
  AnalysisNetwork net;
  net.chain_id = chain_a.id();
  net.specs = chain_a.specs();
  net.encoder = encoder;
  net.scaler = std::move(scaler);
  net.clip_length = clip_length;
  net.sample_rate = sample_rate;
  nn::MlpShape shape{encoder.embedding_size(),
                     {2048 / hidden_divisor, 1024 / hidden_divisor, 512 / hidden_divisor},
                     chain_a.param_count()};
  net.mlp = nn::Mlp(std::move(shape), seed);
  return net;
}

std::vector<double> predict(const AnalysisNetwork& net, std::span<const double> y) {
  if (y.size() != net.clip_length) {
    throw Error(Errc::LengthMismatch, "network expects clips of " + std::to_string(net.clip_length) + " samples, got " +
                                          std::to_string(y.size()));
  }
  const auto features = embed(peak_normalize(y), net.encoder);
  return net.mlp.predict(net.scaler.apply(features));
}

ParamVector predict(const AnalysisNetwork& net, const AudioBuffer& y) {
  return {predict(net, y.view()), ParamKind::Normalized};
}

double validation_score(const AnalysisNetwork& net, std::span<const data::DatasetRecord* const> records,
                        const EffectChain& chain_a, Objective objective) {
  std::vector<double> scores(records.size());
  parallel_for(records.size(), [&](std::size_t i) {
    const auto& r = *records[i];
    const auto q_hat = predict(net, r.y.view());
    scores[i] = objective == Objective::ParamLoss ? mse_params(q_hat, r.q.values)
                                                  : lyy_of(chain_a, r, q_hat, net.encoder.mel);
  });
  return std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(std::max<std::size_t>(1, scores.size()));
}

AnalysisNetwork train_blind(std::span<const data::DatasetRecord> records, const EffectChain& chain_a,
                            const EncoderConfig& encoder, const TrainConfig& cfg, TrainReport* report) {
  cfg.validate();
  auto train = data::subset(records, data::Split::Train);
  auto valid = data::subset(records, data::Split::Validation);
  if (train.size() < 2) throw Error(Errc::EmptyDataset, "blind training needs at least 2 training records");
  if (valid.empty()) valid = train;
  const std::size_t len = train.front()->y.size();
  const int fs = train.front()->y.sample_rate();
  for (const auto* r : train) {
    if (r->y.size() != len || r->x.size() != len) throw Error(Errc::LengthMismatch, "training clips differ in length");
  }
  if (cfg.objective == Objective::AudioLoss && !chain_a.differentiable()) {
    throw Error(Errc::Config, "the audio objective needs a differentiable analysis chain");
  }
  if (cfg.objective == Objective::ParamLoss && train.front()->q.size() != chain_a.param_count()) {
    throw Error(Errc::Config, "the parameter objective needs matching synthesis and analysis parameters");
  }
  const std::size_t c = chain_a.param_count();

  std::vector<std::vector<double>> features(train.size());
  parallel_for(train.size(), [&](std::size_t i) { features[i] = embed(peak_normalize(train[i]->y.view()), encoder); });
  FeatureScaler scaler = FeatureScaler::fit(features);
  for (auto& f : features) f = scaler.apply(f);

  std::vector<std::optional<MelL1Objective>> targets(train.size());
  if (cfg.objective == Objective::AudioLoss) {
    parallel_for(train.size(), [&](std::size_t i) { targets[i].emplace(train[i]->y.view(), encoder.mel); });
  }

  AnalysisNetwork net = make_network(chain_a, encoder, std::move(scaler), len, fs, cfg.hidden_divisor,
                                     derive_seed(cfg.seed, {0x6e6574}));
  AnalysisNetwork best = net;
  nn::Adam adam(net.mlp.weight_count(), {cfg.learning_rate});
  TrainReport rep;
  rep.best_validation = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0, since_lr = 0;

  const std::size_t epoch_size = cfg.epoch_size == 0 ? train.size() : cfg.epoch_size;
  std::vector<double> grads(net.mlp.weight_count());
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::vector<std::size_t> order;
    for (std::size_t pass = 0; order.size() < epoch_size; ++pass) {
      std::vector<std::size_t> perm(train.size());
      std::iota(perm.begin(), perm.end(), 0);
      std::mt19937_64 rng(derive_seed(cfg.seed, {1, epoch, pass}));
      for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng() % i]);
      order.insert(order.end(), perm.begin(), perm.end());
    }
    order.resize(epoch_size);

    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start + 2 <= order.size(); start += cfg.batch_size) {
      const std::size_t rows = std::min(cfg.batch_size, order.size() - start);
      std::vector<double> batch;
      batch.reserve(rows * features.front().size());
      for (std::size_t r = 0; r < rows; ++r) {
        const auto& f = features[order[start + r]];
        batch.insert(batch.end(), f.begin(), f.end());
      }
      nn::Mlp::Cache cache;
      const auto q_hat = net.mlp.forward_train(batch, rows, cache);
      std::vector<double> grad_out(rows * c, 0.0), losses(rows, 0.0);
      parallel_for(rows, [&](std::size_t r) {
        const auto& rec = *train[order[start + r]];
        const std::span<const double> qr(q_hat.data() + r * c, c);
        if (cfg.objective == Objective::ParamLoss) {
          losses[r] = mse_params(qr, rec.q.values);
          for (std::size_t i = 0; i < c; ++i) grad_out[r * c + i] = 2.0 * (qr[i] - rec.q[i]) / static_cast<double>(c);
        } else {
          const auto& target = *targets[order[start + r]];
          auto loss_fn = [&](ad::Tape& tape, ad::Var q) {
            return target(chain_a.record(tape.constant(rec.x.samples()), q, fs));
          };
          const auto vg = ad::value_and_gradient(loss_fn, qr);
          losses[r] = vg.value;
          std::copy(vg.gradient.begin(), vg.gradient.end(), grad_out.begin() + static_cast<std::ptrdiff_t>(r * c));
        }
      });
      for (double& g : grad_out) g /= static_cast<double>(rows);
      if (!all_finite(grad_out)) throw Error(Errc::InvalidArgument, "non-finite training gradient");
      std::fill(grads.begin(), grads.end(), 0.0);
      net.mlp.backward(cache, grad_out, grads);
      adam.step(net.mlp.weights(), grads);
      epoch_loss += std::accumulate(losses.begin(), losses.end(), 0.0);
      seen += rows;
    }

    const double val = validation_score(net, valid, chain_a, cfg.objective);
    rep.epochs.push_back({epoch, epoch_loss / static_cast<double>(std::max<std::size_t>(seen, 1)), val,
                          adam.learning_rate()});
    if (val < rep.best_validation) {
      rep.best_validation = val;
      rep.best_epoch = epoch;
      best = net;
      since_best = 0;
      since_lr = 0;
    } else {
      ++since_best;
      ++since_lr;
    }
    if (since_best >= cfg.patience_stop) break;
    if (since_lr >= cfg.patience_lr) {
      adam.set_learning_rate(adam.learning_rate() / 10.0);
      since_lr = 0;
    }
  }
  if (report != nullptr) *report = std::move(rep);
  return best;
}

std::vector<MetricRow> evaluate(const AnalysisNetwork& net, std::span<const data::DatasetRecord* const> testset,
                                const EffectChain& chain_a, const EffectChain& chain_s, const EvalConfig& cfg) {
  if (testset.empty()) throw Error(Errc::EmptyDataset, "evaluation needs test records");
  if (cfg.runs == 0) throw Error(Errc::Config, "evaluation needs at least one run");
  const bool comparable = same_parameter_space(chain_a, chain_s);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const auto& mel = net.encoder.mel;
  const std::size_t n = testset.size();

  struct Cell {
    AudioMetrics net, random, dry;
    double mqq_net = 0.0, mqq_random = 0.0;
  };
  std::vector<Cell> cells(cfg.runs * n);
  parallel_for(cells.size(), [&](std::size_t j) {
    const std::size_t run = j / n, i = j % n;
    const auto& r = *testset[i];
    const int fs = r.x.sample_rate();
    const auto q = data::draw_q(derive_seed(cfg.seed, {run, i, 0}), chain_s.param_count());
    const auto y = chain_s.render(r.x.view(), q, fs);
    const auto q_hat = predict(net, y);
    const auto q_rand = data::draw_q(derive_seed(cfg.seed, {run, i, 1}), chain_a.param_count());
    Cell& cell = cells[j];
    cell.net = audio_metrics(chain_a.render(r.x.view(), q_hat, fs), y, mel);
    cell.random = audio_metrics(chain_a.render(r.x.view(), q_rand, fs), y, mel);
    cell.dry = audio_metrics(r.x.view(), y, mel);
    if (comparable) {
      cell.mqq_net = mse_params(q_hat, q);
      cell.mqq_random = mse_params(q_rand, q);
    }
  });

  auto row = [&](std::string implementation, std::string encoder, auto audio, auto mqq, bool has_mqq) {
    MetricRow out{std::move(implementation), std::move(encoder), 0.0, 0.0, 0.0, cfg.runs, 0.0};
    std::vector<double> run_lyy(cfg.runs, 0.0);
    double myy = 0.0, lyy = 0.0, pq = 0.0;
    for (std::size_t run = 0; run < cfg.runs; ++run) {
      for (std::size_t i = 0; i < n; ++i) {
        const Cell& cell = cells[run * n + i];
        const AudioMetrics m = audio(cell);
        myy += m.myy;
        lyy += m.lyy;
        pq += mqq(cell);
        run_lyy[run] += m.lyy / static_cast<double>(n);
      }
    }
    const double total = static_cast<double>(cfg.runs * n);
    out.myy = myy / total;
    out.lyy = lyy / total;
    out.mqq = has_mqq ? pq / total : nan;
    double var = 0.0;
    for (double v : run_lyy) var += (v - out.lyy) * (v - out.lyy);
    out.stddev = std::sqrt(var / static_cast<double>(cfg.runs));
    return out;
  };
  const std::string encoder_name = net.encoder.waveform_stats ? "mel_stats+waveform" : "mel_stats";
  return {
      row(chain_a.id(), encoder_name, [](const Cell& c) { return c.net; }, [](const Cell& c) { return c.mqq_net; },
          comparable),
      row(chain_a.id(), "random_q_hat", [](const Cell& c) { return c.random; },
          [](const Cell& c) { return c.mqq_random; }, comparable),
      row(chain_s.id(), "dry_vs_wet", [](const Cell& c) { return c.dry; }, [](const Cell&) { return 0.0; }, false),
  };
}

}  // namespace fxchain
