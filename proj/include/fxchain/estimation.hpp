#pragma once

// Parameter estimation: paired gradient-descent fitting of q from (x, y),
// blind training of an analysis network that predicts q from y alone, and
// evaluation against random-guess and dry-signal baselines.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fxchain/dataset.hpp"
#include "fxchain/effects.hpp"
#include "fxchain/encoder.hpp"
#include "fxchain/mel.hpp"
#include "fxchain/nn.hpp"

namespace fxchain {

struct FitConfig {
  std::size_t max_steps = 1000;
  double learning_rate = 0.05;
  // Stop after this many steps without a new best loss.
  std::size_t plateau = 100;
  // Stop once the loss is below this value (0 disables).
  double target_loss = 0.0;
  // Starting point; empty means chain_a.initial_q().
  std::vector<double> initial_q;
  // Multiply the rate by lr_factor after this many steps without a new best
  // (0 disables).
  std::size_t lr_patience = 0;
  double lr_factor = 0.5;
  // On a plateau with steps left, start again from a seeded random point
  // this many times; the best q over all starts is returned.
  std::size_t restarts = 0;
  // Loss evaluations at seeded random points before the first step; the
  // best of these and the initial point is where descent starts.
  std::size_t screen = 0;
  std::uint64_t seed = 0;
};

enum class FitStatus { MaxSteps, Plateau, Converged, NonFinite };
std::string_view to_string(FitStatus s);

struct FitResult {
  std::vector<std::vector<double>> trajectory;  // q at every evaluated step
  std::vector<double> loss;
  std::vector<double> q;  // best q seen
  double initial_loss = 0.0;
  double final_loss = 0.0;  // loss at q
  std::size_t steps = 0;
  FitStatus status = FitStatus::MaxSteps;
};

// Adam on logits s with q = sigmoid(s), minimizing Lyy(chain_a(x; q), y).
// A non-finite loss or gradient ends the fit with FitStatus::NonFinite.
FitResult fit_paired(std::span<const double> x, std::span<const double> y, const EffectChain& chain_a,
                     const MelConfig& mel, const FitConfig& cfg, double fs);

enum class Objective { AudioLoss, ParamLoss };
std::string_view to_string(Objective o);
Objective parse_objective(std::string_view s);

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 400;
  // Examples per epoch; 0 uses every training record once.
  std::size_t epoch_size = 0;
  std::size_t patience_lr = 30;
  std::size_t patience_stop = 150;
  std::uint64_t seed = 0;
  Objective objective = Objective::AudioLoss;
  // Hidden layers 2048/d, 1024/d, 512/d.
  std::size_t hidden_divisor = 8;

  void validate() const;
};

struct AnalysisNetwork {
  std::string chain_id;
  std::vector<ParamSpec> specs;
  EncoderConfig encoder;
  FeatureScaler scaler;
  nn::Mlp mlp;
  std::size_t clip_length = 0;
  int sample_rate = kDefaultSampleRate;
};

AnalysisNetwork make_network(const EffectChain& chain_a, const EncoderConfig& encoder, FeatureScaler scaler,
                             std::size_t clip_length, int sample_rate, std::size_t hidden_divisor,
                             std::uint64_t seed);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation = 0.0;
  double learning_rate = 0.0;
};

struct TrainReport {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  double best_validation = 0.0;
};

// Trains on the Train records and selects the epoch with the best score on
// the Validation records (Train records when there are none). Throws
// Errc::EmptyDataset without training records.
AnalysisNetwork train_blind(std::span<const data::DatasetRecord> records, const EffectChain& chain_a,
                            const EncoderConfig& encoder, const TrainConfig& cfg, TrainReport* report = nullptr);

// Normalized q-hat in (0,1)^C. y is peak-normalized first. Throws
// Errc::LengthMismatch unless y has the training clip length.
std::vector<double> predict(const AnalysisNetwork& net, std::span<const double> y);
ParamVector predict(const AnalysisNetwork& net, const AudioBuffer& y);

// Mean validation score: Lyy of chain_a(x; q-hat) against y, or Mqq.
double validation_score(const AnalysisNetwork& net, std::span<const data::DatasetRecord* const> records,
                        const EffectChain& chain_a, Objective objective);

struct EvalConfig {
  std::size_t runs = 10;
  std::uint64_t seed = 0;
};

struct MetricRow {
  std::string implementation;
  std::string encoder;
  double myy = 0.0;
  double lyy = 0.0;
  double mqq = 0.0;  // NaN when q and q-hat live in different spaces
  std::size_t runs = 0;
  double stddev = 0.0;  // of Lyy across runs
};

// Each run draws fresh q per test clip, renders y with chain_s and predicts
// q-hat; y-hat is rendered with chain_a (DSP compressor for comp-proxy).
// Rows: the network, random q-hat, and the dry signal x against y.
std::vector<MetricRow> evaluate(const AnalysisNetwork& net, std::span<const data::DatasetRecord* const> testset,
                                const EffectChain& chain_a, const EffectChain& chain_s, const EvalConfig& cfg);

}  // namespace fxchain
