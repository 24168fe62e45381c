#pragma once

// Neural proxy of the compressor: a causal dilated TCN whose activations are
// modulated per layer by scale/shift vectors computed from the 5 normalized
// compressor parameters, ending in a sigmoid that yields the gain g[n] with
// y[n] = g[n] x[n].
//
// The network sees two input channels per sample: x[n] and a clamped log
// magnitude of x[n] mapped to [0,1].

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "fxchain/autodiff.hpp"
#include "fxchain/params.hpp"
#include "fxchain/signal.hpp"

namespace fxchain::proxy {

inline constexpr std::size_t kInputChannels = 2;
inline constexpr std::size_t kConditioningInputs = 5;
// Floor of the log-magnitude input channel (-60 dB).
inline constexpr double kFeatureFloor = 1e-3;

struct ProxyConfig {
  std::size_t channels = 8;
  std::size_t layers = 6;
  std::size_t kernel = 5;
  std::size_t dilation_growth = 5;
  std::size_t conditioning_width = 16;

  void validate() const;
  std::size_t dilation(std::size_t layer) const;
  // Samples that influence one output sample, including the current one.
  std::size_t receptive_field() const;
  bool operator==(const ProxyConfig&) const = default;
};

class ProxyModel {
 public:
  ProxyModel(ProxyConfig cfg, std::uint64_t seed);
  ProxyModel(ProxyConfig cfg, std::vector<double> weights);

  const ProxyConfig& config() const noexcept { return cfg_; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::span<double> weights() noexcept { return weights_; }
  std::size_t weight_count() const noexcept { return weights_.size(); }

  // Per-sample gain in (0,1); q is the normalized parameter vector.
  std::vector<double> gain(std::span<const double> x, std::span<const double> q) const;
  // g * x
  std::vector<double> forward(std::span<const double> x, std::span<const double> q) const;

  struct Cache;
  std::shared_ptr<Cache> forward_cached(std::span<const double> x, std::span<const double> q) const;
  const std::vector<double>& cached_gain(const Cache& cache) const;
  // d loss / d gain -> accumulated gradients. Empty spans are skipped.
  void backward(const Cache& cache, std::span<const double> grad_gain, std::span<double> grad_weights,
                std::span<double> grad_x, std::span<double> grad_q) const;

  struct Offsets {
    std::size_t cond_w, cond_b;
    std::vector<std::size_t> conv_w, conv_b, film_w, film_b;
    std::size_t out_w, out_b, total;
  };
  const Offsets& offsets() const noexcept { return off_; }

 private:
  void layout();
  ProxyConfig cfg_;
  Offsets off_{};
  std::vector<double> weights_;
};

// Differentiable gain and proxy output with respect to x and q.
ad::Var proxy_gain(ad::Var x, ad::Var q, std::shared_ptr<const ProxyModel> model);
ad::Var proxy_compress(ad::Var x, ad::Var q, std::shared_ptr<const ProxyModel> model);

// Denormalizes q and renders with the DSP compressor.
std::vector<double> hybrid_render(std::span<const double> x, std::span<const double> q,
                                  std::span<const ParamSpec> specs, double fs);
AudioBuffer hybrid_render(const AudioBuffer& x, const ParamVector& q, std::span<const ParamSpec> specs);

struct ProxyTrainConfig {
  std::size_t steps = 400;
  std::size_t batch_size = 8;
  double segment_s = 0.5;
  double learning_rate = 3e-3;
  // Clips held out from the corpus for the reported MAE.
  double holdout_fraction = 0.2;
  std::size_t eval_draws = 4;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct ProxyTrainReport {
  double baseline_mae = 0.0;
  double trained_mae = 0.0;
  std::vector<double> loss;  // per step
  std::size_t receptive_field = 0;
};

// Trains against the DSP compressor with q ~ U(0,1)^5 under specs.
// Throws Errc::EmptyCorpus when the corpus is empty.
ProxyModel proxy_train(std::span<const AudioBuffer> corpus, std::span<const ParamSpec> specs,
                       const ProxyConfig& model_cfg, const ProxyTrainConfig& cfg, ProxyTrainReport* report = nullptr);

// Mean absolute error between proxy and DSP outputs over seeded draws of
// (segment, q) from the clips.
double proxy_mae(const ProxyModel& model, std::span<const AudioBuffer> clips, std::span<const ParamSpec> specs,
                 double segment_s, std::size_t draws_per_clip, std::uint64_t seed);

}  // namespace fxchain::proxy
