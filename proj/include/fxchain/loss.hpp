#pragma once

// Audio loss Lyy (mean absolute difference of log-Mel spectrograms), audio
// metric Myy (sample MSE) and parameter loss Mqq (MSE of normalized
// parameters). The audio measures expect RMS-normalized inputs; the
// *_normalized helpers apply the normalization first.

#include <span>
#include <vector>

#include "fxchain/autodiff.hpp"
#include "fxchain/mel.hpp"
#include "fxchain/params.hpp"
#include "fxchain/signal.hpp"

namespace fxchain {

// Throw Errc::LengthMismatch on unequal lengths.
double loss_mel_l1(std::span<const double> y_hat, std::span<const double> y, const MelConfig& cfg);
double loss_mel_l1(const AudioBuffer& y_hat, const AudioBuffer& y, const MelConfig& cfg);
double mse_audio(std::span<const double> y_hat, std::span<const double> y);
double mse_audio(const AudioBuffer& y_hat, const AudioBuffer& y);
double mse_params(std::span<const double> q_hat, std::span<const double> q);
double mse_params(const ParamVector& q_hat, const ParamVector& q);

struct AudioMetrics {
  double myy = 0.0;
  double lyy = 0.0;
};

// Both signals RMS-normalized, then Myy and Lyy. A silent signal is compared
// as is.
AudioMetrics audio_metrics(std::span<const double> y_hat, std::span<const double> y, const MelConfig& cfg);

// Lyy against a fixed target, on the tape. The target is RMS-normalized once
// at construction; the estimate is RMS-normalized on the tape.
class MelL1Objective {
 public:
  MelL1Objective(std::span<const double> y, const MelConfig& cfg);
  ad::Var operator()(ad::Var y_hat) const;
  std::size_t length() const noexcept { return length_; }
  const MelConfig& config() const noexcept { return cfg_; }

 private:
  MelConfig cfg_;
  std::size_t length_;
  std::vector<double> target_;
};

}  // namespace fxchain
