#pragma once

// Log-magnitude Mel spectrograms: Hann-windowed STFT magnitudes projected on
// a triangular, area-normalised filterbank on the Slaney Mel scale.

#include <memory>
#include <span>
#include <vector>

#include "fxchain/autodiff.hpp"
#include "fxchain/signal.hpp"

namespace fxchain {

struct MelConfig {
  std::size_t fft_size = 2048;
  std::size_t hop = 512;
  std::size_t mel_bands = 128;
  int sample_rate = kDefaultSampleRate;
  double log_floor = 1e-5;

  void validate() const;
  std::size_t frames(std::size_t signal_length) const;
  bool operator==(const MelConfig&) const = default;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

class MelFilterbank {
 public:
  explicit MelFilterbank(const MelConfig& cfg);

  std::size_t bands() const noexcept { return first_bin_.size(); }
  std::size_t bins() const noexcept { return bins_; }
  std::size_t first_bin(std::size_t band) const { return first_bin_[band]; }
  // Non-zero weights of a band starting at first_bin(band).
  std::span<const double> weights(std::size_t band) const { return weights_[band]; }
  double row_sum(std::size_t band) const;
  // Centre frequency of a band in Hz.
  double center_hz(std::size_t band) const { return centers_[band]; }

 private:
  std::size_t bins_;
  std::vector<std::size_t> first_bin_;
  std::vector<std::vector<double>> weights_;
  std::vector<double> centers_;
};

// Cached per configuration.
std::shared_ptr<const MelFilterbank> mel_filterbank(const MelConfig& cfg);

struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;  // row-major
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// Magnitude Mel spectrogram, bands x frames. Throws Errc::TooShort when the
// signal is shorter than one frame.
Matrix mel_spectrogram(const AudioBuffer& x, const MelConfig& cfg);

// log(Mel + floor), frame-major (frames x bands), as used by the audio loss.
std::vector<double> log_mel(std::span<const double> x, const MelConfig& cfg);

// Differentiable counterparts.
// magnitudes: frames x bins -> frames x bands.
ad::Var mel_project(ad::Var magnitudes, std::shared_ptr<const MelFilterbank> fb);
ad::Var log_mel(ad::Var x, const MelConfig& cfg);

}  // namespace fxchain
