#pragma once

// Fixed-length embeddings of wet audio for the analysis network: per-band
// mean and standard deviation of the log-Mel spectrogram, optionally followed
// by waveform statistics (sample histogram and moments).

#include <span>
#include <vector>

#include "fxchain/mel.hpp"

namespace fxchain {

struct EncoderConfig {
  MelConfig mel;
  bool waveform_stats = false;
  std::size_t histogram_bins = 16;

  std::size_t embedding_size() const;
  bool operator==(const EncoderConfig&) const = default;
};

// y is expected at 0 dBFS.
std::vector<double> embed(std::span<const double> y, const EncoderConfig& cfg);

// Per-feature standardization fitted on training embeddings.
struct FeatureScaler {
  std::vector<double> mean;
  std::vector<double> scale;  // 1 / std, 1 for constant features

  static FeatureScaler fit(std::span<const std::vector<double>> rows);
  std::vector<double> apply(std::span<const double> row) const;
};

}  // namespace fxchain
