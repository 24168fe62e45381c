#include "fxchain/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "fxchain/error.hpp"

namespace fxchain {
namespace {
constexpr std::size_t kMoments = 4;
}

std::size_t EncoderConfig::embedding_size() const {
  return 2 * mel.mel_bands + (waveform_stats ? histogram_bins + kMoments : 0);
}

std::vector<double> embed(std::span<const double> y, const EncoderConfig& cfg) {
  const auto lm = log_mel(y, cfg.mel);
  const std::size_t bands = cfg.mel.mel_bands;
  const std::size_t frames = lm.size() / bands;
  std::vector<double> out(cfg.embedding_size(), 0.0);
  for (std::size_t b = 0; b < bands; ++b) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t f = 0; f < frames; ++f) {
      const double v = lm[f * bands + b];
      s += v;
      s2 += v * v;
    }
    const double mean = s / static_cast<double>(frames);
    out[b] = mean;
    out[bands + b] = std::sqrt(std::max(0.0, s2 / static_cast<double>(frames) - mean * mean));
  }
  if (cfg.waveform_stats) {
    const std::size_t base = 2 * bands;
    const double n = static_cast<double>(y.size());
    const double bins = static_cast<double>(cfg.histogram_bins);
    double m1 = 0.0, m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : y) {
      const double c = std::clamp(v, -1.0, 1.0);
      const auto k = std::min(cfg.histogram_bins - 1, static_cast<std::size_t>((c + 1.0) / 2.0 * bins));
      out[base + k] += 1.0 / n;
      m1 += v;
      m2 += v * v;
      m3 += v * v * v;
      m4 += v * v * v * v;
    }
    m1 /= n;
    m2 /= n;
    m3 /= n;
    m4 /= n;
    const double rms = std::sqrt(std::max(m2, 1e-24));
    const std::size_t mo = base + cfg.histogram_bins;
    out[mo] = m1 / rms;
    out[mo + 1] = std::log(rms);
    out[mo + 2] = m3 / (rms * rms * rms);
    out[mo + 3] = std::log(m4 / (rms * rms * rms * rms));
  }
  return out;
}

FeatureScaler FeatureScaler::fit(std::span<const std::vector<double>> rows) {
  if (rows.empty()) throw Error(Errc::EmptyDataset, "cannot fit feature scaling on no rows");
  const std::size_t d = rows.front().size();
  FeatureScaler s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
  const double n = static_cast<double>(rows.size());
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < d; ++i) s.mean[i] += r[i] / n;
  }
  for (std::size_t i = 0; i < d; ++i) {
    double var = 0.0;
    for (const auto& r : rows) var += (r[i] - s.mean[i]) * (r[i] - s.mean[i]);
    var /= n;
    s.scale[i] = var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0;
  }
  return s;
}

std::vector<double> FeatureScaler::apply(std::span<const double> row) const {
  if (row.size() != mean.size()) throw Error(Errc::ShapeMismatch, "embedding size differs from the fitted scaler");
  std::vector<double> out(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) out[i] = (row[i] - mean[i]) * scale[i];
  return out;
}

}  // namespace fxchain
