#include "fxchain/mel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

#include "fxchain/error.hpp"
#include "fxchain/kernels.hpp"
#include "primitives.hpp"

namespace fxchain {
namespace {

constexpr double kLinearHzPerMel = 200.0 / 3.0;
constexpr double kBreakHz = 1000.0;
constexpr double kBreakMel = kBreakHz / kLinearHzPerMel;
const double kLogStep = std::log(6.4) / 27.0;

}  // namespace

void MelConfig::validate() const {
  if (fft_size < 2) throw Error(Errc::Config, "mel fft_size must be at least 2");
  if (hop == 0 || hop > fft_size) throw Error(Errc::Config, "mel hop must be in [1, fft_size]");
  if (mel_bands < 1) throw Error(Errc::Config, "mel_bands must be at least 1");
  if (sample_rate <= 0) throw Error(Errc::Config, "sample_rate must be positive");
  if (!(log_floor > 0.0)) throw Error(Errc::Config, "log_floor must be positive");
}

std::size_t MelConfig::frames(std::size_t n) const { return n < fft_size ? 0 : 1 + (n - fft_size) / hop; }

double hz_to_mel(double hz) {
  if (hz < kBreakHz) return hz / kLinearHzPerMel;
  return kBreakMel + std::log(hz / kBreakHz) / kLogStep;
}

double mel_to_hz(double mel) {
  if (mel < kBreakMel) return mel * kLinearHzPerMel;
  return kBreakHz * std::exp(kLogStep * (mel - kBreakMel));
}

MelFilterbank::MelFilterbank(const MelConfig& cfg) : bins_(cfg.fft_size / 2 + 1) {
  cfg.validate();
  const std::size_t m = cfg.mel_bands;
  const double fmax = cfg.sample_rate / 2.0;
  const double mel_max = hz_to_mel(fmax);
  std::vector<double> edges(m + 2);
  for (std::size_t i = 0; i < m + 2; ++i) edges[i] = mel_to_hz(mel_max * static_cast<double>(i) / static_cast<double>(m + 1));
  const double bin_hz = static_cast<double>(cfg.sample_rate) / static_cast<double>(cfg.fft_size);

  for (std::size_t b = 0; b < m; ++b) {
    const double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
    const double norm = 2.0 / (hi - lo);
    std::vector<double> row(bins_, 0.0);
    for (std::size_t k = 0; k < bins_; ++k) {
      const double f = bin_hz * static_cast<double>(k);
      const double w = std::max(0.0, std::min((f - lo) / (mid - lo), (hi - f) / (hi - mid)));
      row[k] = w * norm;
    }
    auto first = std::find_if(row.begin(), row.end(), [](double w) { return w > 0.0; });
    if (first == row.end()) {
      // Band narrower than one bin: take the bin nearest to its centre.
      const auto k = std::min<std::size_t>(bins_ - 1, static_cast<std::size_t>(std::lround(mid / bin_hz)));
      first_bin_.push_back(k);
      weights_.push_back({norm * bin_hz});
    } else {
      auto last = std::find_if(row.rbegin(), row.rend(), [](double w) { return w > 0.0; }).base();
      first_bin_.push_back(static_cast<std::size_t>(first - row.begin()));
      weights_.emplace_back(first, last);
    }
    centers_.push_back(mid);
  }
}

double MelFilterbank::row_sum(std::size_t band) const {
  double s = 0.0;
  for (double w : weights_[band]) s += w;
  return s;
}

std::shared_ptr<const MelFilterbank> mel_filterbank(const MelConfig& cfg) {
  static std::mutex mutex;
  static std::map<std::tuple<std::size_t, std::size_t, int>, std::shared_ptr<const MelFilterbank>> cache;
  const auto key = std::make_tuple(cfg.fft_size, cfg.mel_bands, cfg.sample_rate);
  std::lock_guard lock(mutex);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  auto fb = std::make_shared<const MelFilterbank>(cfg);
  cache.emplace(key, fb);
  return fb;
}

ad::Var mel_project(ad::Var magnitudes, std::shared_ptr<const MelFilterbank> fb) {
  const std::size_t bins = fb->bins();
  const auto& mag = magnitudes.value();
  if (mag.size() % bins != 0) throw Error(Errc::ShapeMismatch, "magnitudes are not a whole number of frames");
  const std::size_t frames = mag.size() / bins;
  const std::size_t bands = fb->bands();
  ad::Node node;
  node.op = "mel_project";
  node.value.resize(frames * bands);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::span<const double> row(mag.data() + f * bins, bins);
    for (std::size_t b = 0; b < bands; ++b) {
      const auto w = fb->weights(b);
      node.value[f * bands + b] = kernels::dot(w, row.subspan(fb->first_bin(b), w.size()));
    }
  }
  node.inputs = {magnitudes.index()};
  node.context = std::move(fb);
  return magnitudes.tape()->record(std::move(node));
}

ad::Var log_mel(ad::Var x, const MelConfig& cfg) {
  cfg.validate();
  if (x.size() < cfg.fft_size) throw Error(Errc::TooShort, "signal shorter than one Mel analysis frame");
  ad::Var spec = ad::stft(x, cfg.fft_size, cfg.hop);
  ad::Var mel = mel_project(ad::cabs(spec), mel_filterbank(cfg));
  return ad::log(mel + cfg.log_floor);
}

std::vector<double> log_mel(std::span<const double> x, const MelConfig& cfg) {
  ad::Tape tape;
  ad::Var v = log_mel(tape.constant(std::vector<double>(x.begin(), x.end())), cfg);
  return v.value();
}

Matrix mel_spectrogram(const AudioBuffer& x, const MelConfig& cfg) {
  cfg.validate();
  if (x.size() < cfg.fft_size) throw Error(Errc::TooShort, "signal shorter than one Mel analysis frame");
  ad::Tape tape;
  ad::Var mel = mel_project(ad::cabs(ad::stft(tape.constant(x.samples()), cfg.fft_size, cfg.hop)), mel_filterbank(cfg));
  const std::size_t bands = cfg.mel_bands;
  const std::size_t frames = mel.size() / bands;
  Matrix out{bands, frames, std::vector<double>(bands * frames)};
  const auto& v = mel.value();
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t b = 0; b < bands; ++b) out.data[b * frames + f] = v[f * bands + b];
  }
  return out;
}

}  // namespace fxchain

namespace fxchain::ad::detail {

void register_mel(PrimitiveRegistry& r) {
  r.define("mel_project", [](const Tape&, const Node& n, std::span<const double> g,
                             std::span<std::vector<double>* const> gi) {
    if (gi[0] == nullptr) return;
    const auto& fb = *static_cast<const MelFilterbank*>(n.context.get());
    const std::size_t bins = fb.bins(), bands = fb.bands();
    const std::size_t frames = g.size() / bands;
    auto& out = *gi[0];
    for (std::size_t f = 0; f < frames; ++f) {
      std::span<double> row(out.data() + f * bins, bins);
      for (std::size_t b = 0; b < bands; ++b) {
        const auto w = fb.weights(b);
        kernels::axpy(g[f * bands + b], w, row.subspan(fb.first_bin(b), w.size()));
      }
    }
  });
}

}  // namespace fxchain::ad::detail
