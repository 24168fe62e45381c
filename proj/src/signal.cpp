#include "fxchain/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "fxchain/error.hpp"

namespace fxchain {

AudioBuffer::AudioBuffer(std::vector<double> samples, int sample_rate)
    : samples_(std::move(samples)), sample_rate_(sample_rate) {
  if (sample_rate_ <= 0) throw Error(Errc::InvalidAudio, "sample rate must be positive");
  if (samples_.empty()) throw Error(Errc::InvalidAudio, "audio buffer must hold at least one sample");
  for (double s : samples_) {
    if (!std::isfinite(s)) throw Error(Errc::InvalidAudio, "audio buffer holds a non-finite sample");
  }
}

double peak(std::span<const double> x) {
  double m = 0.0;
  for (double s : x) m = std::max(m, std::abs(s));
  return m;
}

double rms(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double s : x) acc += s * s;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

std::vector<double> peak_normalize(std::span<const double> x) {
  std::vector<double> out(x.begin(), x.end());
  const double p = peak(x);
  if (p < kSilenceThreshold) return out;
  const double g = 1.0 / p;
  for (double& s : out) s *= g;
  return out;
}

AudioBuffer peak_normalize(const AudioBuffer& x) { return {peak_normalize(x.view()), x.sample_rate()}; }

std::vector<double> rms_normalize(std::span<const double> x) {
  const double r = rms(x);
  if (!(r > kSilenceThreshold)) throw Error(Errc::SilentSignal, "cannot RMS-normalize a silent signal");
  std::vector<double> out(x.begin(), x.end());
  for (double& s : out) s /= r;
  return out;
}

AudioBuffer rms_normalize(const AudioBuffer& x) { return {rms_normalize(x.view()), x.sample_rate()}; }

AudioBuffer mono_downmix(std::span<const AudioBuffer> channels) {
  if (channels.empty()) throw Error(Errc::InvalidArgument, "downmix needs at least one channel");
  const std::size_t n = channels.front().size();
  const int fs = channels.front().sample_rate();
  for (const auto& c : channels) {
    if (c.size() != n) throw Error(Errc::MismatchedLength, "channels differ in length");
    if (c.sample_rate() != fs) throw Error(Errc::MismatchedLength, "channels differ in sample rate");
  }
  if (channels.size() == 1) return channels.front();
  std::vector<double> out(n, 0.0);
  for (const auto& c : channels) {
    for (std::size_t i = 0; i < n; ++i) out[i] += c[i];
  }
  const double scale = 1.0 / static_cast<double>(channels.size());
  for (double& s : out) s *= scale;
  return {std::move(out), fs};
}

SignalKind parse_signal_kind(std::string_view name) {
  if (name == "sine") return SignalKind::Sine;
  if (name == "sweep") return SignalKind::Sweep;
  if (name == "white-noise" || name == "noise") return SignalKind::WhiteNoise;
  if (name == "impulse") return SignalKind::Impulse;
  throw Error(Errc::InvalidArgument, "unknown test signal kind '" + std::string(name) + "'");
}

AudioBuffer gen_test_signal(SignalKind kind, double duration_s, std::uint64_t seed, int sample_rate) {
  if (!(duration_s > 0.0)) throw Error(Errc::InvalidArgument, "duration must be positive");
  const std::size_t n = std::max<std::size_t>(1, samples_for(duration_s, sample_rate));
  const double fs = sample_rate;
  std::vector<double> x(n, 0.0);
  switch (kind) {
    case SignalKind::Sine: {
      const double w = 2.0 * std::numbers::pi * 1000.0 / fs;
      for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(w * static_cast<double>(i));
      break;
    }
    case SignalKind::Sweep: {
      const double f0 = 20.0, f1 = 0.45 * fs;
      const double T = static_cast<double>(n) / fs;
      const double k = std::log(f1 / f0);
      for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / fs;
        x[i] = std::sin(2.0 * std::numbers::pi * f0 * T / k * (std::exp(t / T * k) - 1.0));
      }
      break;
    }
    case SignalKind::WhiteNoise: {
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      for (double& s : x) s = u(rng);
      break;
    }
    case SignalKind::Impulse:
      x[0] = 1.0;
      break;
  }
  return {std::move(x), sample_rate};
}

}  // namespace fxchain
