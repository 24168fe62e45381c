#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace fxchain {

// Mono sample sequence at full scale +-1.0. Always non-empty and finite.
class AudioBuffer {
 public:
  AudioBuffer(std::vector<double> samples, int sample_rate);

  const std::vector<double>& samples() const noexcept { return samples_; }
  std::span<const double> view() const noexcept { return samples_; }
  int sample_rate() const noexcept { return sample_rate_; }
  std::size_t size() const noexcept { return samples_.size(); }
  double operator[](std::size_t i) const noexcept { return samples_[i]; }
  double duration() const noexcept { return static_cast<double>(samples_.size()) / sample_rate_; }

  bool operator==(const AudioBuffer&) const = default;

 private:
  std::vector<double> samples_;
  int sample_rate_;
};

inline constexpr int kDefaultSampleRate = 44100;
// Below this level (full scale) a signal counts as silent.
inline constexpr double kSilenceThreshold = 1e-9;

double peak(std::span<const double> x);
double rms(std::span<const double> x);
inline double peak(const AudioBuffer& x) { return peak(x.view()); }
inline double rms(const AudioBuffer& x) { return rms(x.view()); }

// Scales to max |sample| = 1. Inputs quieter than kSilenceThreshold pass through.
AudioBuffer peak_normalize(const AudioBuffer& x);
std::vector<double> peak_normalize(std::span<const double> x);

// Scales to unit RMS. Throws Errc::SilentSignal for silent input.
AudioBuffer rms_normalize(const AudioBuffer& x);
std::vector<double> rms_normalize(std::span<const double> x);

// Per-sample mean of equally long, equally sampled channels.
AudioBuffer mono_downmix(std::span<const AudioBuffer> channels);

enum class SignalKind { Sine, Sweep, WhiteNoise, Impulse };

SignalKind parse_signal_kind(std::string_view name);

// Deterministic in (kind, duration, seed, sample_rate); peak <= 1.
// Sine is 1 kHz, the sweep is exponential from 20 Hz to 0.45 fs.
AudioBuffer gen_test_signal(SignalKind kind, double duration_s, std::uint64_t seed,
                            int sample_rate = kDefaultSampleRate);

inline std::size_t samples_for(double duration_s, int sample_rate) {
  return static_cast<std::size_t>(duration_s * sample_rate + 0.5);
}

}  // namespace fxchain
