#pragma once

// Feed-forward compressor: instantaneous level detector in dB, quadratic
// soft-knee gain computer, smooth branching one-pole on the gain in dB,
// linear-domain multiply. Starts from zero gain reduction on every call.

#include <span>
#include <vector>

#include "fxchain/autodiff.hpp"
#include "fxchain/signal.hpp"

namespace fxchain::dynamics {

struct CompressorParams {
  double threshold_db = 0.0;
  double ratio = 1.0;
  double attack_ms = 10.0;
  double release_ms = 100.0;
  double knee_db = 0.0;
};

// Attack and release share one time constant.
struct SimplifiedCompressorParams {
  double threshold_db = 0.0;
  double ratio = 1.0;
  double time_ms = 10.0;
  double knee_db = 0.0;
};

// Level floor of the detector, 1e-6 full scale (-120 dB).
inline constexpr double kLevelFloor = 1e-6;

// Gain (<= 0 dB) to add to a signal at level_db.
double static_gain_db(double level_db, double threshold_db, double ratio, double knee_db);

// One-pole coefficient exp(-1 / (tau * fs / 1000)), tau in ms.
double smoothing_coefficient(double time_ms, double fs);

// Smoothed gain trajectory in dB.
std::vector<double> gain_envelope_db(std::span<const double> x, const CompressorParams& p, double fs);

std::vector<double> compress(std::span<const double> x, const CompressorParams& p, double fs);
AudioBuffer compress(const AudioBuffer& x, const CompressorParams& p);
AudioBuffer compress_simplified(const AudioBuffer& x, const SimplifiedCompressorParams& p);

// Differentiable path.
ad::Var gain_computer(ad::Var level_db, ad::Var threshold_db, ad::Var ratio, ad::Var knee_db);
// y[n] = a y[n-1] + (1 - a) g[n], a = alpha_attack while g falls below y, else alpha_release.
ad::Var smooth_branching(ad::Var target_db, ad::Var alpha_attack, ad::Var alpha_release);
ad::Var compress(ad::Var x, ad::Var threshold_db, ad::Var ratio, ad::Var attack_ms, ad::Var release_ms,
                 ad::Var knee_db, double fs);

}  // namespace fxchain::dynamics
