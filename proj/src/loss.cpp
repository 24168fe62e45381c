#include "fxchain/loss.hpp"

#include <cmath>

#include "fxchain/error.hpp"

namespace fxchain {
namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) throw Error(Errc::LengthMismatch, "length mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
}

std::vector<double> normalized_or_silent(std::span<const double> x) {
  if (rms(x) < kSilenceThreshold) return {x.begin(), x.end()};
  return rms_normalize(x);
}

}  // namespace

double loss_mel_l1(std::span<const double> y_hat, std::span<const double> y, const MelConfig& cfg) {
  check_lengths(y_hat.size(), y.size());
  const auto a = log_mel(y_hat, cfg);
  const auto b = log_mel(y, cfg);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

double loss_mel_l1(const AudioBuffer& y_hat, const AudioBuffer& y, const MelConfig& cfg) {
  return loss_mel_l1(y_hat.view(), y.view(), cfg);
}

double mse_audio(std::span<const double> y_hat, std::span<const double> y) {
  check_lengths(y_hat.size(), y.size());
  if (y.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y_hat[i] - y[i];
    s += d * d;
  }
  return s / static_cast<double>(y.size());
}

double mse_audio(const AudioBuffer& y_hat, const AudioBuffer& y) { return mse_audio(y_hat.view(), y.view()); }

double mse_params(std::span<const double> q_hat, std::span<const double> q) {
  check_lengths(q_hat.size(), q.size());
  if (q.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double d = q_hat[i] - q[i];
    s += d * d;
  }
  return s / static_cast<double>(q.size());
}

double mse_params(const ParamVector& q_hat, const ParamVector& q) {
  if (q_hat.kind != ParamKind::Normalized || q.kind != ParamKind::Normalized) {
    throw Error(Errc::InvalidArgument, "parameter loss takes normalized vectors");
  }
  return mse_params(std::span<const double>(q_hat.values), std::span<const double>(q.values));
}

AudioMetrics audio_metrics(std::span<const double> y_hat, std::span<const double> y, const MelConfig& cfg) {
  check_lengths(y_hat.size(), y.size());
  const auto a = normalized_or_silent(y_hat);
  const auto b = normalized_or_silent(y);
  return {mse_audio(a, b), loss_mel_l1(a, b, cfg)};
}

MelL1Objective::MelL1Objective(std::span<const double> y, const MelConfig& cfg)
    : cfg_(cfg), length_(y.size()), target_(log_mel(normalized_or_silent(y), cfg)) {}

ad::Var MelL1Objective::operator()(ad::Var y_hat) const {
  check_lengths(y_hat.size(), length_);
  ad::Tape& tape = *y_hat.tape();
  const ad::Var scaled = rms(y_hat.value()) < kSilenceThreshold ? y_hat : ad::rms_normalize(y_hat);
  return ad::l1_mean(log_mel(scaled, cfg_), tape.constant(target_));
}

}  // namespace fxchain
