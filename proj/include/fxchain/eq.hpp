#pragma once

// Parametric (low shelf, 3 peaks, high shelf) and 10-band graphic equalizers.
// Bands are RBJ cookbook biquads. The time-domain path runs the cascade in
// transposed direct form II; the frequency-sampled path multiplies the
// zero-padded spectrum of the input by the sampled cascade response.

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "fxchain/autodiff.hpp"
#include "fxchain/params.hpp"
#include "fxchain/signal.hpp"

namespace fxchain::eq {

enum class BandKind { LowShelf, Peak, HighShelf, Graphic };

// a0 normalised to 1.
struct BiquadCoeffs {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0, a1 = 0.0, a2 = 0.0;
};

// Q of a peaking band with the given bandwidth in octaves (2 octaves -> 2/3).
inline double bandwidth_to_q(double octaves) {
  return 1.0 / (2.0 * std::sinh(std::numbers::ln2 / 2.0 * octaves));
}

inline constexpr double kGraphicBandwidthOctaves = 2.0;

// Cookbook formulas, generic over double and ad::Var.
// Returns {b0, b1, b2, a1, a2} divided by a0.
template <class T>
std::array<T, 5> cookbook(BandKind kind, T fc, T gain_db, T q, double fs) {
  using std::cos;
  using std::exp;
  using std::sin;
  using std::sqrt;
  const T A = exp(gain_db * (std::numbers::ln10 / 40.0));
  const T w0 = fc * (2.0 * std::numbers::pi / fs);
  const T cw = cos(w0);
  const T alpha = sin(w0) / (q * 2.0);
  switch (kind) {
    case BandKind::Peak:
    case BandKind::Graphic: {
      const T a0 = 1.0 + alpha / A;
      return {(1.0 + alpha * A) / a0, (cw * -2.0) / a0, (1.0 - alpha * A) / a0, (cw * -2.0) / a0,
              (1.0 - alpha / A) / a0};
    }
    case BandKind::LowShelf: {
      const T sa = sqrt(A) * alpha * 2.0;
      const T ap = A + 1.0, am = A - 1.0;
      const T a0 = ap + am * cw + sa;
      return {A * (ap - am * cw + sa) / a0, A * (am - ap * cw) * 2.0 / a0, A * (ap - am * cw - sa) / a0,
              (am + ap * cw) * -2.0 / a0, (ap + am * cw - sa) / a0};
    }
    case BandKind::HighShelf: {
      const T sa = sqrt(A) * alpha * 2.0;
      const T ap = A + 1.0, am = A - 1.0;
      const T a0 = ap - am * cw + sa;
      return {A * (ap + am * cw + sa) / a0, A * (am + ap * cw) * -2.0 / a0, A * (ap + am * cw - sa) / a0,
              (am - ap * cw) * 2.0 / a0, (ap - am * cw - sa) / a0};
    }
  }
  return {};
}

// Throws Errc::FrequencyOutOfRange unless 0 < fc < fs/2, InvalidArgument unless q > 0.
BiquadCoeffs design_band(BandKind kind, double fc, double gain_db, double q, double fs);

// Complex response of the cascade at w_k = pi k / (n_bins - 1), k = 0..n_bins-1.
std::vector<std::complex<double>> freq_response(std::span<const BiquadCoeffs> cascade, std::size_t n_bins);

struct Band {
  BandKind kind;
  double center_hz = 0.0;  // fixed centre, graphic bands only
};

struct EqDefinition {
  std::vector<Band> bands;

  static EqDefinition parametric();
  static EqDefinition graphic();

  bool is_graphic() const { return !bands.empty() && bands.front().kind == BandKind::Graphic; }
  // 3 per parametric band (freq, gain, q), 1 per graphic band (gain).
  std::size_t param_count() const;
  // p is denormalized.
  std::vector<BiquadCoeffs> design(std::span<const double> p, double fs) const;
};

// Graphic centres 31.25 * 2^k Hz, k = 0..9.
double graphic_center(int k);

// FFT size used by the frequency-sampled path: next power of two >= 2 len.
std::size_t frequency_sampling_size(std::size_t len);

std::vector<double> filter_cascade(std::span<const double> x, std::span<const BiquadCoeffs> cascade);

AudioBuffer apply_time_domain(const AudioBuffer& x, const EqDefinition& eq, const ParamVector& p);
AudioBuffer apply_frequency_sampled(const AudioBuffer& x, const EqDefinition& eq, const ParamVector& p);

// Differentiable frequency-sampled path; p is a denormalized Var.
ad::Var apply_frequency_sampled(ad::Var x, const EqDefinition& eq, ad::Var p, double fs);

// Response of one biquad with coefficient Var {b0,b1,b2,a1,a2} on the n-point
// FFT grid, as n/2 + 1 interleaved complex bins.
ad::Var biquad_response(ad::Var coeffs, std::size_t n);

}  // namespace fxchain::eq
