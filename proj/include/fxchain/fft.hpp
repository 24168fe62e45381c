#pragma once

// Real-input FFT helpers over FFTW. Spectra are interleaved complex
// (re0, im0, re1, im1, ...) with n/2 + 1 bins for transform size n.

#include <cstddef>
#include <span>
#include <vector>

namespace fxchain::fft {

std::size_t next_pow2(std::size_t n);

// Forward transform of x zero-padded (or truncated) to n samples.
std::vector<double> rfft(std::span<const double> x, std::size_t n);

// Inverse transform (scaled by 1/n) of a half spectrum, first out_len samples.
// The imaginary parts of the DC and Nyquist bins are ignored.
std::vector<double> irfft(std::span<const double> spectrum, std::size_t n, std::size_t out_len);

// Adjoint of rfft(., n) restricted to the first in_len input samples.
std::vector<double> rfft_adjoint(std::span<const double> grad_spectrum, std::size_t n, std::size_t in_len);

// Adjoint of irfft(., n, out_len); returns a half-spectrum cotangent.
std::vector<double> irfft_adjoint(std::span<const double> grad_time, std::size_t n);

}  // namespace fxchain::fft
