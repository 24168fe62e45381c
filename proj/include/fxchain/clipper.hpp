#pragma once

// Memoryless clippers: a hardness-blended tanh / cubic / hard clipper with
// input gain and DC-corrected offset, and two polynomial waveshapers
// (monomial basis via Horner, Chebyshev basis via Clenshaw).

#include <span>
#include <vector>

#include "fxchain/autodiff.hpp"
#include "fxchain/signal.hpp"

namespace fxchain::clipper {

inline constexpr double kCubicKnee = 1.5;

double f_hard(double x);
// x - 4x^3/27 on [-3/2, 3/2], sgn(x) outside. Odd, C1, saturates at +-1.
double f_cubic(double x);
// h in [0,1]: (1-h) tanh + h cubic; h in (1,2]: (2-h) cubic + (h-1) hard.
// Throws Errc::HardnessOutOfRange outside [0,2].
double blend(double x, double h);

struct ParametricClipperParams {
  double gain_db = 0.0;
  double offset = 0.0;
  double hardness = 0.0;
};

struct PolynomialClipperParams {
  std::vector<double> coefficients;  // g_0 .. g_{H-1}
};

// y = (f(g x + o, h) - f(o, h)) / g with g = 10^(gain_db / 20).
AudioBuffer clip_parametric(const AudioBuffer& x, const ParametricClipperParams& p);
std::vector<double> clip_parametric(std::span<const double> x, const ParametricClipperParams& p);

double taylor_eval(std::span<const double> g, double x);
double chebyshev_eval(std::span<const double> g, double x);
// T_n(x) by the three-term recurrence.
double chebyshev_t(int n, double x);

AudioBuffer clip_taylor(const AudioBuffer& x, const PolynomialClipperParams& p);
AudioBuffer clip_chebyshev(const AudioBuffer& x, const PolynomialClipperParams& p);
std::vector<double> clip_taylor(std::span<const double> x, std::span<const double> g);
std::vector<double> clip_chebyshev(std::span<const double> x, std::span<const double> g);

// Differentiable path.
ad::Var cubic_clip(ad::Var x);
ad::Var hard_clip(ad::Var x);
// Subgradient at h = 1 taken from the lower branch.
ad::Var blend(ad::Var x, ad::Var h);
ad::Var clip_parametric(ad::Var x, ad::Var gain_db, ad::Var offset, ad::Var hardness);
ad::Var polyval(ad::Var x, ad::Var coefficients);
ad::Var chebval(ad::Var x, ad::Var coefficients);

}  // namespace fxchain::clipper
