#include "fxchain/clipper.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fxchain/error.hpp"
#include "primitives.hpp"

namespace fxchain::clipper {
namespace {

double d_cubic(double x) { return std::abs(x) <= kCubicKnee ? 1.0 - 4.0 * x * x / 9.0 : 0.0; }
double d_hard(double x) { return std::abs(x) < 1.0 ? 1.0 : 0.0; }

void check_hardness(double h) {
  if (!(h >= 0.0 && h <= 2.0)) throw Error(Errc::HardnessOutOfRange, "hardness " + std::to_string(h) + " outside [0,2]");
}

double db_to_amp(double db) { return std::exp(db * std::numbers::ln10 / 20.0); }

}  // namespace

double f_hard(double x) { return std::max(-1.0, std::min(1.0, x)); }

double f_cubic(double x) {
  if (std::abs(x) <= kCubicKnee) return x - 4.0 * x * x * x / 27.0;
  return x > 0.0 ? 1.0 : -1.0;
}

double blend(double x, double h) {
  check_hardness(h);
  if (h <= 1.0) return (1.0 - h) * std::tanh(x) + h * f_cubic(x);
  return (2.0 - h) * f_cubic(x) + (h - 1.0) * f_hard(x);
}

std::vector<double> clip_parametric(std::span<const double> x, const ParametricClipperParams& p) {
  check_hardness(p.hardness);
  const double g = db_to_amp(p.gain_db);
  const double dc = blend(p.offset, p.hardness);
  std::vector<double> y(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) y[n] = (blend(x[n] * g + p.offset, p.hardness) - dc) / g;
  return y;
}

AudioBuffer clip_parametric(const AudioBuffer& x, const ParametricClipperParams& p) {
  return {clip_parametric(x.view(), p), x.sample_rate()};
}

double taylor_eval(std::span<const double> g, double x) {
  double y = 0.0;
  for (std::size_t h = g.size(); h-- > 0;) y = y * x + g[h];
  return y;
}

double chebyshev_eval(std::span<const double> g, double x) {
  if (g.empty()) return 0.0;
  double b1 = 0.0, b2 = 0.0;
  for (std::size_t k = g.size() - 1; k >= 1; --k) {
    const double b0 = g[k] + 2.0 * x * b1 - b2;
    b2 = b1;
    b1 = b0;
  }
  return g[0] + x * b1 - b2;
}

double chebyshev_t(int n, double x) {
  if (n == 0) return 1.0;
  double prev = 1.0, cur = x;
  for (int k = 2; k <= n; ++k) {
    const double next = 2.0 * x * cur - prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

std::vector<double> clip_taylor(std::span<const double> x, std::span<const double> g) {
  std::vector<double> y(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) y[n] = taylor_eval(g, x[n]);
  return y;
}

std::vector<double> clip_chebyshev(std::span<const double> x, std::span<const double> g) {
  std::vector<double> y(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) y[n] = chebyshev_eval(g, x[n]);
  return y;
}

AudioBuffer clip_taylor(const AudioBuffer& x, const PolynomialClipperParams& p) {
  return {clip_taylor(x.view(), p.coefficients), x.sample_rate()};
}

AudioBuffer clip_chebyshev(const AudioBuffer& x, const PolynomialClipperParams& p) {
  return {clip_chebyshev(x.view(), p.coefficients), x.sample_rate()};
}

namespace {

ad::Var elementwise(const char* op, ad::Var x, double (*f)(double)) {
  ad::Node node;
  node.op = op;
  const auto& xv = x.value();
  node.value.resize(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) node.value[i] = f(xv[i]);
  node.inputs = {x.index()};
  return x.tape()->record(std::move(node));
}

ad::Var polynomial(const char* op, ad::Var x, ad::Var g, double (*eval)(std::span<const double>, double)) {
  ad::Tape& tape = ad::detail::tape_of({x, g});
  ad::Node node;
  node.op = op;
  const auto& xv = x.value();
  node.value.resize(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) node.value[i] = eval(g.value(), xv[i]);
  node.inputs = {x.index(), g.index()};
  return tape.record(std::move(node));
}

}  // namespace

ad::Var cubic_clip(ad::Var x) { return elementwise("cubic_clip", x, f_cubic); }
ad::Var hard_clip(ad::Var x) { return elementwise("hard_clip", x, f_hard); }

ad::Var blend(ad::Var x, ad::Var h) {
  const double hv = h.item();
  check_hardness(hv);
  if (hv <= 1.0) return (1.0 - h) * ad::tanh(x) + h * cubic_clip(x);
  return (2.0 - h) * cubic_clip(x) + (h - 1.0) * hard_clip(x);
}

ad::Var clip_parametric(ad::Var x, ad::Var gain_db, ad::Var offset, ad::Var hardness) {
  ad::Var g = ad::exp(gain_db * (std::numbers::ln10 / 20.0));
  ad::Var shaped = blend(x * g + offset, hardness);
  return (shaped - blend(offset, hardness)) / g;
}

ad::Var polyval(ad::Var x, ad::Var coefficients) { return polynomial("polyval", x, coefficients, taylor_eval); }
ad::Var chebval(ad::Var x, ad::Var coefficients) { return polynomial("chebval", x, coefficients, chebyshev_eval); }

}  // namespace fxchain::clipper

namespace fxchain::ad::detail {

void register_clipper(PrimitiveRegistry& r) {
  using G = std::span<const double>;
  using Grads = std::span<std::vector<double>* const>;
  r.define("cubic_clip", [](const Tape& t, const Node& n, G g, Grads gi) {
    if (gi[0] == nullptr) return;
    const auto& x = t.node(n.inputs[0]).value;
    for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] * clipper::d_cubic(x[i]);
  });
  r.define("hard_clip", [](const Tape& t, const Node& n, G g, Grads gi) {
    if (gi[0] == nullptr) return;
    const auto& x = t.node(n.inputs[0]).value;
    for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] * clipper::d_hard(x[i]);
  });
  r.define("polyval", [](const Tape& t, const Node& n, G g, Grads gi) {
    const auto& x = t.node(n.inputs[0]).value;
    const auto& c = t.node(n.inputs[1]).value;
    const std::size_t order = c.size();
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (gi[0] != nullptr) {
        double d = 0.0;
        for (std::size_t h = order; h-- > 1;) d = d * x[i] + static_cast<double>(h) * c[h];
        (*gi[0])[i] += g[i] * d;
      }
      if (gi[1] != nullptr) {
        double pw = 1.0;
        for (std::size_t h = 0; h < order; ++h) {
          (*gi[1])[h] += g[i] * pw;
          pw *= x[i];
        }
      }
    }
  });
  r.define("chebval", [](const Tape& t, const Node& n, G g, Grads gi) {
    const auto& x = t.node(n.inputs[0]).value;
    const auto& c = t.node(n.inputs[1]).value;
    const std::size_t order = c.size();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double xi = x[i];
      // T_h and U_{h-1}; T_h' = h U_{h-1}.
      double t_prev = 1.0, t_cur = xi;
      double u_prev = 0.0, u_cur = 1.0;  // U_{-1}, U_0
      double dx = 0.0;
      for (std::size_t h = 0; h < order; ++h) {
        double th, uh1;
        if (h == 0) {
          th = 1.0;
          uh1 = 0.0;
        } else if (h == 1) {
          th = xi;
          uh1 = 1.0;
        } else {
          const double t_next = 2.0 * xi * t_cur - t_prev;
          t_prev = t_cur;
          t_cur = t_next;
          const double u_next = h == 2 ? 2.0 * xi : 2.0 * xi * u_cur - u_prev;
          u_prev = u_cur;
          u_cur = u_next;
          th = t_cur;
          uh1 = u_cur;
        }
        dx += c[h] * static_cast<double>(h) * uh1;
        accumulate(gi[1], h, g[i] * th);
      }
      accumulate(gi[0], i, g[i] * dx);
    }
  });
}

}  // namespace fxchain::ad::detail
