#include <algorithm>
#include <array>
#include <map>
#include <cmath>
#include <numbers>

#include "fxchain/autodiff.hpp"
#include "fxchain/error.hpp"
#include "fxchain/fft.hpp"
#include "fxchain/kernels.hpp"
#include "fxchain/signal.hpp"
#include "primitives.hpp"

namespace fxchain::ad {
namespace {

using detail::accumulate;
using detail::tape_of;

Var make(std::string op, std::vector<double> value, std::initializer_list<Var> inputs,
         std::array<double, 4> constants = {}) {
  Tape& t = tape_of(inputs);
  Node n;
  n.op = std::move(op);
  n.value = std::move(value);
  n.constants = constants;
  for (const Var& v : inputs) n.inputs.push_back(v.index());
  return t.record(std::move(n));
}

std::size_t broadcast_size(std::size_t na, std::size_t nb, const char* op) {
  if (na == nb || nb == 1) return na;
  if (na == 1) return nb;
  throw Error(Errc::ShapeMismatch, std::string(op) + ": operands of length " + std::to_string(na) + " and " +
                                       std::to_string(nb) + " do not broadcast");
}

// Sums a full-length cotangent into an input of length 1 or n.
void reduce_into(std::vector<double>* g, std::span<const double> contrib) {
  if (g == nullptr) return;
  if (g->size() == contrib.size()) {
    for (std::size_t i = 0; i < contrib.size(); ++i) (*g)[i] += contrib[i];
  } else {
    double s = 0.0;
    for (double c : contrib) s += c;
    (*g)[0] += s;
  }
}

template <class F>
Var binary(const char* op, Var a, Var b, F f) {
  const auto& av = a.value();
  const auto& bv = b.value();
  const std::size_t n = broadcast_size(av.size(), bv.size(), op);
  std::vector<double> out(n);
  const bool sa = av.size() == 1, sb = bv.size() == 1;
  for (std::size_t i = 0; i < n; ++i) out[i] = f(av[sa ? 0 : i], bv[sb ? 0 : i]);
  return make(op, std::move(out), {a, b});
}

struct Unary {
  const char* name;
  double (*f)(double);
  // Derivative from input x and output y.
  double (*df)(double x, double y);
};

constexpr Unary kUnary[] = {
    {"exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; }},
    {"log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; }},
    {"sin", [](double x) { return std::sin(x); }, [](double x, double) { return std::cos(x); }},
    {"cos", [](double x) { return std::cos(x); }, [](double x, double) { return -std::sin(x); }},
    {"sqrt", [](double x) { return std::sqrt(x); }, [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; }},
    {"tanh", [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; }},
    {"sigmoid",
     [](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
     [](double, double y) { return y * (1.0 - y); }},
    {"square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; }},
    {"abs", [](double x) { return std::abs(x); },
     [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }},
    {"reciprocal", [](double x) { return 1.0 / x; }, [](double, double y) { return -y * y; }},
};

const Unary& unary_entry(std::string_view name) {
  for (const auto& u : kUnary) {
    if (name == u.name) return u;
  }
  throw Error(Errc::UnregisteredPrimitive, std::string(name));
}

Var unary(std::string_view name, Var a) {
  const Unary& u = unary_entry(name);
  const auto& av = a.value();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = u.f(av[i]);
  return make(u.name, std::move(out), {a});
}

const std::vector<double>& hann_window(std::size_t n) {
  static thread_local std::map<std::size_t, std::vector<double>> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return cache.emplace(n, std::move(w)).first->second;
}

}  // namespace

Var add(Var a, Var b) { return binary("add", a, b, [](double x, double y) { return x + y; }); }
Var sub(Var a, Var b) { return binary("sub", a, b, [](double x, double y) { return x - y; }); }
Var mul(Var a, Var b) { return binary("mul", a, b, [](double x, double y) { return x * y; }); }
Var div(Var a, Var b) { return binary("div", a, b, [](double x, double y) { return x / y; }); }

Var affine(Var a, double scale, double shift) {
  const auto& av = a.value();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = scale * av[i] + shift;
  return make("affine", std::move(out), {a}, {scale, shift, 0.0, 0.0});
}

Var exp(Var a) { return unary("exp", a); }
Var log(Var a) { return unary("log", a); }
Var sin(Var a) { return unary("sin", a); }
Var cos(Var a) { return unary("cos", a); }
Var sqrt(Var a) { return unary("sqrt", a); }
Var tanh(Var a) { return unary("tanh", a); }
Var sigmoid(Var a) { return unary("sigmoid", a); }
Var square(Var a) { return unary("square", a); }
Var abs(Var a) { return unary("abs", a); }
Var reciprocal(Var a) { return unary("reciprocal", a); }

Var abs_floor(Var a, double floor) {
  const auto& av = a.value();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = std::max(std::abs(av[i]), floor);
  return make("abs_floor", std::move(out), {a}, {floor, 0.0, 0.0, 0.0});
}

Var sum(Var a) {
  double s = 0.0;
  for (double x : a.value()) s += x;
  return make("sum", {s}, {a});
}

Var mean(Var a) {
  double s = 0.0;
  for (double x : a.value()) s += x;
  return make("mean", {s / static_cast<double>(a.size())}, {a});
}

Var slice(Var a, std::size_t offset, std::size_t length) {
  const auto& av = a.value();
  if (offset + length > av.size()) throw Error(Errc::ShapeMismatch, "slice out of bounds");
  Tape& t = tape_of({a});
  Node n;
  n.op = "slice";
  n.value.assign(av.begin() + static_cast<std::ptrdiff_t>(offset),
                 av.begin() + static_cast<std::ptrdiff_t>(offset + length));
  n.inputs = {a.index()};
  n.constants[0] = static_cast<double>(offset);
  return t.record(std::move(n));
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw Error(Errc::InvalidArgument, "concat of nothing");
  Tape* t = parts.front().tape();
  Node n;
  n.op = "concat";
  for (const Var& p : parts) {
    if (p.tape() != t) throw Error(Errc::InvalidArgument, "concat across tapes");
    const auto& v = p.value();
    n.value.insert(n.value.end(), v.begin(), v.end());
    n.inputs.push_back(p.index());
  }
  return t->record(std::move(n));
}

Var cmul(Var a, Var b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.size() != bv.size() || av.size() % 2 != 0) throw Error(Errc::ShapeMismatch, "cmul needs equal complex lengths");
  std::vector<double> out(av.size());
  kernels::cmul(av, bv, out);
  return make("cmul", std::move(out), {a, b});
}

Var cabs(Var a) {
  const auto& av = a.value();
  if (av.size() % 2 != 0) throw Error(Errc::ShapeMismatch, "cabs needs an interleaved complex input");
  std::vector<double> out(av.size() / 2);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::hypot(av[2 * k], av[2 * k + 1]);
  return make("cabs", std::move(out), {a});
}

Var rfft(Var a, std::size_t n) {
  return make("rfft", fft::rfft(a.value(), n), {a}, {static_cast<double>(n), 0.0, 0.0, 0.0});
}

Var irfft(Var spectrum, std::size_t n, std::size_t out_len) {
  if (spectrum.size() != 2 * (n / 2 + 1)) throw Error(Errc::ShapeMismatch, "irfft spectrum length does not match n");
  return make("irfft", fft::irfft(spectrum.value(), n, out_len), {spectrum},
              {static_cast<double>(n), 0.0, 0.0, 0.0});
}

Var stft(Var a, std::size_t fft_size, std::size_t hop) {
  const auto& x = a.value();
  if (fft_size < 2 || hop == 0) throw Error(Errc::InvalidArgument, "stft needs fft_size >= 2 and hop >= 1");
  if (x.size() < fft_size) throw Error(Errc::TooShort, "signal shorter than one analysis frame");
  const std::size_t frames = 1 + (x.size() - fft_size) / hop;
  const std::size_t row = 2 * (fft_size / 2 + 1);
  const auto& w = hann_window(fft_size);
  std::vector<double> out(frames * row);
  std::vector<double> frame(fft_size);
  for (std::size_t m = 0; m < frames; ++m) {
    kernels::mul(std::span<const double>(x).subspan(m * hop, fft_size), w, frame);
    const auto spec = fft::rfft(frame, fft_size);
    std::copy(spec.begin(), spec.end(), out.begin() + static_cast<std::ptrdiff_t>(m * row));
  }
  return make("stft", std::move(out), {a},
              {static_cast<double>(fft_size), static_cast<double>(hop), static_cast<double>(frames), 0.0});
}

Var peak_normalize(Var a) {
  const auto& av = a.value();
  std::size_t arg = 0;
  double p = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    if (std::abs(av[i]) > p) {
      p = std::abs(av[i]);
      arg = i;
    }
  }
  std::vector<double> out(av);
  const bool silent = p < kSilenceThreshold;
  if (!silent) {
    for (double& s : out) s /= p;
  }
  return make("peak_normalize", std::move(out), {a}, {silent ? 0.0 : p, static_cast<double>(arg), 0.0, 0.0});
}

Var rms_normalize(Var a) {
  const double r = rms(a.value());
  if (!(r > kSilenceThreshold)) throw Error(Errc::SilentSignal, "cannot RMS-normalize a silent signal");
  std::vector<double> out(a.value());
  for (double& s : out) s /= r;
  return make("rms_normalize", std::move(out), {a}, {r, 0.0, 0.0, 0.0});
}

Var l1_mean(Var a, Var b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.size() != bv.size()) throw Error(Errc::LengthMismatch, "l1_mean operands differ in length");
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += std::abs(av[i] - bv[i]);
  return make("l1_mean", {s / static_cast<double>(av.size())}, {a, b});
}

Var mse(Var a, Var b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.size() != bv.size()) throw Error(Errc::LengthMismatch, "mse operands differ in length");
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += (av[i] - bv[i]) * (av[i] - bv[i]);
  return make("mse", {s / static_cast<double>(av.size())}, {a, b});
}

namespace detail {

void register_core(PrimitiveRegistry& r) {
  using Grads = std::span<std::vector<double>* const>;
  using G = std::span<const double>;

  r.define("add", [](const Tape&, const Node&, G g, Grads gi) {
    reduce_into(gi[0], g);
    reduce_into(gi[1], g);
  });
  r.define("sub", [](const Tape&, const Node&, G g, Grads gi) {
    reduce_into(gi[0], g);
    if (gi[1] != nullptr) {
      std::vector<double> neg(g.begin(), g.end());
      for (double& v : neg) v = -v;
      reduce_into(gi[1], neg);
    }
  });
  r.define("mul", [](const Tape& t, const Node& n, G g, Grads gi) {
    const auto& a = t.node(n.inputs[0]).value;
    const auto& b = t.node(n.inputs[1]).value;
    std::vector<double> c(g.size());
    if (gi[0] != nullptr) {
      for (std::size_t i = 0; i < g.size(); ++i) c[i] = g[i] * b[b.size() == 1 ? 0 : i];
      reduce_into(gi[0], c);
    }
    if (gi[1] != nullptr) {
      for (std::size_t i = 0; i < g.size(); ++i) c[i] = g[i] * a[a.size() == 1 ? 0 : i];
      reduce_into(gi[1], c);
    }
  });
  r.define("div", [](const Tape& t, const Node& n, G g, Grads gi) {
    const auto& b = t.node(n.inputs[1]).value;
    std::vector<double> c(g.size());
    if (gi[0] != nullptr) {
      for (std::size_t i = 0; i < g.size(); ++i) c[i] = g[i] / b[b.size() == 1 ? 0 : i];
      reduce_into(gi[0], c);
    }
    if (gi[1] != nullptr) {
      for (std::size_t i = 0; i < g.size(); ++i) c[i] = -g[i] * n.value[i] / b[b.size() == 1 ? 0 : i];
      reduce_into(gi[1], c);
    }
  });
  r.define("affine", [](const Tape&, const Node& n, G g, Grads gi) {
    if (gi[0] == nullptr) return;
    kernels::axpy(n.constants[0], g, *gi[0]);
  });
  for (const auto& u : kUnary) {
    r.define(u.name, [df = u.df](const Tape& t, const Node& n, G g, Grads gi) {
      if (gi[0] == nullptr) return;
      const auto& x = t.node(n.inputs[0]).value;
      auto& out = *gi[0];
      for (std::size_t i = 0; i < g.size(); ++i) out[i] += g[i] * df(x[i], n.value[i]);
    });
  }
  r.define("abs_floor", [](const Tape& t, const Node& n, G g, Grads gi) {
    if (gi[0] == nullptr) return;
    const auto& x = t.node(n.inputs[0]).value;
    const double floor = n.constants[0];
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (std::abs(x[i]) > floor) (*gi[0])[i] += x[i] > 0.0 ? g[i] : -g[i];
    }
  });
  r.define("sum", [](const Tape&, const Node&, G g, Grads gi) {
    if (gi[0] == nullptr) return;
    for (double& v : *gi[0]) v += g[0];
  });
  r.define("mean", [](const Tape&, const Node&, G g, Grads gi) {
    if (gi[0] == nullptr) return;
    const double s = g[0] / static_cast<double>(gi[0]->size());
    for (double& v : *gi[0]) v += s;
  });
  r.define("slice", [](const Tape&, const Node& n, G g, Grads gi) {
    if (gi[0] == nullptr) return;
    const auto off = static_cast<std::size_t>(n.constants[0]);
    for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[off + i] += g[i];
  });
  r.define("concat", [](const Tape& t, const Node& n, G g, Grads gi) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < gi.size(); ++k) {
      const std::size_t len = t.node(n.inputs[k]).value.size();
      if (gi[k] != nullptr) {
        for (std::size_t i = 0; i < len; ++i) (*gi[k])[i] += g[off + i];
      }
      off += len;
    }
  });
  r.define("cmul", [](const Tape& t, const Node& n, G g, Grads gi) {
    const auto& a = t.node(n.inputs[0]).value;
    const auto& b = t.node(n.inputs[1]).value;
    std::vector<double> c(g.size());
    if (gi[0] != nullptr) {
      kernels::cmul_conj(g, b, c);
      kernels::axpy(1.0, c, *gi[0]);
    }
    if (gi[1] != nullptr) {
      kernels::cmul_conj(g, a, c);
      kernels::axpy(1.0, c, *gi[1]);
    }
  });
  r.define("cabs", [](const Tape& t, const Node& n, G g, Grads gi) {
    if (gi[0] == nullptr) return;
    const auto& a = t.node(n.inputs[0]).value;
    auto& out = *gi[0];
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double m = n.value[k];
      if (m > 0.0) {
        out[2 * k] += g[k] * a[2 * k] / m;
        out[2 * k + 1] += g[k] * a[2 * k + 1] / m;
      }
    }
  });
  r.define("rfft", [](const Tape&, const Node& n, G g, Grads gi) {
    if (gi[0] == nullptr) return;
    const auto nfft = static_cast<std::size_t>(n.constants[0]);
    const auto dx = fft::rfft_adjoint(g, nfft, gi[0]->size());
    kernels::axpy(1.0, dx, *gi[0]);
  });
  r.define("irfft", [](const Tape&, const Node& n, G g, Grads gi) {
    if (gi[0] == nullptr) return;
    const auto nfft = static_cast<std::size_t>(n.constants[0]);
    const auto dX = fft::irfft_adjoint(g, nfft);
    kernels::axpy(1.0, dX, *gi[0]);
  });
  r.define("stft", [](const Tape&, const Node& n, G g, Grads gi) {
    if (gi[0] == nullptr) return;
    const auto nfft = static_cast<std::size_t>(n.constants[0]);
    const auto hop = static_cast<std::size_t>(n.constants[1]);
    const auto frames = static_cast<std::size_t>(n.constants[2]);
    const std::size_t row = 2 * (nfft / 2 + 1);
    const auto& w = hann_window(nfft);
    std::vector<double> windowed(nfft);
    auto& out = *gi[0];
    for (std::size_t m = 0; m < frames; ++m) {
      const auto dframe = fft::rfft_adjoint(g.subspan(m * row, row), nfft, nfft);
      kernels::mul(dframe, w, windowed);
      kernels::axpy(1.0, windowed, std::span<double>(out).subspan(m * hop, nfft));
    }
  });
  r.define("peak_normalize", [](const Tape& t, const Node& n, G g, Grads gi) {
    if (gi[0] == nullptr) return;
    const double p = n.constants[0];
    auto& out = *gi[0];
    if (p == 0.0) {
      for (std::size_t i = 0; i < g.size(); ++i) out[i] += g[i];
      return;
    }
    const auto arg = static_cast<std::size_t>(n.constants[1]);
    const auto& a = t.node(n.inputs[0]).value;
    double gy = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      out[i] += g[i] / p;
      gy += g[i] * n.value[i];
    }
    out[arg] -= (a[arg] > 0.0 ? 1.0 : -1.0) * gy / p;
  });
  r.define("rms_normalize", [](const Tape&, const Node& n, G g, Grads gi) {
    if (gi[0] == nullptr) return;
    const double rr = n.constants[0];
    const double len = static_cast<double>(g.size());
    const double gy = kernels::dot(g, n.value) / len;
    auto& out = *gi[0];
    for (std::size_t i = 0; i < g.size(); ++i) out[i] += (g[i] - n.value[i] * gy) / rr;
  });
  r.define("l1_mean", [](const Tape& t, const Node& n, G g, Grads gi) {
    const auto& a = t.node(n.inputs[0]).value;
    const auto& b = t.node(n.inputs[1]).value;
    const double s = g[0] / static_cast<double>(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a[i] - b[i];
      const double sg = d > 0.0 ? s : (d < 0.0 ? -s : 0.0);
      accumulate(gi[0], i, sg);
      accumulate(gi[1], i, -sg);
    }
  });
  r.define("mse", [](const Tape& t, const Node& n, G g, Grads gi) {
    const auto& a = t.node(n.inputs[0]).value;
    const auto& b = t.node(n.inputs[1]).value;
    const double s = 2.0 * g[0] / static_cast<double>(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = s * (a[i] - b[i]);
      accumulate(gi[0], i, d);
      accumulate(gi[1], i, -d);
    }
  });
}

}  // namespace detail
}  // namespace fxchain::ad
