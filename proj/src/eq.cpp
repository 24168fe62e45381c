#include "fxchain/eq.hpp"

#include <map>
#include <memory>
#include <string>

#include "fxchain/error.hpp"
#include "fxchain/fft.hpp"
#include "fxchain/kernels.hpp"
#include "primitives.hpp"

namespace fxchain::eq {
namespace {

struct Grid {
  // e^{-i w_k} and e^{-2 i w_k} for w_k = 2 pi k / n.
  std::vector<std::complex<double>> z1, z2;
};

std::shared_ptr<const Grid> grid_for(std::size_t n) {
  static thread_local std::map<std::size_t, std::shared_ptr<const Grid>> cache;
  if (auto it = cache.find(n); it != cache.end()) return it->second;
  auto g = std::make_shared<Grid>();
  const std::size_t bins = n / 2 + 1;
  g->z1.resize(bins);
  g->z2.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    const double w = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    g->z1[k] = std::polar(1.0, -w);
    g->z2[k] = std::polar(1.0, -2.0 * w);
  }
  cache.emplace(n, g);
  return g;
}

std::complex<double> response_at(const BiquadCoeffs& c, std::complex<double> z1, std::complex<double> z2) {
  return (c.b0 + c.b1 * z1 + c.b2 * z2) / (1.0 + c.a1 * z1 + c.a2 * z2);
}

void check_params(const EqDefinition& eq, std::size_t n) {
  if (n != eq.param_count()) {
    throw Error(Errc::LengthMismatch, "equalizer expects " + std::to_string(eq.param_count()) + " parameters");
  }
}

}  // namespace

BiquadCoeffs design_band(BandKind kind, double fc, double gain_db, double q, double fs) {
  if (!(fc > 0.0 && fc < fs / 2.0)) {
    throw Error(Errc::FrequencyOutOfRange, "band frequency " + std::to_string(fc) + " Hz outside (0, fs/2)");
  }
  if (!(q > 0.0)) throw Error(Errc::InvalidArgument, "band Q must be positive");
  const auto c = cookbook<double>(kind, fc, gain_db, q, fs);
  return {c[0], c[1], c[2], c[3], c[4]};
}

std::vector<std::complex<double>> freq_response(std::span<const BiquadCoeffs> cascade, std::size_t n_bins) {
  if (n_bins < 2) throw Error(Errc::InvalidArgument, "freq_response needs at least 2 bins");
  std::vector<std::complex<double>> h(n_bins, 1.0);
  for (std::size_t k = 0; k < n_bins; ++k) {
    const double w = std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_bins - 1);
    const auto z1 = std::polar(1.0, -w);
    const auto z2 = std::polar(1.0, -2.0 * w);
    for (const auto& c : cascade) h[k] *= response_at(c, z1, z2);
  }
  return h;
}

double graphic_center(int k) { return 31.25 * std::ldexp(1.0, k); }

EqDefinition EqDefinition::parametric() {
  return {{{BandKind::LowShelf}, {BandKind::Peak}, {BandKind::Peak}, {BandKind::Peak}, {BandKind::HighShelf}}};
}

EqDefinition EqDefinition::graphic() {
  EqDefinition eq;
  for (int k = 0; k < 10; ++k) eq.bands.push_back({BandKind::Graphic, graphic_center(k)});
  return eq;
}

std::size_t EqDefinition::param_count() const { return is_graphic() ? bands.size() : 3 * bands.size(); }

std::vector<BiquadCoeffs> EqDefinition::design(std::span<const double> p, double fs) const {
  check_params(*this, p.size());
  std::vector<BiquadCoeffs> out;
  const double graphic_q = bandwidth_to_q(kGraphicBandwidthOctaves);
  for (std::size_t b = 0; b < bands.size(); ++b) {
    if (bands[b].kind == BandKind::Graphic) {
      out.push_back(design_band(BandKind::Graphic, bands[b].center_hz, p[b], graphic_q, fs));
    } else {
      out.push_back(design_band(bands[b].kind, p[3 * b], p[3 * b + 1], p[3 * b + 2], fs));
    }
  }
  return out;
}

std::size_t frequency_sampling_size(std::size_t len) { return fft::next_pow2(2 * len); }

std::vector<double> filter_cascade(std::span<const double> x, std::span<const BiquadCoeffs> cascade) {
  std::vector<double> y(x.begin(), x.end());
  for (const auto& c : cascade) {
    double z1 = 0.0, z2 = 0.0;
    for (double& s : y) {
      const double in = s;
      const double out = c.b0 * in + z1;
      z1 = c.b1 * in - c.a1 * out + z2;
      z2 = c.b2 * in - c.a2 * out;
      s = out;
    }
  }
  return y;
}

AudioBuffer apply_time_domain(const AudioBuffer& x, const EqDefinition& eq, const ParamVector& p) {
  const auto cascade = eq.design(p.values, x.sample_rate());
  return {filter_cascade(x.view(), cascade), x.sample_rate()};
}

AudioBuffer apply_frequency_sampled(const AudioBuffer& x, const EqDefinition& eq, const ParamVector& p) {
  const auto cascade = eq.design(p.values, x.sample_rate());
  const std::size_t n = frequency_sampling_size(x.size());
  auto spec = fft::rfft(x.view(), n);
  const auto grid = grid_for(n);
  for (std::size_t k = 0; k < grid->z1.size(); ++k) {
    std::complex<double> h = 1.0;
    for (const auto& c : cascade) h *= response_at(c, grid->z1[k], grid->z2[k]);
    const std::complex<double> y = std::complex<double>(spec[2 * k], spec[2 * k + 1]) * h;
    spec[2 * k] = y.real();
    spec[2 * k + 1] = y.imag();
  }
  return {fft::irfft(spec, n, x.size()), x.sample_rate()};
}

ad::Var biquad_response(ad::Var coeffs, std::size_t n) {
  if (coeffs.size() != 5) throw Error(Errc::ShapeMismatch, "biquad_response expects 5 coefficients");
  auto grid = grid_for(n);
  const auto& c = coeffs.value();
  const BiquadCoeffs bq{c[0], c[1], c[2], c[3], c[4]};
  ad::Node node;
  node.op = "biquad_response";
  node.value.resize(2 * grid->z1.size());
  for (std::size_t k = 0; k < grid->z1.size(); ++k) {
    const auto h = response_at(bq, grid->z1[k], grid->z2[k]);
    node.value[2 * k] = h.real();
    node.value[2 * k + 1] = h.imag();
  }
  node.inputs = {coeffs.index()};
  node.context = grid;
  return coeffs.tape()->record(std::move(node));
}

ad::Var apply_frequency_sampled(ad::Var x, const EqDefinition& eq, ad::Var p, double fs) {
  check_params(eq, p.size());
  ad::Tape& tape = ad::detail::tape_of({x, p});
  const std::size_t n = frequency_sampling_size(x.size());
  const double graphic_q = bandwidth_to_q(kGraphicBandwidthOctaves);
  ad::Var response;
  for (std::size_t b = 0; b < eq.bands.size(); ++b) {
    std::array<ad::Var, 5> c;
    const auto& band = eq.bands[b];
    if (band.kind == BandKind::Graphic) {
      c = cookbook<ad::Var>(band.kind, tape.constant(band.center_hz), ad::element(p, b), tape.constant(graphic_q), fs);
    } else {
      c = cookbook<ad::Var>(band.kind, ad::element(p, 3 * b), ad::element(p, 3 * b + 1), ad::element(p, 3 * b + 2), fs);
    }
    ad::Var h = biquad_response(ad::concat(c), n);
    response = response.valid() ? ad::cmul(response, h) : h;
  }
  ad::Var spectrum = ad::rfft(x, n);
  if (response.valid()) spectrum = ad::cmul(spectrum, response);
  return ad::irfft(spectrum, n, x.size());
}

}  // namespace fxchain::eq

namespace fxchain::ad::detail {

void register_eq(PrimitiveRegistry& r) {
  r.define("biquad_response", [](const Tape& t, const Node& n, std::span<const double> g,
                                 std::span<std::vector<double>* const> gi) {
    if (gi[0] == nullptr) return;
    const auto& grid = *static_cast<const eq::Grid*>(n.context.get());
    const auto& c = t.node(n.inputs[0]).value;
    double db0 = 0, db1 = 0, db2 = 0, da1 = 0, da2 = 0;
    for (std::size_t k = 0; k < grid.z1.size(); ++k) {
      const auto z1 = grid.z1[k], z2 = grid.z2[k];
      const std::complex<double> den = 1.0 + c[3] * z1 + c[4] * z2;
      const std::complex<double> h(n.value[2 * k], n.value[2 * k + 1]);
      // dL/dtheta = Re(conj(G) dH/dtheta)
      const std::complex<double> gc(g[2 * k], -g[2 * k + 1]);
      const std::complex<double> u = gc / den;
      db0 += u.real();
      db1 += (u * z1).real();
      db2 += (u * z2).real();
      da1 -= (u * h * z1).real();
      da2 -= (u * h * z2).real();
    }
    auto& out = *gi[0];
    out[0] += db0;
    out[1] += db1;
    out[2] += db2;
    out[3] += da1;
    out[4] += da2;
  });
}

}  // namespace fxchain::ad::detail
