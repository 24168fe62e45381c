#include "fxchain/effects.hpp"

#include <algorithm>
#include <cmath>

#include "fxchain/clipper.hpp"
#include "fxchain/dynamics.hpp"
#include "fxchain/eq.hpp"
#include "fxchain/error.hpp"
#include "fxchain/proxy.hpp"

namespace fxchain {
namespace {

class EqEffect final : public Effect {
 public:
  EqEffect(std::string id, std::vector<ParamSpec> specs, eq::EqDefinition def, bool time_domain)
      : Effect(std::move(id), std::move(specs)), def_(std::move(def)), time_domain_(time_domain) {}

  std::vector<double> render(std::span<const double> x, std::span<const double> q, double fs) const override {
    const AudioBuffer in({x.begin(), x.end()}, static_cast<int>(fs));
    const ParamVector p{denormalized(q), ParamKind::Denormalized};
    return (time_domain_ ? eq::apply_time_domain(in, def_, p) : eq::apply_frequency_sampled(in, def_, p)).samples();
  }
  bool differentiable() const override { return !time_domain_; }
  ad::Var record(ad::Var x, ad::Var q, double fs) const override {
    if (time_domain_) throw Error(Errc::InvalidArgument, "effect '" + id() + "' is not differentiable");
    return eq::apply_frequency_sampled(x, def_, denormalize(q, specs()), fs);
  }
  // Bands sharing a frequency range would get identical gradients from a
  // common start and never separate; spread them across the range.
  std::vector<double> initial_q() const override {
    auto q = Effect::initial_q();
    const auto& s = specs();
    std::vector<bool> done(s.size(), false);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (done[i] || !s[i].name.ends_with(".freq")) continue;
      std::vector<std::size_t> group;
      for (std::size_t j = i; j < s.size(); ++j) {
        if (s[j].name.ends_with(".freq") && s[j].min == s[i].min && s[j].max == s[i].max) group.push_back(j);
      }
      if (group.size() < 2) continue;
      for (std::size_t k = 0; k < group.size(); ++k) {
        q[group[k]] = static_cast<double>(k + 1) / static_cast<double>(group.size() + 1);
        done[group[k]] = true;
      }
    }
    return q;
  }

 private:
  eq::EqDefinition def_;
  bool time_domain_;
};

class CompressorEffect final : public Effect {
 public:
  using Effect::Effect;

  std::vector<double> render(std::span<const double> x, std::span<const double> q, double fs) const override {
    const auto p = denormalized(q);
    return dynamics::compress(x, {p[0], p[1], p[2], p[3], p[4]}, fs);
  }
  ad::Var record(ad::Var x, ad::Var q, double fs) const override {
    const ad::Var p = denormalize(q, specs());
    return dynamics::compress(x, ad::element(p, 0), ad::element(p, 1), ad::element(p, 2), ad::element(p, 3),
                              ad::element(p, 4), fs);
  }
};

class SimplifiedCompressorEffect final : public Effect {
 public:
  using Effect::Effect;

  std::vector<double> render(std::span<const double> x, std::span<const double> q, double fs) const override {
    const auto p = denormalized(q);
    return dynamics::compress(x, {p[0], p[1], p[2], p[2], p[3]}, fs);
  }
  ad::Var record(ad::Var x, ad::Var q, double fs) const override {
    const ad::Var p = denormalize(q, specs());
    const ad::Var time = ad::element(p, 2);
    return dynamics::compress(x, ad::element(p, 0), ad::element(p, 1), time, time, ad::element(p, 3), fs);
  }
};

// Gradients through the proxy, audio through the DSP compressor.
class ProxyCompressorEffect final : public Effect {
 public:
  ProxyCompressorEffect(std::string id, std::vector<ParamSpec> specs, std::shared_ptr<const proxy::ProxyModel> model)
      : Effect(std::move(id), std::move(specs)), model_(std::move(model)) {}

  std::vector<double> render(std::span<const double> x, std::span<const double> q, double fs) const override {
    return proxy::hybrid_render(x, q, specs(), fs);
  }
  ad::Var record(ad::Var x, ad::Var q, double) const override { return proxy::proxy_compress(x, q, model_); }

 private:
  std::shared_ptr<const proxy::ProxyModel> model_;
};

class ParametricClipperEffect final : public Effect {
 public:
  using Effect::Effect;

  std::vector<double> render(std::span<const double> x, std::span<const double> q, double) const override {
    const auto p = denormalized(q);
    return clipper::clip_parametric(x, {p[0], p[1], p[2]});
  }
  ad::Var record(ad::Var x, ad::Var q, double) const override {
    const ad::Var p = denormalize(q, specs());
    return clipper::clip_parametric(x, ad::element(p, 0), ad::element(p, 1), ad::element(p, 2));
  }
  std::vector<bool> nonsmooth(std::span<const double> q, double eps) const override {
    auto out = Effect::nonsmooth(q, eps);
    // Hardness 1 joins the two blend branches.
    const auto& h = specs()[2];
    if (h.min < 1.0 && h.max > 1.0) out[2] = std::abs(q[2] - h.normalize(1.0)) <= eps;
    return out;
  }
};

class PolynomialClipperEffect final : public Effect {
 public:
  PolynomialClipperEffect(std::string id, std::vector<ParamSpec> specs, bool chebyshev)
      : Effect(std::move(id), std::move(specs)), chebyshev_(chebyshev) {}

  std::vector<double> render(std::span<const double> x, std::span<const double> q, double) const override {
    const auto g = denormalized(q);
    return chebyshev_ ? clipper::clip_chebyshev(x, g) : clipper::clip_taylor(x, g);
  }
  ad::Var record(ad::Var x, ad::Var q, double) const override {
    const ad::Var g = denormalize(q, specs());
    return chebyshev_ ? clipper::chebval(x, g) : clipper::polyval(x, g);
  }
  // All-zero coefficients give silence and a zero gradient; start from the
  // linear term alone, which both bases share.
  std::vector<double> initial_q() const override {
    auto q = Effect::initial_q();
    q[1] = std::clamp(specs()[1].normalize(0.5), 0.05, 0.95);
    return q;
  }

 private:
  bool chebyshev_;
};

std::vector<std::string> split_spec(std::string_view spec) {
  std::vector<std::string> ids;
  std::size_t start = 0;
  while (start <= spec.size()) {
    const auto end = std::min(spec.find('+', start), spec.size());
    std::string id(spec.substr(start, end - start));
    if (id.empty()) throw Error(Errc::Config, "empty effect id in chain '" + std::string(spec) + "'");
    ids.push_back(std::move(id));
    start = end + 1;
  }
  return ids;
}

}  // namespace

std::vector<bool> Effect::nonsmooth(std::span<const double> q, double) const {
  return std::vector<bool>(q.size(), false);
}

std::vector<double> Effect::denormalized(std::span<const double> q) const {
  return denormalize(ParamVector{{q.begin(), q.end()}, ParamKind::Normalized}, specs_).values;
}

std::shared_ptr<const Effect> make_effect(std::string_view id, const EffectOptions& options) {
  auto specs = specs_for(id, options.ranges);
  std::string name(id);
  if (id == "peq" || id == "peq-td") {
    return std::make_shared<EqEffect>(name, std::move(specs), eq::EqDefinition::parametric(), id == "peq-td");
  }
  if (id == "geq") return std::make_shared<EqEffect>(name, std::move(specs), eq::EqDefinition::graphic(), false);
  if (id == "comp") return std::make_shared<CompressorEffect>(name, std::move(specs));
  if (id == "comp-simple") return std::make_shared<SimplifiedCompressorEffect>(name, std::move(specs));
  if (id == "comp-proxy") {
    if (!options.proxy) throw Error(Errc::Config, "comp-proxy needs a trained proxy model");
    return std::make_shared<ProxyCompressorEffect>(name, std::move(specs), options.proxy);
  }
  if (id == "clip") return std::make_shared<ParametricClipperEffect>(name, std::move(specs));
  if (id == "clip-taylor" || id == "clip-cheb") {
    return std::make_shared<PolynomialClipperEffect>(name, std::move(specs), id == "clip-cheb");
  }
  throw Error(Errc::Config, "unknown effect '" + name + "'");
}

EffectChain::EffectChain(std::vector<std::shared_ptr<const Effect>> effects) : effects_(std::move(effects)) {
  for (const auto& e : effects_) {
    for (auto s : e->specs()) {
      s.name = e->id() + "." + s.name;
      specs_.push_back(std::move(s));
    }
  }
}

EffectChain EffectChain::parse(std::string_view spec, const EffectOptions& options) {
  std::vector<std::shared_ptr<const Effect>> effects;
  for (const auto& id : split_spec(spec)) effects.push_back(make_effect(id, options));
  return EffectChain(std::move(effects));
}

std::string EffectChain::id() const {
  std::string out;
  for (const auto& e : effects_) {
    if (!out.empty()) out += '+';
    out += e->id();
  }
  return out;
}

bool EffectChain::differentiable() const {
  for (const auto& e : effects_) {
    if (!e->differentiable()) return false;
  }
  return true;
}

std::string EffectChain::range_table_hash() const { return fxchain::range_table_hash(specs_); }

std::vector<double> EffectChain::render(std::span<const double> x, std::span<const double> q, double fs) const {
  if (q.size() != specs_.size()) {
    throw Error(Errc::LengthMismatch, "chain '" + id() + "' expects " + std::to_string(specs_.size()) + " parameters");
  }
  std::vector<double> y(x.begin(), x.end());
  std::size_t offset = 0;
  for (const auto& e : effects_) {
    y = e->render(peak_normalize(y), q.subspan(offset, e->param_count()), fs);
    offset += e->param_count();
  }
  return peak_normalize(y);
}

AudioBuffer EffectChain::render(const AudioBuffer& x, const ParamVector& q) const {
  if (q.kind != ParamKind::Normalized) throw Error(Errc::InvalidArgument, "chains take normalized parameters");
  return {render(x.view(), q.values, x.sample_rate()), x.sample_rate()};
}

ad::Var EffectChain::record(ad::Var x, ad::Var q, double fs) const {
  if (q.size() != specs_.size()) {
    throw Error(Errc::LengthMismatch, "chain '" + id() + "' expects " + std::to_string(specs_.size()) + " parameters");
  }
  ad::Var y = x;
  std::size_t offset = 0;
  for (const auto& e : effects_) {
    y = e->record(ad::peak_normalize(y), ad::slice(q, offset, e->param_count()), fs);
    offset += e->param_count();
  }
  return ad::peak_normalize(y);
}

std::vector<double> EffectChain::initial_q() const {
  std::vector<double> q;
  for (const auto& e : effects_) {
    const auto part = e->initial_q();
    q.insert(q.end(), part.begin(), part.end());
  }
  return q;
}

std::vector<bool> EffectChain::nonsmooth(std::span<const double> q, double eps) const {
  std::vector<bool> out;
  std::size_t offset = 0;
  for (const auto& e : effects_) {
    const auto part = e->nonsmooth(q.subspan(offset, e->param_count()), eps);
    out.insert(out.end(), part.begin(), part.end());
    offset += e->param_count();
  }
  return out;
}

}  // namespace fxchain
