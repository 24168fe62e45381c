#pragma once

// Effects with normalized-parameter interfaces and the chains built from them.
//
// Effect ids:
//   peq          5-band parametric EQ, frequency-sampled (differentiable)
//   peq-td       5-band parametric EQ, time-domain cascade (render only)
//   geq          10-band graphic EQ, frequency-sampled
//   comp         full compressor (separate attack and release)
//   comp-simple  compressor with one shared time constant
//   comp-proxy   compressor whose gradients come from a neural proxy; renders
//                with the DSP compressor
//   clip         parametric clipper (gain, offset, hardness)
//   clip-taylor  24-term monomial waveshaper
//   clip-cheb    24-term Chebyshev waveshaper
// A chain spec joins ids with '+', e.g. "peq+comp-simple+clip".

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fxchain/autodiff.hpp"
#include "fxchain/params.hpp"
#include "fxchain/signal.hpp"

namespace fxchain {

namespace proxy {
class ProxyModel;
}

class Effect {
 public:
  explicit Effect(std::string id, std::vector<ParamSpec> specs) : id_(std::move(id)), specs_(std::move(specs)) {}
  virtual ~Effect() = default;

  const std::string& id() const noexcept { return id_; }
  const std::vector<ParamSpec>& specs() const noexcept { return specs_; }
  std::size_t param_count() const noexcept { return specs_.size(); }

  // q is normalized.
  virtual std::vector<double> render(std::span<const double> x, std::span<const double> q, double fs) const = 0;
  virtual bool differentiable() const { return true; }
  // Throws Errc::InvalidArgument for render-only effects.
  virtual ad::Var record(ad::Var x, ad::Var q, double fs) const = 0;
  // Coordinates of q within eps (normalized) of a parameter value where the
  // effect is not differentiable.
  virtual std::vector<bool> nonsmooth(std::span<const double> q, double eps) const;
  // Starting point for fitting: mid-range, except where that silences the
  // effect.
  virtual std::vector<double> initial_q() const { return std::vector<double>(param_count(), 0.5); }

 protected:
  std::vector<double> denormalized(std::span<const double> q) const;

 private:
  std::string id_;
  std::vector<ParamSpec> specs_;
};

struct EffectOptions {
  RangeOverrides ranges;
  // Needed by comp-proxy.
  std::shared_ptr<const proxy::ProxyModel> proxy;
};

std::shared_ptr<const Effect> make_effect(std::string_view id, const EffectOptions& options = {});

// Ordered effects; every effect sees its input peak-normalized and the chain
// output is peak-normalized as well.
class EffectChain {
 public:
  EffectChain() = default;
  explicit EffectChain(std::vector<std::shared_ptr<const Effect>> effects);
  static EffectChain parse(std::string_view spec, const EffectOptions& options = {});

  // Ids joined with '+'.
  std::string id() const;
  const std::vector<std::shared_ptr<const Effect>>& effects() const noexcept { return effects_; }
  // Concatenated specs, names prefixed with "<effect id>.".
  const std::vector<ParamSpec>& specs() const noexcept { return specs_; }
  std::size_t param_count() const noexcept { return specs_.size(); }
  bool differentiable() const;
  std::string range_table_hash() const;

  std::vector<double> render(std::span<const double> x, std::span<const double> q, double fs) const;
  AudioBuffer render(const AudioBuffer& x, const ParamVector& q) const;
  ad::Var record(ad::Var x, ad::Var q, double fs) const;
  std::vector<bool> nonsmooth(std::span<const double> q, double eps) const;
  std::vector<double> initial_q() const;

 private:
  std::vector<std::shared_ptr<const Effect>> effects_;
  std::vector<ParamSpec> specs_;
};

}  // namespace fxchain
