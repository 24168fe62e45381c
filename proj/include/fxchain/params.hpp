#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fxchain/autodiff.hpp"

namespace fxchain {

enum class Scale { Linear, Logarithmic };

// Range and mapping of one effect parameter.
struct ParamSpec {
  std::string name;
  double min = 0.0;
  double max = 1.0;
  Scale scale = Scale::Linear;
  std::string unit;

  // Throws Errc::InvalidArgument unless min < max (and min > 0 for log scale).
  void validate() const;
  // q in [0,1] -> p in [min,max]. Affine for linear, exponential for log scale.
  double denormalize(double q) const;
  // Exact inverse of denormalize.
  double normalize(double p) const;

  bool operator==(const ParamSpec&) const = default;
};

enum class ParamKind { Normalized, Denormalized };

struct ParamVector {
  std::vector<double> values;
  ParamKind kind = ParamKind::Normalized;

  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t i) const noexcept { return values[i]; }
};

ParamVector denormalize(const ParamVector& q, std::span<const ParamSpec> specs);
ParamVector normalize(const ParamVector& p, std::span<const ParamSpec> specs);
// Differentiable q -> p.
ad::Var denormalize(ad::Var q, std::span<const ParamSpec> specs);

// Default parameter ranges for each effect implementation, keyed by effect id
// (peq, peq-td, geq, comp, comp-simple, comp-proxy, clip, clip-taylor, clip-cheb).
std::vector<ParamSpec> default_specs(std::string_view effect_id);

// "effect.param" -> (min, max) overrides on top of the defaults.
using RangeOverrides = std::map<std::string, std::pair<double, double>>;

std::vector<ParamSpec> specs_for(std::string_view effect_id, const RangeOverrides& overrides);

// Stable 64-bit FNV-1a digest of a spec table, printed as 16 hex digits.
std::string range_table_hash(std::span<const ParamSpec> specs);

inline constexpr int kPolynomialOrder = 24;

}  // namespace fxchain
