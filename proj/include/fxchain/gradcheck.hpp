#pragma once

// Central-difference verification of tape gradients.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fxchain/autodiff.hpp"
#include "fxchain/effects.hpp"
#include "fxchain/mel.hpp"

namespace fxchain {

// |a - d| / max(|a|, |d|, 1e-8)
double relative_error(double analytic, double numeric);

struct GradCheckEntry {
  std::size_t index = 0;
  std::string name;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  double step = 0.0;      // difference step actually used
  bool excluded = false;  // non-smooth coordinate, not judged
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;  // over judged entries
  std::size_t excluded = 0;
  bool passed(double tolerance) const { return max_rel_error < tolerance; }
};

using LossFn = std::function<ad::Var(ad::Tape&, ad::Var)>;

// Arguments whose sign decides the branch of each piecewise primitive on the
// tape (abs, clamps, knee edges, attack/release switching, peak position, the
// L1 terms). A sign change between two points means a kink lies between them.
std::vector<double> kink_arguments(const ad::Tape& tape);

// Checks the coordinates listed (all when empty); nonsmooth flags (optional)
// mark coordinates to report but not judge. A coordinate whose difference
// straddles a kink is retried with the step divided by 10, twice at most, and
// excluded if it still does.
GradCheckReport grad_check(const LossFn& loss, std::span<const double> point, double eps,
                           std::span<const std::size_t> coordinates = {}, const std::vector<bool>& nonsmooth = {},
                           const ad::PrimitiveRegistry& registry = ad::PrimitiveRegistry::builtin());

// Lyy(chain(x; q), y) with respect to normalized q. Requires eps in
// [1e-6, 1e-2] and every q_c in [eps, 1 - eps]; throws Errc::InvalidArgument
// otherwise.
GradCheckReport grad_check(const EffectChain& chain, std::span<const double> x, std::span<const double> y,
                           std::span<const double> q, double eps, const MelConfig& mel, double fs,
                           const ad::PrimitiveRegistry& registry = ad::PrimitiveRegistry::builtin());

}  // namespace fxchain
