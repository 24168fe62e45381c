#pragma once

// Registration hooks for the backward rules each module contributes to the
// builtin primitive registry.

#include "fxchain/autodiff.hpp"

namespace fxchain::ad::detail {

void register_core(PrimitiveRegistry& registry);
void register_params(PrimitiveRegistry& registry);
void register_eq(PrimitiveRegistry& registry);
void register_dynamics(PrimitiveRegistry& registry);
void register_clipper(PrimitiveRegistry& registry);
void register_mel(PrimitiveRegistry& registry);
void register_proxy(PrimitiveRegistry& registry);

// Checks the inputs belong to one tape and returns it.
Tape& tape_of(std::initializer_list<Var> vars);

}  // namespace fxchain::ad::detail
