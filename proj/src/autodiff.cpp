#include "fxchain/autodiff.hpp"

#include <algorithm>

#include "fxchain/error.hpp"
#include "primitives.hpp"

namespace fxchain::ad {

const std::vector<double>& Var::value() const { return tape_->node(*this).value; }
std::size_t Var::size() const { return value().size(); }
bool Var::requires_grad() const { return tape_->node(*this).requires_grad; }

double Var::item() const {
  const auto& v = value();
  if (v.size() != 1) throw Error(Errc::ShapeMismatch, "item() on a Var of length " + std::to_string(v.size()));
  return v[0];
}

void PrimitiveRegistry::define(std::string name, BackwardRule rule) { rules_[std::move(name)] = std::move(rule); }

const BackwardRule* PrimitiveRegistry::find(std::string_view name) const {
  auto it = rules_.find(name);
  return it == rules_.end() ? nullptr : &it->second;
}

std::vector<std::string> PrimitiveRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, rule] : rules_) out.push_back(name);
  return out;
}

void PrimitiveRegistry::corrupt(std::string_view name, double factor) {
  auto it = rules_.find(name);
  if (it == rules_.end()) throw Error(Errc::UnregisteredPrimitive, "no rule named '" + std::string(name) + "'");
  BackwardRule inner = it->second;
  it->second = [inner, factor](const Tape& tape, const Node& node, std::span<const double> grad_out,
                               std::span<std::vector<double>* const> grad_in) {
    std::vector<double> scaled(grad_out.begin(), grad_out.end());
    for (double& g : scaled) g *= factor;
    inner(tape, node, scaled, grad_in);
  };
}

const PrimitiveRegistry& PrimitiveRegistry::builtin() {
  static const PrimitiveRegistry registry = [] {
    PrimitiveRegistry r;
    detail::register_core(r);
    detail::register_params(r);
    detail::register_eq(r);
    detail::register_dynamics(r);
    detail::register_clipper(r);
    detail::register_mel(r);
    detail::register_proxy(r);
    return r;
  }();
  return registry;
}

Tape::Tape(const PrimitiveRegistry& registry) : registry_(&registry) {}

Var Tape::variable(std::vector<double> value) {
  Node n;
  n.op = "variable";
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(std::vector<double> value) {
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Node node) {
  node.requires_grad = false;
  for (std::size_t in : node.inputs) {
    if (in >= nodes_.size()) throw Error(Errc::InvalidArgument, "primitive input does not belong to this tape");
    node.requires_grad = node.requires_grad || nodes_[in].requires_grad;
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const Node& Tape::node(Var v) const {
  if (v.tape_ != this) throw Error(Errc::InvalidArgument, "Var belongs to a different tape");
  return nodes_[v.index_];
}

std::vector<std::vector<double>> Tape::vjp(Var output, std::span<const double> cotangent,
                                           std::span<const Var> wrt) const {
  const Node& out = node(output);
  if (cotangent.size() != out.value.size()) {
    throw Error(Errc::ShapeMismatch, "cotangent length does not match the output");
  }
  for (const Var& w : wrt) (void)node(w);

  std::vector<std::vector<double>> grads(output.index() + 1);
  grads[output.index()].assign(cotangent.begin(), cotangent.end());

  std::vector<std::vector<double>*> grad_in;
  for (std::size_t i = output.index() + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (grads[i].empty() || n.inputs.empty() || !n.requires_grad) continue;
    const BackwardRule* rule = registry_->find(n.op);
    if (rule == nullptr) throw Error(Errc::UnregisteredPrimitive, "no backward rule for primitive '" + n.op + "'");
    grad_in.assign(n.inputs.size(), nullptr);
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      const std::size_t in = n.inputs[k];
      if (!nodes_[in].requires_grad) continue;
      if (grads[in].empty()) grads[in].assign(nodes_[in].value.size(), 0.0);
      grad_in[k] = &grads[in];
    }
    (*rule)(*this, n, grads[i], grad_in);
    // Interior cotangents are no longer needed once propagated.
    bool keep = false;
    for (const Var& w : wrt) keep = keep || w.index() == i;
    if (!keep) std::vector<double>().swap(grads[i]);
  }

  std::vector<std::vector<double>> result;
  result.reserve(wrt.size());
  for (const Var& w : wrt) {
    if (w.index() < grads.size() && !grads[w.index()].empty()) {
      result.push_back(grads[w.index()]);
    } else {
      result.emplace_back(nodes_[w.index()].value.size(), 0.0);
    }
  }
  return result;
}

std::vector<double> Tape::gradient(Var loss, Var wrt) const {
  const double one = 1.0;
  if (node(loss).value.size() != 1) throw Error(Errc::ShapeMismatch, "gradient() needs a scalar output");
  const Var w[1] = {wrt};
  return std::move(vjp(loss, std::span<const double>(&one, 1), w).front());
}

ValueAndGradient value_and_gradient(const std::function<Var(Tape&, Var)>& loss_fn, std::span<const double> q,
                                    const PrimitiveRegistry& registry) {
  Tape tape(registry);
  Var leaf = tape.variable(std::vector<double>(q.begin(), q.end()));
  Var loss = loss_fn(tape, leaf);
  if (loss.tape() != &tape) throw Error(Errc::UnregisteredPrimitive, "loss was not recorded on the provided tape");
  ValueAndGradient out;
  out.value = loss.item();
  out.gradient = tape.gradient(loss, leaf);
  return out;
}

std::vector<double> gradient(const std::function<Var(Tape&, Var)>& loss_fn, std::span<const double> q,
                             const PrimitiveRegistry& registry) {
  return value_and_gradient(loss_fn, q, registry).gradient;
}

namespace detail {

Tape& tape_of(std::initializer_list<Var> vars) {
  Tape* t = nullptr;
  for (const Var& v : vars) {
    if (!v.valid()) throw Error(Errc::InvalidArgument, "uninitialised Var");
    if (t == nullptr) t = v.tape();
    if (v.tape() != t) throw Error(Errc::InvalidArgument, "Vars from different tapes");
  }
  if (t == nullptr) throw Error(Errc::InvalidArgument, "primitive without inputs");
  return *t;
}

}  // namespace detail
}  // namespace fxchain::ad
