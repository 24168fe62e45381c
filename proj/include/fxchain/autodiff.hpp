#pragma once

// Reverse-mode differentiation over a tape of vector-valued primitives.
//
// A Var is a handle to one recorded value. Every primitive names a backward
// rule in a PrimitiveRegistry; Tape::vjp replays the tape in reverse and
// asks each rule to accumulate cotangents into the primitive's inputs.
// Complex sequences are stored interleaved (re, im) in ordinary Vars.

#include <array>
#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fxchain::ad {

class Tape;

class Var {
 public:
  Var() = default;

  const std::vector<double>& value() const;
  std::size_t size() const;
  // Value of a length-1 Var.
  double item() const;
  bool requires_grad() const;
  bool valid() const noexcept { return tape_ != nullptr; }
  Tape* tape() const noexcept { return tape_; }
  std::size_t index() const noexcept { return index_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}
  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

struct Node {
  std::string op;
  std::vector<double> value;
  std::vector<std::size_t> inputs;
  // Op-specific data kept for the backward pass.
  std::vector<double> saved;
  std::shared_ptr<const void> context;
  std::array<double, 4> constants{};
  bool requires_grad = false;
};

// Adds the contribution of grad_out (d loss / d node.value) to each input's
// cotangent. grad_in[i] is null when input i does not need a gradient.
using BackwardRule = std::function<void(const Tape& tape, const Node& node, std::span<const double> grad_out,
                                        std::span<std::vector<double>* const> grad_in)>;

class PrimitiveRegistry {
 public:
  void define(std::string name, BackwardRule rule);
  const BackwardRule* find(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name) != nullptr; }
  std::vector<std::string> names() const;

  // Scales the cotangents produced by an existing rule. Test hook for
  // checking that gradient verification catches a broken rule.
  void corrupt(std::string_view name, double factor = 1.5);

  // All primitives shipped with the library.
  static const PrimitiveRegistry& builtin();

 private:
  std::map<std::string, BackwardRule, std::less<>> rules_;
};

class Tape {
 public:
  explicit Tape(const PrimitiveRegistry& registry = PrimitiveRegistry::builtin());
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf that receives a gradient.
  Var variable(std::vector<double> value);
  // Leaf treated as a constant.
  Var constant(std::vector<double> value);
  Var constant(double value) { return constant(std::vector<double>{value}); }

  // Appends a primitive application. node.inputs must index this tape;
  // requires_grad is derived from the inputs.
  Var record(Node node);

  const Node& node(Var v) const;
  const Node& node(std::size_t index) const { return nodes_[index]; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const PrimitiveRegistry& registry() const noexcept { return *registry_; }

  // Cotangents of `wrt` given d loss / d output = cotangent.
  // Throws Errc::UnregisteredPrimitive when a reached op has no rule.
  std::vector<std::vector<double>> vjp(Var output, std::span<const double> cotangent, std::span<const Var> wrt) const;
  // Gradient of a length-1 output.
  std::vector<double> gradient(Var loss, Var wrt) const;

 private:
  const PrimitiveRegistry* registry_;
  std::deque<Node> nodes_;
};

// Value and gradient of loss_fn at q, where loss_fn builds its computation
// on the tape from the leaf it is handed.
struct ValueAndGradient {
  double value = 0.0;
  std::vector<double> gradient;
};

ValueAndGradient value_and_gradient(const std::function<Var(Tape&, Var)>& loss_fn, std::span<const double> q,
                                    const PrimitiveRegistry& registry = PrimitiveRegistry::builtin());
std::vector<double> gradient(const std::function<Var(Tape&, Var)>& loss_fn, std::span<const double> q,
                             const PrimitiveRegistry& registry = PrimitiveRegistry::builtin());

// ---------------------------------------------------------------------------
// Core primitives. Binary elementwise ops broadcast length-1 operands.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
// scale * a + shift
Var affine(Var a, double scale, double shift);

Var exp(Var a);
Var log(Var a);
Var sin(Var a);
Var cos(Var a);
Var sqrt(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var square(Var a);
Var abs(Var a);
Var reciprocal(Var a);
// max(|a|, floor); the floor is a constant (zero gradient below it).
Var abs_floor(Var a, double floor);

Var sum(Var a);
Var mean(Var a);
Var slice(Var a, std::size_t offset, std::size_t length);
Var concat(std::span<const Var> parts);
// Length-1 element i.
inline Var element(Var a, std::size_t i) { return slice(a, i, 1); }

// Interleaved complex product.
Var cmul(Var a, Var b);
// Magnitudes of an interleaved complex sequence; zero-magnitude bins get zero gradient.
Var cabs(Var a);
// Real FFT of a (zero-padded to n): n/2+1 interleaved bins.
Var rfft(Var a, std::size_t n);
// Inverse real FFT of a half spectrum, keeping out_len samples.
Var irfft(Var spectrum, std::size_t n, std::size_t out_len);
// Short-time spectra with a periodic Hann window; frames start at m * hop and
// must fit inside the signal. Output is frames x (fft/2 + 1) interleaved bins.
Var stft(Var a, std::size_t fft_size, std::size_t hop);

// a / max|a| (silent inputs pass through).
Var peak_normalize(Var a);
// a / rms(a).
Var rms_normalize(Var a);
// mean |a - b|
Var l1_mean(Var a, Var b);
// mean (a - b)^2
Var mse(Var a, Var b);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return affine(a, -1.0, 0.0); }
inline Var operator+(Var a, double c) { return affine(a, 1.0, c); }
inline Var operator+(double c, Var a) { return affine(a, 1.0, c); }
inline Var operator-(Var a, double c) { return affine(a, 1.0, -c); }
inline Var operator-(double c, Var a) { return affine(a, -1.0, c); }
inline Var operator*(Var a, double c) { return affine(a, c, 0.0); }
inline Var operator*(double c, Var a) { return affine(a, c, 0.0); }
inline Var operator/(Var a, double c) { return affine(a, 1.0 / c, 0.0); }
inline Var operator/(double c, Var a) { return affine(reciprocal(a), c, 0.0); }

namespace detail {
// Shared helper for rules: grad_in[i] may be null.
inline void accumulate(std::vector<double>* g, std::size_t i, double v) {
  if (g != nullptr) (*g)[i] += v;
}
void register_core(PrimitiveRegistry& registry);
}  // namespace detail

}  // namespace fxchain::ad
