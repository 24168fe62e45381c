#include "fxchain/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "fxchain/clipper.hpp"
#include "fxchain/error.hpp"
#include "fxchain/loss.hpp"

namespace fxchain {

double relative_error(double a, double d) {
  return std::abs(a - d) / std::max({std::abs(a), std::abs(d), 1e-8});
}

namespace {

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

void push_sign_args(std::vector<double>& out, const ad::Tape& tape, const ad::Node& n) {
  const std::string& op = n.op;
  auto in0 = [&]() -> const std::vector<double>& { return tape.node(n.inputs[0]).value; };
  if (op == "abs") {
    for (double v : in0()) out.push_back(v);
  } else if (op == "abs_floor") {
    for (double v : in0()) {
      out.push_back(v);
      out.push_back(std::abs(v) - n.constants[0]);
    }
  } else if (op == "hard_clip") {
    for (double v : in0()) {
      out.push_back(v - 1.0);
      out.push_back(v + 1.0);
    }
  } else if (op == "cubic_clip") {
    for (double v : in0()) out.push_back(std::abs(v) - clipper::kCubicKnee);
  } else if (op == "gain_computer") {
    const double t = tape.node(n.inputs[1]).value[0];
    const double w = tape.node(n.inputs[3]).value[0];
    for (double v : in0()) {
      out.push_back(2.0 * (v - t) - w);
      out.push_back(2.0 * (v - t) + w);
    }
  } else if (op == "smooth_branching") {
    const auto& target = in0();
    for (std::size_t i = 0; i < target.size(); ++i) out.push_back(target[i] - (i > 0 ? n.value[i - 1] : 0.0));
  } else if (op == "peak_normalize") {
    const auto& x = in0();
    const auto arg = static_cast<std::size_t>(n.constants[1]);
    if (x.empty()) return;
    out.push_back(x[arg]);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (i != arg) out.push_back(std::abs(x[i]) - std::abs(x[arg]));
    }
  } else if (op == "l1_mean") {
    const auto& a = in0();
    const auto& b = tape.node(n.inputs[1]).value;
    for (std::size_t i = 0; i < a.size(); ++i) out.push_back(a[i] - b[i]);
  }
}

bool same_signs(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (sign_of(a[i]) != sign_of(b[i])) return false;
  }
  return true;
}

}  // namespace

std::vector<double> kink_arguments(const ad::Tape& tape) {
  std::vector<double> out;
  for (std::size_t i = 0; i < tape.size(); ++i) push_sign_args(out, tape, tape.node(i));
  return out;
}

GradCheckReport grad_check(const LossFn& loss, std::span<const double> point, double eps,
                           std::span<const std::size_t> coordinates, const std::vector<bool>& nonsmooth,
                           const ad::PrimitiveRegistry& registry) {
  struct Evaluation {
    double loss;
    std::vector<double> kinks;
  };
  const auto analytic = ad::gradient(loss, point, registry);
  auto evaluate = [&](const std::vector<double>& p) {
    ad::Tape tape(registry);
    const double value = loss(tape, tape.constant(p)).item();
    return Evaluation{value, kink_arguments(tape)};
  };
  std::vector<std::size_t> coords(coordinates.begin(), coordinates.end());
  if (coords.empty()) {
    coords.resize(point.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
  }
  std::vector<double> p(point.begin(), point.end());
  const std::vector<double> center_kinks = evaluate(p).kinks;
  constexpr int kRetries = 2;

  GradCheckReport rep;
  for (std::size_t c : coords) {
    const double saved = p[c];
    GradCheckEntry e;
    e.index = c;
    e.analytic = analytic[c];
    bool straddles = false;
    double h = eps;
    for (int attempt = 0; attempt <= kRetries; ++attempt, h /= 10.0) {
      p[c] = saved + h;
      const Evaluation up = evaluate(p);
      p[c] = saved - h;
      const Evaluation down = evaluate(p);
      p[c] = saved;
      e.numeric = (up.loss - down.loss) / (2.0 * h);
      e.step = h;
      straddles = !same_signs(up.kinks, center_kinks) || !same_signs(down.kinks, center_kinks);
      if (!straddles) break;
    }
    e.rel_error = relative_error(e.analytic, e.numeric);
    e.excluded = (c < nonsmooth.size() && nonsmooth[c]) || straddles;
    if (e.excluded) {
      ++rep.excluded;
    } else {
      rep.max_rel_error = std::max(rep.max_rel_error, e.rel_error);
    }
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

GradCheckReport grad_check(const EffectChain& chain, std::span<const double> x, std::span<const double> y,
                           std::span<const double> q, double eps, const MelConfig& mel, double fs,
                           const ad::PrimitiveRegistry& registry) {
  if (!(eps >= 1e-6 && eps <= 1e-2)) throw Error(Errc::InvalidArgument, "eps must lie in [1e-6, 1e-2]");
  if (q.size() != chain.param_count()) throw Error(Errc::LengthMismatch, "q does not match the chain");
  for (double v : q) {
    if (!(v >= eps && v <= 1.0 - eps)) throw Error(Errc::InvalidArgument, "q must lie in [eps, 1 - eps]");
  }
  const MelL1Objective objective(y, mel);
  const std::vector<double> dry(x.begin(), x.end());
  auto loss = [&](ad::Tape& tape, ad::Var qv) { return objective(chain.record(tape.constant(dry), qv, fs)); };
  const auto flags = chain.nonsmooth(q, eps);
  auto rep = grad_check(loss, q, eps, {}, flags, registry);
  for (auto& e : rep.entries) e.name = chain.specs()[e.index].name;
  return rep;
}

}  // namespace fxchain
