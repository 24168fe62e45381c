#include "fxchain/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fxchain/error.hpp"
#include "primitives.hpp"

namespace fxchain::dynamics {
namespace {

constexpr double kDbPerNeper = 20.0 / std::numbers::ln10;

double level_db(double s) { return kDbPerNeper * std::log(std::max(std::abs(s), kLevelFloor)); }
double db_to_amp(double db) { return std::exp(db / kDbPerNeper); }

struct KneeGrad {
  double value, d_level, d_threshold, d_ratio, d_knee;
};

KneeGrad static_gain_with_grad(double x, double t, double r, double w) {
  const double d = x - t;
  const double s = 1.0 / r - 1.0;
  if (w > 0.0 && 2.0 * std::abs(d) <= w) {
    const double u = d + 0.5 * w;
    return {s * u * u / (2.0 * w), s * u / w, -s * u / w, -u * u / (2.0 * w * r * r), s * u * (w - u) / (2.0 * w * w)};
  }
  if (2.0 * d > w) return {s * d, s, -s, -d / (r * r), 0.0};
  return {0.0, 0.0, 0.0, 0.0, 0.0};
}

}  // namespace

double static_gain_db(double level, double threshold_db, double ratio, double knee_db) {
  return static_gain_with_grad(level, threshold_db, ratio, knee_db).value;
}

double smoothing_coefficient(double time_ms, double fs) { return std::exp(-1000.0 / (time_ms * fs)); }

std::vector<double> gain_envelope_db(std::span<const double> x, const CompressorParams& p, double fs) {
  if (!(p.ratio >= 1.0) || !(p.attack_ms > 0.0) || !(p.release_ms > 0.0) || !(p.knee_db >= 0.0)) {
    throw Error(Errc::OutOfRange, "compressor parameters out of range");
  }
  const double aa = smoothing_coefficient(p.attack_ms, fs);
  const double ar = smoothing_coefficient(p.release_ms, fs);
  std::vector<double> g(x.size());
  double y = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double target = static_gain_db(level_db(x[n]), p.threshold_db, p.ratio, p.knee_db);
    const double a = target < y ? aa : ar;
    y = a * y + (1.0 - a) * target;
    g[n] = y;
  }
  return g;
}

std::vector<double> compress(std::span<const double> x, const CompressorParams& p, double fs) {
  auto g = gain_envelope_db(x, p, fs);
  for (std::size_t n = 0; n < x.size(); ++n) g[n] = x[n] * db_to_amp(g[n]);
  return g;
}

AudioBuffer compress(const AudioBuffer& x, const CompressorParams& p) {
  return {compress(x.view(), p, x.sample_rate()), x.sample_rate()};
}

AudioBuffer compress_simplified(const AudioBuffer& x, const SimplifiedCompressorParams& p) {
  return compress(x, CompressorParams{p.threshold_db, p.ratio, p.time_ms, p.time_ms, p.knee_db});
}

ad::Var gain_computer(ad::Var level, ad::Var threshold_db, ad::Var ratio, ad::Var knee_db) {
  ad::Tape& tape = ad::detail::tape_of({level, threshold_db, ratio, knee_db});
  const double t = threshold_db.item(), r = ratio.item(), w = knee_db.item();
  ad::Node node;
  node.op = "gain_computer";
  node.value.resize(level.size());
  const auto& lv = level.value();
  for (std::size_t i = 0; i < lv.size(); ++i) node.value[i] = static_gain_db(lv[i], t, r, w);
  node.inputs = {level.index(), threshold_db.index(), ratio.index(), knee_db.index()};
  return tape.record(std::move(node));
}

ad::Var smooth_branching(ad::Var target_db, ad::Var alpha_attack, ad::Var alpha_release) {
  ad::Tape& tape = ad::detail::tape_of({target_db, alpha_attack, alpha_release});
  const double aa = alpha_attack.item(), ar = alpha_release.item();
  const auto& g = target_db.value();
  ad::Node node;
  node.op = "smooth_branching";
  node.value.resize(g.size());
  // saved[n] = 1 where the attack coefficient was used.
  node.saved.resize(g.size());
  double y = 0.0;
  for (std::size_t n = 0; n < g.size(); ++n) {
    const bool attack = g[n] < y;
    const double a = attack ? aa : ar;
    y = a * y + (1.0 - a) * g[n];
    node.value[n] = y;
    node.saved[n] = attack ? 1.0 : 0.0;
  }
  node.inputs = {target_db.index(), alpha_attack.index(), alpha_release.index()};
  return tape.record(std::move(node));
}

ad::Var compress(ad::Var x, ad::Var threshold_db, ad::Var ratio, ad::Var attack_ms, ad::Var release_ms,
                 ad::Var knee_db, double fs) {
  ad::Var level = ad::log(ad::abs_floor(x, kLevelFloor)) * kDbPerNeper;
  ad::Var target = gain_computer(level, threshold_db, ratio, knee_db);
  const double k = -1000.0 / fs;
  ad::Var aa = ad::exp(k / attack_ms);
  ad::Var ar = attack_ms.index() == release_ms.index() ? aa : ad::exp(k / release_ms);
  ad::Var smoothed = smooth_branching(target, aa, ar);
  return x * ad::exp(smoothed / kDbPerNeper);
}

}  // namespace fxchain::dynamics

namespace fxchain::ad::detail {

void register_dynamics(PrimitiveRegistry& r) {
  using G = std::span<const double>;
  using Grads = std::span<std::vector<double>* const>;
  r.define("gain_computer", [](const Tape& t, const Node& n, G g, Grads gi) {
    const auto& lv = t.node(n.inputs[0]).value;
    const double th = t.node(n.inputs[1]).value[0];
    const double ra = t.node(n.inputs[2]).value[0];
    const double kn = t.node(n.inputs[3]).value[0];
    double dt = 0, dr = 0, dk = 0;
    for (std::size_t i = 0; i < lv.size(); ++i) {
      const auto d = dynamics::static_gain_with_grad(lv[i], th, ra, kn);
      accumulate(gi[0], i, g[i] * d.d_level);
      dt += g[i] * d.d_threshold;
      dr += g[i] * d.d_ratio;
      dk += g[i] * d.d_knee;
    }
    accumulate(gi[1], 0, dt);
    accumulate(gi[2], 0, dr);
    accumulate(gi[3], 0, dk);
  });
  r.define("smooth_branching", [](const Tape& t, const Node& n, G g, Grads gi) {
    const auto& target = t.node(n.inputs[0]).value;
    const double aa = t.node(n.inputs[1]).value[0];
    const double ar = t.node(n.inputs[2]).value[0];
    const std::size_t len = target.size();
    double lambda = 0.0, next_alpha = 0.0, daa = 0.0, dar = 0.0;
    for (std::size_t i = len; i-- > 0;) {
      lambda = g[i] + next_alpha * lambda;
      const bool attack = n.saved[i] != 0.0;
      const double a = attack ? aa : ar;
      const double prev = i > 0 ? n.value[i - 1] : 0.0;
      accumulate(gi[0], i, (1.0 - a) * lambda);
      (attack ? daa : dar) += lambda * (prev - target[i]);
      next_alpha = a;
    }
    accumulate(gi[1], 0, daa);
    accumulate(gi[2], 0, dar);
  });
}

}  // namespace fxchain::ad::detail
