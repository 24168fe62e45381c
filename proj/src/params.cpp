#include "fxchain/params.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>

#include "fxchain/error.hpp"
#include "primitives.hpp"

namespace fxchain {

void ParamSpec::validate() const {
  if (!(min < max)) throw Error(Errc::InvalidArgument, "parameter '" + name + "': min must be below max");
  if (scale == Scale::Logarithmic && !(min > 0.0)) {
    throw Error(Errc::InvalidArgument, "parameter '" + name + "': logarithmic scale needs min > 0");
  }
}

double ParamSpec::denormalize(double q) const {
  if (q == 0.0) return min;
  if (q == 1.0) return max;
  if (scale == Scale::Linear) return (max - min) * q + min;
  return std::exp((std::log(max) - std::log(min)) * q) * min;
}

double ParamSpec::normalize(double p) const {
  if (p == min) return 0.0;
  if (p == max) return 1.0;
  if (scale == Scale::Linear) return (p - min) / (max - min);
  return (std::log(p) - std::log(min)) / (std::log(max) - std::log(min));
}

namespace {

void check_lengths(std::size_t n, std::span<const ParamSpec> specs) {
  if (n != specs.size()) {
    throw Error(Errc::LengthMismatch, "parameter vector has " + std::to_string(n) + " values, spec table has " +
                                          std::to_string(specs.size()));
  }
}

}  // namespace

ParamVector denormalize(const ParamVector& q, std::span<const ParamSpec> specs) {
  check_lengths(q.size(), specs);
  if (q.kind != ParamKind::Normalized) throw Error(Errc::InvalidArgument, "denormalize expects a normalized vector");
  ParamVector p{std::vector<double>(q.size()), ParamKind::Denormalized};
  for (std::size_t c = 0; c < q.size(); ++c) {
    if (!(q[c] >= 0.0 && q[c] <= 1.0)) {
      throw Error(Errc::OutOfRange, "normalized value of '" + specs[c].name + "' outside [0,1]");
    }
    p.values[c] = specs[c].denormalize(q[c]);
  }
  return p;
}

ad::Var denormalize(ad::Var q, std::span<const ParamSpec> specs) {
  check_lengths(q.size(), specs);
  ad::Node node;
  node.op = "denormalize";
  node.value.resize(q.size());
  node.saved.resize(q.size());
  for (std::size_t c = 0; c < q.size(); ++c) {
    const auto& s = specs[c];
    const double qc = q.value()[c];
    if (!(qc >= 0.0 && qc <= 1.0)) throw Error(Errc::OutOfRange, "normalized value of '" + s.name + "' outside [0,1]");
    node.value[c] = s.denormalize(qc);
    node.saved[c] = s.scale == Scale::Linear ? s.max - s.min : node.value[c] * std::log(s.max / s.min);
  }
  node.inputs = {q.index()};
  return q.tape()->record(std::move(node));
}

ParamVector normalize(const ParamVector& p, std::span<const ParamSpec> specs) {
  check_lengths(p.size(), specs);
  if (p.kind != ParamKind::Denormalized) throw Error(Errc::InvalidArgument, "normalize expects a denormalized vector");
  ParamVector q{std::vector<double>(p.size()), ParamKind::Normalized};
  for (std::size_t c = 0; c < p.size(); ++c) {
    const auto& s = specs[c];
    // Tolerate one-ulp excursions produced by denormalize round trips.
    const double slack = 1e-12 * std::max(std::abs(s.min), std::abs(s.max));
    if (!(p[c] >= s.min - slack && p[c] <= s.max + slack)) {
      throw Error(Errc::OutOfRange, "value of '" + s.name + "' outside [" + std::to_string(s.min) + ", " +
                                        std::to_string(s.max) + "]");
    }
    q.values[c] = std::clamp(s.normalize(std::clamp(p[c], s.min, s.max)), 0.0, 1.0);
  }
  return q;
}

namespace {

ParamSpec lin(std::string name, double lo, double hi, std::string unit) {
  return {std::move(name), lo, hi, Scale::Linear, std::move(unit)};
}

ParamSpec log(std::string name, double lo, double hi, std::string unit) {
  return {std::move(name), lo, hi, Scale::Logarithmic, std::move(unit)};
}

void add_band(std::vector<ParamSpec>& out, const std::string& band, double f_lo, double f_hi) {
  out.push_back(log(band + ".freq", f_lo, f_hi, "Hz"));
  out.push_back(lin(band + ".gain", -12.0, 12.0, "dB"));
  out.push_back(lin(band + ".q", 0.3, 4.0, ""));
}

std::vector<ParamSpec> polynomial_specs() {
  std::vector<ParamSpec> out;
  for (int h = 0; h < kPolynomialOrder; ++h) out.push_back(lin("g" + std::to_string(h), -1.0, 1.0, ""));
  return out;
}

}  // namespace

std::vector<ParamSpec> default_specs(std::string_view effect_id) {
  std::vector<ParamSpec> out;
  if (effect_id == "peq" || effect_id == "peq-td") {
    add_band(out, "low_shelf", 20.0, 500.0);
    add_band(out, "peak1", 100.0, 10000.0);
    add_band(out, "peak2", 100.0, 10000.0);
    add_band(out, "peak3", 100.0, 10000.0);
    add_band(out, "high_shelf", 1000.0, 16000.0);
  } else if (effect_id == "geq") {
    for (int k = 0; k < 10; ++k) out.push_back(lin("band" + std::to_string(k) + ".gain", -12.0, 12.0, "dB"));
  } else if (effect_id == "comp" || effect_id == "comp-proxy") {
    out = {lin("threshold", -50.0, 0.0, "dB"), log("ratio", 1.0, 20.0, ""), log("attack", 0.1, 100.0, "ms"),
           log("release", 10.0, 1000.0, "ms"), lin("knee", 0.0, 18.0, "dB")};
  } else if (effect_id == "comp-simple") {
    out = {lin("threshold", -50.0, 0.0, "dB"), log("ratio", 1.0, 20.0, ""), log("time", 0.1, 1000.0, "ms"),
           lin("knee", 0.0, 18.0, "dB")};
  } else if (effect_id == "clip") {
    out = {lin("gain", 0.0, 24.0, "dB"), lin("offset", -0.5, 0.5, ""), lin("hardness", 0.0, 2.0, "")};
  } else if (effect_id == "clip-taylor" || effect_id == "clip-cheb") {
    out = polynomial_specs();
  } else {
    throw Error(Errc::Config, "unknown effect '" + std::string(effect_id) + "'");
  }
  return out;
}

std::vector<ParamSpec> specs_for(std::string_view effect_id, const RangeOverrides& overrides) {
  auto specs = default_specs(effect_id);
  const std::string prefix = std::string(effect_id) + ".";
  for (const auto& [key, range] : overrides) {
    if (key.rfind(prefix, 0) != 0) continue;
    const std::string pname = key.substr(prefix.size());
    bool found = false;
    for (auto& s : specs) {
      if (s.name == pname) {
        s.min = range.first;
        s.max = range.second;
        found = true;
      }
    }
    if (!found) throw Error(Errc::Config, "range override for unknown parameter '" + key + "'");
  }
  for (const auto& s : specs) s.validate();
  return specs;
}

std::string range_table_hash(std::span<const ParamSpec> specs) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  char buf[64];
  for (const auto& s : specs) {
    std::snprintf(buf, sizeof buf, "|%.17g|%.17g|%d|", s.min, s.max, static_cast<int>(s.scale));
    feed(s.name);
    feed(buf);
  }
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace fxchain

namespace fxchain::ad::detail {

void register_params(PrimitiveRegistry& r) {
  r.define("denormalize", [](const Tape&, const Node& n, std::span<const double> g,
                             std::span<std::vector<double>* const> gi) {
    if (gi[0] == nullptr) return;
    for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] * n.saved[i];
  });
}

}  // namespace fxchain::ad::detail
