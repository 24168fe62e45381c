#include "fxchain/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "fxchain/effects.hpp"
#include "fxchain/error.hpp"

namespace fxchain {
namespace {

using nlohmann::json;

// Reads known keys of one object and rejects the rest.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw Error(Errc::Config, where_ + " must be an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items()) {
      if (!used_.contains(key)) throw Error(Errc::Config, "unknown key '" + where_ + key + "'");
    }
  }
  template <class T>
  void get(const std::string& key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw Error(Errc::Config, "key '" + where_ + key + "' has the wrong type");
    }
  }
  const json* object(const std::string& key) {
    used_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  std::string path(const std::string& key) const { return where_ + key + "."; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

}  // namespace

json to_json(const MelConfig& m) {
  return {{"fft_size", m.fft_size}, {"hop", m.hop}, {"mel_bands", m.mel_bands}, {"sample_rate", m.sample_rate},
          {"log_floor", m.log_floor}};
}

MelConfig mel_from_json(const json& j) {
  MelConfig m;
  Reader r(j, "mel.");
  r.get("fft_size", m.fft_size);
  r.get("hop", m.hop);
  r.get("mel_bands", m.mel_bands);
  r.get("sample_rate", m.sample_rate);
  r.get("log_floor", m.log_floor);
  return m;
}

json to_json(const ParamSpec& s) {
  return {{"name", s.name}, {"min", s.min}, {"max", s.max},
          {"scale", s.scale == Scale::Linear ? "linear" : "log"}, {"unit", s.unit}};
}

ParamSpec spec_from_json(const json& j) {
  ParamSpec s;
  std::string scale = "linear";
  Reader r(j, "spec.");
  r.get("name", s.name);
  r.get("min", s.min);
  r.get("max", s.max);
  r.get("scale", scale);
  r.get("unit", s.unit);
  if (scale != "linear" && scale != "log") throw Error(Errc::Config, "spec scale must be linear or log");
  s.scale = scale == "log" ? Scale::Logarithmic : Scale::Linear;
  return s;
}

json to_json(const ExperimentConfig& c) {
  json ranges = json::object();
  for (const auto& [k, v] : c.ranges) ranges[k] = {v.first, v.second};
  json j;
  j["chain_s"] = c.chain_s;
  j["chain_a"] = c.chain_a;
  j["ranges"] = ranges;
  j["mel"] = to_json(c.mel);
  j["encoder"] = {{"waveform_stats", c.waveform_stats}};
  j["train"] = {{"learning_rate", c.train.learning_rate},   {"batch_size", c.train.batch_size},
                {"max_epochs", c.train.max_epochs},         {"epoch_size", c.train.epoch_size},
                {"patience_lr", c.train.patience_lr},       {"patience_stop", c.train.patience_stop},
                {"objective", to_string(c.train.objective)}, {"hidden_divisor", c.train.hidden_divisor}};
  j["fit"] = {{"max_steps", c.fit.max_steps},
              {"learning_rate", c.fit.learning_rate},
              {"plateau", c.fit.plateau},
              {"target_loss", c.fit.target_loss},
              {"lr_patience", c.fit.lr_patience},
              {"lr_factor", c.fit.lr_factor},
              {"restarts", c.fit.restarts},
              {"screen", c.fit.screen},
              {"seed", c.fit.seed}};
  j["eval"] = {{"runs", c.eval.runs}};
  j["data"] = {{"duration_s", c.data.duration_s},           {"clips_per_song", c.data.clips_per_song},
               {"test_fraction", c.data.test_fraction},     {"synthetic_songs", c.data.synthetic_songs},
               {"synthetic_song_s", c.data.synthetic_song_s}, {"write_audio", c.data.write_audio}};
  j["gradcheck"] = {{"effects", c.gradcheck.effects},
                    {"draws", c.gradcheck.draws},
                    {"eps", c.gradcheck.eps},
                    {"duration_s", c.gradcheck.duration_s},
                    {"tolerance", c.gradcheck.tolerance}};
  j["proxy"] = {{"channels", c.proxy.channels},
                {"layers", c.proxy.layers},
                {"kernel", c.proxy.kernel},
                {"dilation_growth", c.proxy.dilation_growth},
                {"conditioning_width", c.proxy.conditioning_width},
                {"steps", c.proxy_train.steps},
                {"batch_size", c.proxy_train.batch_size},
                {"segment_s", c.proxy_train.segment_s},
                {"learning_rate", c.proxy_train.learning_rate},
                {"holdout_fraction", c.proxy_train.holdout_fraction},
                {"eval_draws", c.proxy_train.eval_draws},
                {"checkpoint", c.proxy_checkpoint}};
  j["corpus"] = c.corpus;
  j["out"] = c.out;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  {
    Reader r(j, "");
    r.get("chain_s", c.chain_s);
    r.get("chain_a", c.chain_a);
    r.get("corpus", c.corpus);
    r.get("out", c.out);
    r.get("seed", c.seed);
    r.get("threads", c.threads);
    if (const json* rj = r.object("ranges")) {
      if (!rj->is_object()) throw Error(Errc::Config, "ranges must be an object");
      for (const auto& [k, v] : rj->items()) {
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
          throw Error(Errc::Config, "range '" + k + "' must be [min, max]");
        }
        c.ranges[k] = {v[0].get<double>(), v[1].get<double>()};
      }
    }
    if (const json* m = r.object("mel")) c.mel = mel_from_json(*m);
    if (const json* e = r.object("encoder")) {
      Reader er(*e, "encoder.");
      er.get("waveform_stats", c.waveform_stats);
    }
    if (const json* t = r.object("train")) {
      Reader tr(*t, "train.");
      std::string objective(to_string(c.train.objective));
      tr.get("learning_rate", c.train.learning_rate);
      tr.get("batch_size", c.train.batch_size);
      tr.get("max_epochs", c.train.max_epochs);
      tr.get("epoch_size", c.train.epoch_size);
      tr.get("patience_lr", c.train.patience_lr);
      tr.get("patience_stop", c.train.patience_stop);
      tr.get("objective", objective);
      tr.get("hidden_divisor", c.train.hidden_divisor);
      c.train.objective = parse_objective(objective);
    }
    if (const json* f = r.object("fit")) {
      Reader fr(*f, "fit.");
      fr.get("max_steps", c.fit.max_steps);
      fr.get("learning_rate", c.fit.learning_rate);
      fr.get("plateau", c.fit.plateau);
      fr.get("target_loss", c.fit.target_loss);
      fr.get("lr_patience", c.fit.lr_patience);
      fr.get("lr_factor", c.fit.lr_factor);
      fr.get("restarts", c.fit.restarts);
      fr.get("screen", c.fit.screen);
      fr.get("seed", c.fit.seed);
    }
    if (const json* e = r.object("eval")) {
      Reader er(*e, "eval.");
      er.get("runs", c.eval.runs);
    }
    if (const json* d = r.object("data")) {
      Reader dr(*d, "data.");
      dr.get("duration_s", c.data.duration_s);
      dr.get("clips_per_song", c.data.clips_per_song);
      dr.get("test_fraction", c.data.test_fraction);
      dr.get("synthetic_songs", c.data.synthetic_songs);
      dr.get("synthetic_song_s", c.data.synthetic_song_s);
      dr.get("write_audio", c.data.write_audio);
    }
    if (const json* g = r.object("gradcheck")) {
      Reader gr(*g, "gradcheck.");
      gr.get("effects", c.gradcheck.effects);
      gr.get("draws", c.gradcheck.draws);
      gr.get("eps", c.gradcheck.eps);
      gr.get("duration_s", c.gradcheck.duration_s);
      gr.get("tolerance", c.gradcheck.tolerance);
    }
    if (const json* p = r.object("proxy")) {
      Reader pr(*p, "proxy.");
      pr.get("channels", c.proxy.channels);
      pr.get("layers", c.proxy.layers);
      pr.get("kernel", c.proxy.kernel);
      pr.get("dilation_growth", c.proxy.dilation_growth);
      pr.get("conditioning_width", c.proxy.conditioning_width);
      pr.get("steps", c.proxy_train.steps);
      pr.get("batch_size", c.proxy_train.batch_size);
      pr.get("segment_s", c.proxy_train.segment_s);
      pr.get("learning_rate", c.proxy_train.learning_rate);
      pr.get("holdout_fraction", c.proxy_train.holdout_fraction);
      pr.get("eval_draws", c.proxy_train.eval_draws);
      pr.get("checkpoint", c.proxy_checkpoint);
    }
  }
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  mel.validate();
  train.validate();
  proxy.validate();
  if (threads == 0) throw Error(Errc::Config, "threads must be at least 1");
  if (!(data.duration_s > 0.0)) throw Error(Errc::Config, "data.duration_s must be positive");
  if (data.clips_per_song == 0) throw Error(Errc::Config, "data.clips_per_song must be positive");
  if (!(data.test_fraction >= 0.0 && data.test_fraction < 1.0)) throw Error(Errc::Config, "data.test_fraction must be in [0,1)");
  if (fit.max_steps == 0 || !(fit.learning_rate > 0.0)) throw Error(Errc::Config, "fit needs positive steps and rate");
  if (eval.runs == 0) throw Error(Errc::Config, "eval.runs must be positive");
  if (!(gradcheck.eps >= 1e-6 && gradcheck.eps <= 1e-2)) throw Error(Errc::Config, "gradcheck.eps must be in [1e-6, 1e-2]");
  if (gradcheck.draws == 0) throw Error(Errc::Config, "gradcheck.draws must be positive");
  if (proxy_train.steps == 0 || proxy_train.batch_size == 0) throw Error(Errc::Config, "proxy steps and batch must be positive");
  // Chains and ranges must resolve; comp-proxy is checked once its model is loaded.
  for (const auto* spec : {&chain_s, &chain_a}) {
    std::string plain = *spec;
    for (std::size_t at; (at = plain.find("comp-proxy")) != std::string::npos;) plain.replace(at, 10, "comp");
    EffectChain::parse(plain, {ranges, nullptr});
  }
  for (const auto& [key, range] : ranges) {
    const auto dot = key.find('.');
    if (dot == std::string::npos) throw Error(Errc::Config, "range key '" + key + "' must be effect.param");
    specs_for(key.substr(0, dot), ranges);
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot read config '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(Errc::Config, "config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw Error(Errc::Config, "override '" + assignment + "' must be key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  json j = to_json(cfg);
  std::string pointer = "/" + key;
  for (auto& ch : pointer) {
    if (ch == '.') ch = '/';
  }
  if (key.rfind("ranges.", 0) == 0) {
    j["ranges"][key.substr(7)] = value;
  } else {
    const json::json_pointer ptr(pointer);
    if (!j.contains(ptr)) throw Error(Errc::Config, "unknown key '" + key + "'");
    j[ptr] = value;
  }
  cfg = config_from_json(j);
}

}  // namespace fxchain
