#include "fxchain/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "fxchain/config.hpp"
#include "fxchain/error.hpp"

namespace fxchain::checkpoint {
namespace {

using nlohmann::json;
constexpr char kMagic[4] = {'F', 'X', 'C', 'K'};

std::vector<float> to_float(std::span<const double> v) { return {v.begin(), v.end()}; }
std::vector<double> to_double(const std::vector<float>& v) { return {v.begin(), v.end()}; }

void put(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
std::uint64_t get(const std::vector<std::uint8_t>& in, std::size_t at, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(in[at + i]) << (8 * i);
  return v;
}

json specs_json(const std::vector<ParamSpec>& specs) {
  json arr = json::array();
  for (const auto& s : specs) arr.push_back(to_json(s));
  return arr;
}
std::vector<ParamSpec> specs_from(const json& arr) {
  std::vector<ParamSpec> out;
  for (const auto& s : arr) out.push_back(spec_from_json(s));
  return out;
}

}  // namespace

const std::vector<float>& Container::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw Error(Errc::ShapeMismatch, "checkpoint has no tensor '" + name + "'");
}

std::vector<std::uint8_t> encode(const Container& c) {
  json header = c.header;
  header["tensors"] = json::array();
  for (const auto& [name, t] : c.tensors) header["tensors"].push_back({{"name", name}, {"size", t.size()}});
  const std::string h = header.dump();
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put(out, kVersion, 4);
  put(out, h.size(), 8);
  out.insert(out.end(), h.begin(), h.end());
  for (const auto& [name, t] : c.tensors) {
    for (float f : t) put(out, std::bit_cast<std::uint32_t>(f), 4);
  }
  return out;
}

Container decode(const std::vector<std::uint8_t>& in) {
  if (in.size() < 16 || std::memcmp(in.data(), kMagic, 4) != 0) throw Error(Errc::CorruptHeader, "not a checkpoint");
  if (get(in, 4, 4) != kVersion) throw Error(Errc::CorruptHeader, "unsupported checkpoint version");
  const std::uint64_t hlen = get(in, 8, 8);
  if (hlen > in.size() - 16) throw Error(Errc::CorruptHeader, "checkpoint header is truncated");
  Container c;
  try {
    c.header = json::parse(in.begin() + 16, in.begin() + 16 + static_cast<std::ptrdiff_t>(hlen));
  } catch (const json::exception&) {
    throw Error(Errc::CorruptHeader, "checkpoint header is not valid JSON");
  }
  std::size_t at = 16 + hlen;
  for (const auto& t : c.header.at("tensors")) {
    const auto n = t.at("size").get<std::size_t>();
    if (n > (in.size() - at) / 4) throw Error(Errc::CorruptHeader, "checkpoint tensor data is truncated");
    std::vector<float> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get(in, at + 4 * i, 4)));
    at += 4 * n;
    c.tensors.emplace_back(t.at("name").get<std::string>(), std::move(v));
  }
  if (at != in.size()) throw Error(Errc::CorruptHeader, "trailing bytes after checkpoint tensors");
  c.header.erase("tensors");
  return c;
}

void write(const std::filesystem::path& path, const Container& c) {
  const auto bytes = encode(c);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::Io, "write failed for '" + path.string() + "'");
}

Container read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read '" + path.string() + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode(bytes);
}

namespace {

Container network_container(const AnalysisNetwork& net, const json& extra) {
  Container c;
  c.header = {{"kind", "analysis_network"},
              {"chain_id", net.chain_id},
              {"specs", specs_json(net.specs)},
              {"mel", to_json(net.encoder.mel)},
              {"encoder", {{"waveform_stats", net.encoder.waveform_stats}, {"histogram_bins", net.encoder.histogram_bins}}},
              {"mlp", {{"inputs", net.mlp.shape().inputs}, {"hidden", net.mlp.shape().hidden}, {"outputs", net.mlp.shape().outputs}}},
              {"clip_length", net.clip_length},
              {"sample_rate", net.sample_rate},
              {"extra", extra}};
  c.tensors.emplace_back("mlp.weights", to_float(net.mlp.weights()));
  c.tensors.emplace_back("mlp.running", to_float(net.mlp.running()));
  c.tensors.emplace_back("scaler.mean", to_float(net.scaler.mean));
  c.tensors.emplace_back("scaler.scale", to_float(net.scaler.scale));
  return c;
}

AnalysisNetwork network_from(const Container& c) {
  try {
    const auto& h = c.header;
    if (h.at("kind") != "analysis_network") throw Error(Errc::ShapeMismatch, "checkpoint does not hold an analysis network");
    AnalysisNetwork net;
    net.chain_id = h.at("chain_id").get<std::string>();
    net.specs = specs_from(h.at("specs"));
    net.encoder.mel = mel_from_json(h.at("mel"));
    net.encoder.waveform_stats = h.at("encoder").at("waveform_stats").get<bool>();
    net.encoder.histogram_bins = h.at("encoder").at("histogram_bins").get<std::size_t>();
    nn::MlpShape shape{h.at("mlp").at("inputs").get<std::size_t>(), h.at("mlp").at("hidden").get<std::vector<std::size_t>>(),
                       h.at("mlp").at("outputs").get<std::size_t>()};
    if (shape.inputs != net.encoder.embedding_size() || shape.outputs != net.specs.size()) {
      throw Error(Errc::ShapeMismatch, "network shape does not match its encoder and parameter table");
    }
    net.mlp = nn::Mlp(std::move(shape), to_double(c.tensor("mlp.weights")), to_double(c.tensor("mlp.running")));
    net.scaler.mean = to_double(c.tensor("scaler.mean"));
    net.scaler.scale = to_double(c.tensor("scaler.scale"));
    if (net.scaler.mean.size() != net.encoder.embedding_size() || net.scaler.scale.size() != net.scaler.mean.size()) {
      throw Error(Errc::ShapeMismatch, "feature scaling does not match the encoder");
    }
    net.clip_length = h.at("clip_length").get<std::size_t>();
    net.sample_rate = h.at("sample_rate").get<int>();
    return net;
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptHeader, std::string("checkpoint header: ") + e.what());
  }
}

}  // namespace

void save_network(const std::filesystem::path& path, const AnalysisNetwork& net, const json& extra) {
  write(path, network_container(net, extra));
}

AnalysisNetwork load_network(const std::filesystem::path& path) { return network_from(read(path)); }

AnalysisNetwork quantized(const AnalysisNetwork& net) { return network_from(decode(encode(network_container(net, {})))); }

void save_proxy(const std::filesystem::path& path, const proxy::ProxyModel& model, const std::vector<ParamSpec>& specs,
                const json& extra) {
  const auto& cfg = model.config();
  Container c;
  c.header = {{"kind", "proxy"},
              {"config",
               {{"channels", cfg.channels},
                {"layers", cfg.layers},
                {"kernel", cfg.kernel},
                {"dilation_growth", cfg.dilation_growth},
                {"conditioning_width", cfg.conditioning_width}}},
              {"specs", specs_json(specs)},
              {"extra", extra}};
  c.tensors.emplace_back("weights", to_float(model.weights()));
  write(path, c);
}

proxy::ProxyModel load_proxy(const std::filesystem::path& path, std::vector<ParamSpec>* specs) {
  const auto c = read(path);
  try {
    if (c.header.at("kind") != "proxy") throw Error(Errc::ShapeMismatch, "checkpoint does not hold a proxy model");
    const auto& j = c.header.at("config");
    proxy::ProxyConfig cfg{j.at("channels").get<std::size_t>(), j.at("layers").get<std::size_t>(),
                           j.at("kernel").get<std::size_t>(), j.at("dilation_growth").get<std::size_t>(),
                           j.at("conditioning_width").get<std::size_t>()};
    if (specs != nullptr) *specs = specs_from(c.header.at("specs"));
    return proxy::ProxyModel(cfg, to_double(c.tensor("weights")));
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptHeader, std::string("checkpoint header: ") + e.what());
  }
}

}  // namespace fxchain::checkpoint
