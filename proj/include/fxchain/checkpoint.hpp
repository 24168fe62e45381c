#pragma once

// Versioned binary container for trained models:
//   "FXCK" | u32 version | u64 header length | JSON header | float32 tensors
// The header lists the tensors in storage order with their sizes, plus the
// model description needed to rebuild it.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "fxchain/estimation.hpp"
#include "fxchain/proxy.hpp"

namespace fxchain::checkpoint {

inline constexpr std::uint32_t kVersion = 1;

struct Container {
  nlohmann::json header;
  std::vector<std::pair<std::string, std::vector<float>>> tensors;
  const std::vector<float>& tensor(const std::string& name) const;
};

std::vector<std::uint8_t> encode(const Container& c);
// Throws Errc::CorruptHeader on malformed input.
Container decode(const std::vector<std::uint8_t>& bytes);
void write(const std::filesystem::path& path, const Container& c);
Container read(const std::filesystem::path& path);

void save_network(const std::filesystem::path& path, const AnalysisNetwork& net, const nlohmann::json& extra = {});
// Weights come back rounded to float32. Throws Errc::ShapeMismatch when the
// stored tensors do not fit the stored shapes.
AnalysisNetwork load_network(const std::filesystem::path& path);
// The network as it will be after a save/load round trip.
AnalysisNetwork quantized(const AnalysisNetwork& net);

void save_proxy(const std::filesystem::path& path, const proxy::ProxyModel& model,
                const std::vector<ParamSpec>& specs, const nlohmann::json& extra = {});
proxy::ProxyModel load_proxy(const std::filesystem::path& path, std::vector<ParamSpec>* specs = nullptr);

}  // namespace fxchain::checkpoint
