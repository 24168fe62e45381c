#pragma once

// RIFF/WAVE reading and writing: 16/24-bit PCM and 32-bit float,
// little-endian. Integer samples are scaled by 1 / 2^(bits-1).

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fxchain/signal.hpp"

namespace fxchain::wav {

enum class SampleFormat { Pcm16, Pcm24, Float32 };

// One buffer per channel. Throws Errc::UnsupportedFormat or Errc::CorruptHeader.
std::vector<AudioBuffer> decode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode(std::span<const AudioBuffer> channels, SampleFormat format);

// Throws Errc::Io when the file cannot be read or written.
std::vector<AudioBuffer> load_wav(const std::filesystem::path& path);
void save_wav(const std::filesystem::path& path, std::span<const AudioBuffer> channels,
              SampleFormat format = SampleFormat::Float32);
void save_wav(const std::filesystem::path& path, const AudioBuffer& mono,
              SampleFormat format = SampleFormat::Float32);

}  // namespace fxchain::wav
