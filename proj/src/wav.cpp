#include "fxchain/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "fxchain/error.hpp"

namespace fxchain::wav {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | static_cast<std::uint32_t>(b[at + 1]) << 8 |
         static_cast<std::uint32_t>(b[at + 2]) << 16 | static_cast<std::uint32_t>(b[at + 3]) << 24;
}
std::uint16_t u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | b[at + 1] << 8);
}
bool tag(std::span<const std::uint8_t> b, std::size_t at, const char* t) { return std::memcmp(&b[at], t, 4) == 0; }

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_tag(std::vector<std::uint8_t>& out, const char* t) { out.insert(out.end(), t, t + 4); }

}  // namespace

std::vector<AudioBuffer> decode(std::span<const std::uint8_t> b) {
  if (b.size() < 12) throw Error(Errc::CorruptHeader, "file too short for a RIFF header");
  if (tag(b, 0, "RIFX")) throw Error(Errc::UnsupportedFormat, "big-endian WAV is not supported");
  if (!tag(b, 0, "RIFF") || !tag(b, 8, "WAVE")) throw Error(Errc::CorruptHeader, "not a RIFF/WAVE file");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
  std::uint32_t rate = 0;
  std::span<const std::uint8_t> data;
  bool have_data = false;
  std::size_t at = 12;
  while (at + 8 <= b.size()) {
    const std::uint32_t size = u32(b, at + 4);
    const std::size_t body = at + 8;
    if (size > b.size() - body) throw Error(Errc::CorruptHeader, "chunk extends past the end of the file");
    if (tag(b, at, "fmt ")) {
      if (size < 16) throw Error(Errc::CorruptHeader, "fmt chunk too short");
      format = u16(b, body);
      channels = u16(b, body + 2);
      rate = u32(b, body + 4);
      block_align = u16(b, body + 12);
      bits = u16(b, body + 14);
      if (format == kFormatExtensible) {
        if (size < 40) throw Error(Errc::CorruptHeader, "extensible fmt chunk too short");
        format = u16(b, body + 24);
      }
      have_fmt = true;
    } else if (tag(b, at, "data")) {
      data = b.subspan(body, size);
      have_data = true;
      break;
    }
    at = body + size + (size & 1U);
  }
  if (!have_fmt) throw Error(Errc::CorruptHeader, "missing fmt chunk");
  if (!have_data) throw Error(Errc::CorruptHeader, "missing or truncated data chunk");

  const bool pcm = format == kFormatPcm && (bits == 16 || bits == 24);
  const bool flt = format == kFormatFloat && bits == 32;
  if (!pcm && !flt) {
    throw Error(Errc::UnsupportedFormat,
                "unsupported sample format " + std::to_string(format) + " with " + std::to_string(bits) + " bits");
  }
  if (channels == 0 || rate == 0) throw Error(Errc::CorruptHeader, "zero channels or sample rate");
  const std::size_t width = bits / 8U;
  if (block_align != channels * width) throw Error(Errc::CorruptHeader, "block alignment does not match the format");
  if (data.size() % block_align != 0) throw Error(Errc::CorruptHeader, "data chunk holds a partial frame");
  const std::size_t frames = data.size() / block_align;
  if (frames == 0) throw Error(Errc::CorruptHeader, "data chunk is empty");

  std::vector<std::vector<double>> ch(channels, std::vector<double>(frames));
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t p = f * block_align + c * width;
      double v = 0.0;
      if (flt) {
        v = std::bit_cast<float>(u32(data, p));
      } else if (bits == 16) {
        v = static_cast<std::int16_t>(u16(data, p)) / 32768.0;
      } else {
        std::int32_t s = data[p] | data[p + 1] << 8 | data[p + 2] << 16;
        if (s & 0x800000) s -= 0x1000000;
        v = s / 8388608.0;
      }
      ch[c][f] = v;
    }
  }
  std::vector<AudioBuffer> out;
  for (auto& c : ch) out.emplace_back(std::move(c), static_cast<int>(rate));
  return out;
}

std::vector<std::uint8_t> encode(std::span<const AudioBuffer> channels, SampleFormat format) {
  if (channels.empty()) throw Error(Errc::InvalidArgument, "no channels to write");
  const std::size_t frames = channels.front().size();
  const int rate = channels.front().sample_rate();
  for (const auto& c : channels) {
    if (c.size() != frames || c.sample_rate() != rate) {
      throw Error(Errc::MismatchedLength, "channels differ in length or sample rate");
    }
  }
  const std::uint16_t width = format == SampleFormat::Pcm16 ? 2 : (format == SampleFormat::Pcm24 ? 3 : 4);
  const auto nch = static_cast<std::uint16_t>(channels.size());
  const auto data_size = static_cast<std::uint32_t>(frames * nch * width);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size + 1);
  put_tag(out, "RIFF");
  put32(out, 36 + data_size + (data_size & 1U));
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put32(out, 16);
  put16(out, format == SampleFormat::Float32 ? kFormatFloat : kFormatPcm);
  put16(out, nch);
  put32(out, static_cast<std::uint32_t>(rate));
  put32(out, static_cast<std::uint32_t>(rate) * nch * width);
  put16(out, static_cast<std::uint16_t>(nch * width));
  put16(out, static_cast<std::uint16_t>(8 * width));
  put_tag(out, "data");
  put32(out, data_size);
  for (std::size_t f = 0; f < frames; ++f) {
    for (const auto& c : channels) {
      const double v = c[f];
      if (format == SampleFormat::Float32) {
        put32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      } else if (format == SampleFormat::Pcm16) {
        const auto s = static_cast<std::int32_t>(std::clamp(std::lround(v * 32768.0), -32768L, 32767L));
        put16(out, static_cast<std::uint16_t>(s));
      } else {
        const auto s = static_cast<std::int32_t>(std::clamp(std::lround(v * 8388608.0), -8388608L, 8388607L));
        for (int i = 0; i < 3; ++i) out.push_back(static_cast<std::uint8_t>(static_cast<std::uint32_t>(s) >> (8 * i)));
      }
    }
  }
  if (data_size & 1U) out.push_back(0);
  return out;
}

std::vector<AudioBuffer> load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open '" + path.string() + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode(bytes);
}

void save_wav(const std::filesystem::path& path, std::span<const AudioBuffer> channels, SampleFormat format) {
  const auto bytes = encode(channels, format);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::Io, "write failed for '" + path.string() + "'");
}

void save_wav(const std::filesystem::path& path, const AudioBuffer& mono, SampleFormat format) {
  save_wav(path, std::span<const AudioBuffer>(&mono, 1), format);
}

}  // namespace fxchain::wav
