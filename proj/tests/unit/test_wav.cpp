#include <doctest.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "fxchain/error.hpp"
#include "fxchain/wav.hpp"
#include "support.hpp"

using namespace fxchain;

namespace {

void put(std::vector<std::uint8_t>& b, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put(std::vector<std::uint8_t>& b, const char* s) { b.insert(b.end(), s, s + 4); }

// Hand-assembled canonical WAV file, optionally with an extra chunk before data.
std::vector<std::uint8_t> make_wav(int format, int channels, int rate, int bits, const std::vector<std::uint8_t>& data,
                                   bool junk = false) {
  std::vector<std::uint8_t> body;
  put(body, "WAVE");
  put(body, "fmt ");
  put(body, 16, 4);
  put(body, format, 2);
  put(body, channels, 2);
  put(body, rate, 4);
  put(body, rate * channels * bits / 8, 4);
  put(body, channels * bits / 8, 2);
  put(body, bits, 2);
  if (junk) {
    put(body, "LIST");
    put(body, 3, 4);
    body.insert(body.end(), {1, 2, 3, 0});  // odd size plus pad byte
  }
  put(body, "data");
  put(body, data.size(), 4);
  body.insert(body.end(), data.begin(), data.end());
  std::vector<std::uint8_t> out;
  put(out, "RIFF");
  put(out, body.size(), 4);
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

Errc code_of(const std::vector<std::uint8_t>& bytes) {
  try {
    wav::decode(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::Config;
}

}  // namespace

TEST_CASE("decoding hand-built PCM16 stereo") {
  std::vector<std::uint8_t> data;
  for (int v : {16384, -32768, 0, 32767}) put(data, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)), 2);
  for (bool junk : {false, true}) {
    const auto ch = wav::decode(make_wav(1, 2, 22050, 16, data, junk));
    REQUIRE(ch.size() == 2);
    CHECK(ch[0].sample_rate() == 22050);
    CHECK(ch[0].samples() == std::vector<double>{0.5, 0.0});
    CHECK(ch[1].samples() == std::vector<double>{-1.0, 32767.0 / 32768.0});
  }
}

TEST_CASE("decoding PCM24 and float") {
  std::vector<std::uint8_t> d24;
  put(d24, 0x400000, 3);  // 0.5
  put(d24, 0xC00000, 3);  // -0.5
  CHECK(wav::decode(make_wav(1, 1, 44100, 24, d24))[0].samples() == std::vector<double>{0.5, -0.5});

  std::vector<std::uint8_t> df;
  for (float f : {0.25f, -0.75f}) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    put(df, u, 4);
  }
  CHECK(wav::decode(make_wav(3, 1, 48000, 32, df))[0].samples() == std::vector<double>{0.25, -0.75});
}

TEST_CASE("round trips") {
  testing::Gen gen(91);
  std::vector<AudioBuffer> ch;
  for (int c = 0; c < 2; ++c) {
    auto v = gen.uniform_vec(1000, -1.0, 1.0);
    for (double& s : v) s = static_cast<float>(s);
    ch.emplace_back(v, 44100);
  }
  const auto f = wav::decode(wav::encode(ch, wav::SampleFormat::Float32));
  CHECK(f[0] == ch[0]);
  CHECK(f[1] == ch[1]);
  const auto p16 = wav::decode(wav::encode(ch, wav::SampleFormat::Pcm16));
  CHECK(testing::max_abs_diff(p16[0].samples(), ch[0].samples()) <= 1.0 / 32768);
  const auto p24 = wav::decode(wav::encode(ch, wav::SampleFormat::Pcm24));
  CHECK(testing::max_abs_diff(p24[1].samples(), ch[1].samples()) <= 1.0 / 8388608);

  const auto dir = testing::fresh_dir("wav");
  wav::save_wav(dir / "a.wav", ch[0]);
  CHECK(wav::load_wav(dir / "a.wav")[0] == ch[0]);
}

TEST_CASE("malformed and unsupported files") {
  std::vector<std::uint8_t> data(4, 0);
  CHECK(code_of({1, 2, 3}) == Errc::CorruptHeader);
  auto riff = make_wav(1, 1, 44100, 16, data);
  riff[0] = 'X';
  CHECK(code_of(riff) == Errc::CorruptHeader);
  auto rifx = make_wav(1, 1, 44100, 16, data);
  rifx[3] = 'X';
  CHECK(code_of(rifx) == Errc::UnsupportedFormat);
  CHECK(code_of(make_wav(1, 1, 44100, 8, data)) == Errc::UnsupportedFormat);
  CHECK(code_of(make_wav(2, 1, 44100, 16, data)) == Errc::UnsupportedFormat);
  auto truncated = make_wav(1, 1, 44100, 16, data);
  truncated.resize(truncated.size() - 2);
  CHECK(code_of(truncated) == Errc::CorruptHeader);
  CHECK(code_of(make_wav(1, 2, 44100, 16, std::vector<std::uint8_t>(6, 0))) == Errc::CorruptHeader);
  CHECK(code_of(make_wav(1, 1, 44100, 16, {})) == Errc::CorruptHeader);

  try {
    wav::load_wav("/nonexistent/dir/x.wav");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::Io);
  }
}
