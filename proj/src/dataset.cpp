#include "fxchain/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>

#include "fxchain/error.hpp"
#include "fxchain/parallel.hpp"
#include "fxchain/random.hpp"
#include "fxchain/wav.hpp"

namespace fxchain::data {
namespace fs = std::filesystem;
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kMusdbValidationFraction = 0.14;
constexpr double kValidationFraction = 0.15;

std::uint64_t name_hash(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Uniform [0,1) with 53 random bits.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit(rng); }
std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(unit(rng) * n); }

void shuffle(std::vector<std::size_t>& v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[pick(rng, i)]);
}

// Adds a decaying harmonic note to out.
void add_note(std::vector<double>& out, int fs, double start_s, double length_s, double freq, double amp,
              double decay_s, std::span<const double> harmonics) {
  const auto begin = static_cast<std::size_t>(start_s * fs);
  const auto end = std::min(out.size(), static_cast<std::size_t>((start_s + length_s) * fs));
  const double attack = 0.005;
  for (std::size_t n = begin; n < end; ++n) {
    const double t = static_cast<double>(n - begin) / fs;
    const double env = std::min(1.0, t / attack) * std::exp(-t / decay_s);
    double s = 0.0;
    for (std::size_t h = 0; h < harmonics.size(); ++h) {
      const double f = freq * static_cast<double>(h + 1);
      if (f >= 0.45 * fs) break;
      s += harmonics[h] * std::sin(kTwoPi * f * t);
    }
    out[n] += amp * env * s;
  }
}

void add_noise_hit(std::vector<double>& out, int fs, double start_s, double amp, double decay_s, bool bright,
                   std::mt19937_64& rng) {
  const auto begin = static_cast<std::size_t>(start_s * fs);
  const auto end = std::min(out.size(), begin + static_cast<std::size_t>(6.0 * decay_s * fs));
  double prev = 0.0;
  for (std::size_t n = begin; n < end; ++n) {
    const double t = static_cast<double>(n - begin) / fs;
    const double w = uniform(rng, -1.0, 1.0);
    const double s = bright ? w - prev : w;
    prev = w;
    out[n] += amp * std::exp(-t / decay_s) * s;
  }
}

void add_kick(std::vector<double>& out, int fs, double start_s, double amp) {
  const auto begin = static_cast<std::size_t>(start_s * fs);
  const auto end = std::min(out.size(), begin + static_cast<std::size_t>(0.4 * fs));
  double phase = 0.0;
  for (std::size_t n = begin; n < end; ++n) {
    const double t = static_cast<double>(n - begin) / fs;
    const double f = 45.0 + 75.0 * std::exp(-t / 0.03);
    phase += kTwoPi * f / fs;
    out[n] += amp * std::exp(-t / 0.12) * std::sin(phase);
  }
}

}  // namespace

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train:
      return "train";
    case Split::Validation:
      return "validation";
    case Split::Test:
      return "test";
  }
  return "train";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "validation") return Split::Validation;
  if (s == "test") return Split::Test;
  throw Error(Errc::Config, "unknown split '" + std::string(s) + "'");
}

AudioBuffer synthetic_song(std::uint64_t seed, double duration_s, int fs) {
  if (!(duration_s > 0.0) || fs <= 0) throw Error(Errc::InvalidArgument, "song duration and rate must be positive");
  std::mt19937_64 rng(seed);
  std::vector<double> bass(samples_for(duration_s, fs), 0.0), pad(bass.size(), 0.0), lead(bass.size(), 0.0),
      drums(bass.size(), 0.0);
  const double beat = 60.0 / uniform(rng, 80.0, 140.0);
  const double root = 55.0 * std::pow(2.0, static_cast<double>(pick(rng, 12)) / 12.0);
  const int major[7] = {0, 2, 4, 5, 7, 9, 11};
  const int penta[5] = {0, 2, 4, 7, 9};
  int progression[4];
  for (int& d : progression) d = static_cast<int>(pick(rng, 7));
  const double bass_h[] = {1.0, 0.35, 0.15, 0.05};
  const double pad_h[] = {1.0, 0.5, 0.33, 0.25, 0.2, 0.16};
  const double lead_h[] = {1.0, 0.0, 0.11, 0.0, 0.04};
  auto degree_hz = [&](int degree, int octave) {
    const int semis = major[degree % 7] + 12 * (degree / 7);
    return root * std::pow(2.0, octave + semis / 12.0);
  };

  const auto beats = static_cast<std::size_t>(duration_s / beat) + 1;
  double bar_gain = 1.0;
  for (std::size_t b = 0; b < beats; ++b) {
    const double t = static_cast<double>(b) * beat;
    if (b % 4 == 0) bar_gain = uniform(rng, 0.35, 1.0);
    const int chord = progression[(b / 4) % 4];
    add_note(bass, fs, t, beat, degree_hz(chord, 0), 0.6 * bar_gain, 0.3, bass_h);
    if (b % 4 == 0) {
      for (int k : {0, 2, 4}) add_note(pad, fs, t, 4.0 * beat, degree_hz(chord + k, 2), 0.12 * bar_gain, 2.0, pad_h);
    }
    for (int half = 0; half < 2; ++half) {
      if (unit(rng) < 0.6) {
        const int semis = penta[pick(rng, 5)];
        const double f = root * std::pow(2.0, 3.0 + semis / 12.0);
        add_note(lead, fs, t + half * beat / 2.0, beat / 2.0, f, 0.3 * bar_gain, 0.2, lead_h);
      }
      add_noise_hit(drums, fs, t + half * beat / 2.0, 0.15 * bar_gain, 0.02, true, rng);
    }
    if (b % 2 == 0) add_kick(drums, fs, t, 0.9 * bar_gain);
    else add_noise_hit(drums, fs, t, 0.5 * bar_gain, 0.07, false, rng);
  }
  const double mix[4] = {uniform(rng, 0.6, 1.0), uniform(rng, 0.4, 1.0), uniform(rng, 0.4, 1.0), uniform(rng, 0.5, 1.0)};
  std::vector<double> out(bass.size());
  for (std::size_t n = 0; n < out.size(); ++n) {
    out[n] = mix[0] * bass[n] + mix[1] * pad[n] + mix[2] * lead[n] + mix[3] * drums[n];
  }
  return peak_normalize(AudioBuffer(std::move(out), fs));
}

std::vector<Song> synthetic_corpus(const SyntheticCorpusConfig& cfg, double test_fraction) {
  std::vector<Song> songs(cfg.songs, Song{"", AudioBuffer({0.0}, cfg.sample_rate)});
  parallel_for(cfg.songs, [&](std::size_t i) {
    char name[32];
    std::snprintf(name, sizeof name, "song%03zu.wav", i);
    songs[i] = Song{name, synthetic_song(derive_seed(cfg.seed, {i}), cfg.duration_s, cfg.sample_rate)};
  });
  assign_splits(songs, cfg.seed, test_fraction);
  return songs;
}

void write_corpus(const fs::path& dir, std::span<const Song> songs) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::Io, "cannot create '" + dir.string() + "': " + ec.message());
  for (const auto& s : songs) wav::save_wav(dir / s.name, s.audio);
}

bool is_musdb_layout(const fs::path& dir) {
  return fs::is_directory(dir / "train") && fs::is_directory(dir / "test");
}

std::vector<std::string> list_songs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(Errc::Io, "corpus directory '" + dir.string() + "' does not exist");
  std::vector<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".wav") out.push_back(fs::relative(e.path(), dir).generic_string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

SplitManifest split_songs(std::span<const std::string> songs, bool musdb, std::uint64_t seed, double test_fraction) {
  SplitManifest m;
  m.seed = seed;
  std::vector<std::string> pool;
  if (musdb) {
    for (const auto& s : songs) {
      if (s.rfind("test/", 0) == 0) m.test.push_back(s);
      else pool.push_back(s);
    }
  } else {
    std::vector<std::size_t> idx(songs.size());
    std::iota(idx.begin(), idx.end(), 0);
    shuffle(idx, derive_seed(seed, {0x7e57}));
    auto n_test = static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(songs.size())));
    if (songs.size() >= 3 && test_fraction > 0.0) n_test = std::max<std::size_t>(n_test, 1);
    for (std::size_t i = 0; i < idx.size(); ++i) (i < n_test ? m.test : pool).push_back(songs[idx[i]]);
    std::sort(m.test.begin(), m.test.end());
    std::sort(pool.begin(), pool.end());
  }
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), 0);
  shuffle(idx, derive_seed(seed, {0x7a11d}));
  const double frac = musdb ? kMusdbValidationFraction : kValidationFraction;
  auto n_val = static_cast<std::size_t>(std::lround(frac * static_cast<double>(pool.size())));
  if (pool.size() >= 2) n_val = std::clamp<std::size_t>(n_val, 1, pool.size() - 1);
  for (std::size_t i = 0; i < idx.size(); ++i) (i < n_val ? m.validation : m.train).push_back(pool[idx[i]]);
  std::sort(m.validation.begin(), m.validation.end());
  std::sort(m.train.begin(), m.train.end());
  return m;
}

Split split_of(const SplitManifest& m, std::string_view song) {
  if (std::find(m.test.begin(), m.test.end(), song) != m.test.end()) return Split::Test;
  if (std::find(m.validation.begin(), m.validation.end(), song) != m.validation.end()) return Split::Validation;
  return Split::Train;
}

void assign_splits(std::vector<Song>& songs, std::uint64_t seed, double test_fraction) {
  std::vector<std::string> names;
  for (const auto& s : songs) names.push_back(s.name);
  const auto m = split_songs(names, false, seed, test_fraction);
  for (auto& s : songs) s.split = split_of(m, s.name);
}

AudioBuffer load_song(const fs::path& path) {
  const auto channels = wav::load_wav(path);
  return channels.size() == 1 ? channels.front() : mono_downmix(channels);
}

Clip clip_at(const Song& song, std::size_t offset, std::size_t length, std::uint64_t seed) {
  if (offset + length > song.audio.size()) throw Error(Errc::SongTooShort, "clip extends past the end of " + song.name);
  const auto v = song.audio.view().subspan(offset, length);
  return Clip{AudioBuffer(peak_normalize(v), song.audio.sample_rate()), song.name, offset, seed, song.split};
}

std::vector<Clip> extract_clips(std::span<const Song> songs, double duration_s, std::size_t per_song,
                                std::uint64_t seed, ExtractStats* stats) {
  std::vector<Clip> out;
  ExtractStats st;
  for (const auto& song : songs) {
    const std::size_t len = samples_for(duration_s, song.audio.sample_rate());
    if (len == 0 || song.audio.size() <= len) {
      ++st.skipped;
      continue;
    }
    const std::uint64_t song_seed = derive_seed(seed, {name_hash(song.name)});
    for (std::size_t k = 0; k < per_song; ++k) {
      const std::uint64_t clip_seed = derive_seed(song_seed, {k});
      std::mt19937_64 rng(clip_seed);
      const std::size_t offset = pick(rng, song.audio.size() - len + 1);
      out.push_back(clip_at(song, offset, len, clip_seed));
    }
  }
  if (stats != nullptr) *stats = st;
  return out;
}

std::vector<Clip> extract_clips(const fs::path& corpus_dir, double duration_s, std::size_t per_song,
                                std::uint64_t seed, ExtractStats* stats, double test_fraction) {
  const auto names = list_songs(corpus_dir);
  const auto splits = split_songs(names, is_musdb_layout(corpus_dir), seed, test_fraction);
  std::vector<Clip> out;
  ExtractStats total;
  for (const auto& name : names) {
    Song song{name, load_song(corpus_dir / name), split_of(splits, name)};
    ExtractStats st;
    auto clips = extract_clips(std::span(&song, 1), duration_s, per_song, seed, &st);
    total.skipped += st.skipped;
    std::move(clips.begin(), clips.end(), std::back_inserter(out));
  }
  if (stats != nullptr) *stats = total;
  return out;
}

std::vector<double> draw_q(std::uint64_t seed, std::size_t count) {
  std::mt19937_64 rng(seed);
  std::vector<double> q(count);
  for (double& v : q) v = unit(rng);
  return q;
}

DatasetRecord synthesize_record(const Clip& clip, const EffectChain& chain_s, std::uint64_t record_seed) {
  ParamVector q{draw_q(record_seed, chain_s.param_count()), ParamKind::Normalized};
  ParamVector p = denormalize(q, chain_s.specs());
  AudioBuffer y = chain_s.render(clip.audio, q);
  return DatasetRecord{clip.audio, std::move(y), std::move(q), std::move(p), chain_s.id(), record_seed,
                       clip.song,  clip.offset,  clip.seed,   clip.split};
}

std::vector<DatasetRecord> synthesize_dataset(std::span<const Clip> clips, const EffectChain& chain_s,
                                              std::uint64_t seed) {
  std::vector<std::optional<DatasetRecord>> slots(clips.size());
  parallel_for(clips.size(), [&](std::size_t i) { slots[i] = synthesize_record(clips[i], chain_s, derive_seed(seed, {i})); });
  std::vector<DatasetRecord> out;
  out.reserve(clips.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

std::vector<const DatasetRecord*> subset(std::span<const DatasetRecord> records, Split split) {
  std::vector<const DatasetRecord*> out;
  for (const auto& r : records) {
    if (r.split == split) out.push_back(&r);
  }
  return out;
}

nlohmann::json manifest_json(std::span<const DatasetRecord> records, const EffectChain& chain_s,
                             const ManifestInfo& info, const SplitManifest& splits) {
  nlohmann::json j;
  j["version"] = kManifestVersion;
  j["sample_rate"] = info.sample_rate;
  j["duration_s"] = info.duration_s;
  j["chain_id"] = chain_s.id();
  j["range_table_hash"] = chain_s.range_table_hash();
  j["seed"] = info.seed;
  j["clips_per_song"] = info.clips_per_song;
  j["splits"] = {{"train", splits.train}, {"validation", splits.validation}, {"test", splits.test}};
  auto& arr = j["records"] = nlohmann::json::array();
  for (const auto& r : records) {
    arr.push_back({{"song", r.song},
                   {"offset", r.offset},
                   {"clip_seed", r.clip_seed},
                   {"seed", r.seed},
                   {"split", to_string(r.split)},
                   {"q", r.q.values},
                   {"p", r.p.values}});
  }
  return j;
}

std::vector<DatasetRecord> load_records(const nlohmann::json& m, const fs::path& corpus_dir,
                                        const EffectChain& chain_s) {
  try {
    if (m.at("version").get<int>() != kManifestVersion) throw Error(Errc::Config, "unsupported manifest version");
    if (m.at("chain_id").get<std::string>() != chain_s.id()) {
      throw Error(Errc::Config, "manifest was rendered with chain '" + m.at("chain_id").get<std::string>() + "'");
    }
    if (m.at("range_table_hash").get<std::string>() != chain_s.range_table_hash()) {
      throw Error(Errc::Config, "manifest parameter ranges differ from the configured ranges");
    }
    const int fs_rate = m.at("sample_rate").get<int>();
    const double duration = m.at("duration_s").get<double>();
    const auto& recs = m.at("records");
    std::vector<std::string> songs;
    for (const auto& r : recs) songs.push_back(r.at("song").get<std::string>());
    std::sort(songs.begin(), songs.end());
    songs.erase(std::unique(songs.begin(), songs.end()), songs.end());
    std::map<std::string, Song> loaded;
    for (const auto& name : songs) {
      auto audio = load_song(corpus_dir / name);
      if (audio.sample_rate() != fs_rate) throw Error(Errc::Config, name + " has a different sample rate");
      loaded.emplace(name, Song{name, std::move(audio)});
    }
    std::vector<std::optional<DatasetRecord>> slots(recs.size());
    parallel_for(recs.size(), [&](std::size_t i) {
      const auto& r = recs[i];
      Song& song = loaded.at(r.at("song").get<std::string>());
      Clip clip = clip_at(song, r.at("offset").get<std::size_t>(), samples_for(duration, fs_rate),
                          r.at("clip_seed").get<std::uint64_t>());
      clip.split = parse_split(r.at("split").get<std::string>());
      slots[i] = synthesize_record(clip, chain_s, r.at("seed").get<std::uint64_t>());
    });
    std::vector<DatasetRecord> out;
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Config, std::string("malformed manifest: ") + e.what());
  }
}

}  // namespace fxchain::data
