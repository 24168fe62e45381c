#pragma once

// Corpora, clip extraction, dataset synthesis through a chain, and JSON
// manifests from which every record can be re-rendered.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fxchain/effects.hpp"
#include "fxchain/params.hpp"
#include "fxchain/signal.hpp"

namespace fxchain::data {

enum class Split { Train, Validation, Test };
std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct Song {
  std::string name;  // path relative to the corpus root
  AudioBuffer audio;
  Split split = Split::Train;
};

// Synthetic multi-instrument songs (bass, pad, lead, drums) with bar-level
// dynamics. Deterministic in (seed, duration, sample_rate); peak 1.
AudioBuffer synthetic_song(std::uint64_t seed, double duration_s, int sample_rate = kDefaultSampleRate);

struct SyntheticCorpusConfig {
  std::size_t songs = 40;
  double duration_s = 8.0;
  int sample_rate = kDefaultSampleRate;
  std::uint64_t seed = 0;
};
// Songs named song000.wav, song001.wav, ... with splits assigned.
std::vector<Song> synthetic_corpus(const SyntheticCorpusConfig& cfg, double test_fraction = 0.15);
// Writes each song as a 32-bit float WAV under dir.
void write_corpus(const std::filesystem::path& dir, std::span<const Song> songs);

struct SplitManifest {
  std::vector<std::string> train, validation, test;
  std::size_t clips_per_song = 0;
  std::uint64_t seed = 0;
};

// Corpus with train/ and test/ subdirectories.
bool is_musdb_layout(const std::filesystem::path& dir);
// Song files (relative paths, sorted) under a corpus directory.
std::vector<std::string> list_songs(const std::filesystem::path& dir);
// MUSDB layout: test/ songs form the test split and the train/ songs are
// split 86/14 into train/validation. Otherwise a seeded test_fraction of the
// songs is held out for testing and the rest split 85/15.
SplitManifest split_songs(std::span<const std::string> songs, bool musdb, std::uint64_t seed,
                          double test_fraction = 0.15);
void assign_splits(std::vector<Song>& songs, std::uint64_t seed, double test_fraction = 0.15);
Split split_of(const SplitManifest& m, std::string_view song);

// Reads a song file, downmixed to mono.
AudioBuffer load_song(const std::filesystem::path& path);

struct Clip {
  AudioBuffer audio;  // mono, peak-normalized
  std::string song;
  std::size_t offset = 0;
  std::uint64_t seed = 0;
  Split split = Split::Train;
};

struct ExtractStats {
  std::size_t skipped = 0;  // songs shorter than one clip
};

// per_song clips of duration_s from every song, offsets drawn from a per-song
// seed. Songs that are too short are skipped and counted.
std::vector<Clip> extract_clips(std::span<const Song> songs, double duration_s, std::size_t per_song,
                                std::uint64_t seed, ExtractStats* stats = nullptr);
std::vector<Clip> extract_clips(const std::filesystem::path& corpus_dir, double duration_s, std::size_t per_song,
                                std::uint64_t seed, ExtractStats* stats = nullptr, double test_fraction = 0.15);
// The clip starting at offset in song.
Clip clip_at(const Song& song, std::size_t offset, std::size_t length, std::uint64_t seed);

struct DatasetRecord {
  AudioBuffer x;
  AudioBuffer y;
  ParamVector q;
  ParamVector p;
  std::string chain_id;
  std::uint64_t seed = 0;
  std::string song;
  std::size_t offset = 0;
  std::uint64_t clip_seed = 0;
  Split split = Split::Train;
};

// q ~ U(0,1)^count from a 64-bit stream.
std::vector<double> draw_q(std::uint64_t seed, std::size_t count);
DatasetRecord synthesize_record(const Clip& clip, const EffectChain& chain_s, std::uint64_t record_seed);
// Record i uses seed derive_seed(seed, {i}).
std::vector<DatasetRecord> synthesize_dataset(std::span<const Clip> clips, const EffectChain& chain_s,
                                              std::uint64_t seed);
std::vector<const DatasetRecord*> subset(std::span<const DatasetRecord> records, Split split);

inline constexpr int kManifestVersion = 1;

struct ManifestInfo {
  int sample_rate = kDefaultSampleRate;
  double duration_s = 0.0;
  std::uint64_t seed = 0;
  std::size_t clips_per_song = 0;
};

nlohmann::json manifest_json(std::span<const DatasetRecord> records, const EffectChain& chain_s,
                             const ManifestInfo& info, const SplitManifest& splits);
// Re-renders every record of a manifest from the corpus audio. Throws
// Errc::Config when the chain or its range table does not match.
std::vector<DatasetRecord> load_records(const nlohmann::json& manifest, const std::filesystem::path& corpus_dir,
                                        const EffectChain& chain_s);

}  // namespace fxchain::data
