#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "uffia/dsp/features.hpp"
#include "uffia/video/frames.hpp"

UFFIA_NAMESPACE_BEGIN

/// Class order is fixed everywhere: increasing feeding intensity.
inline constexpr std::array<const char*, 4> kClassNames{"None", "Weak", "Medium", "Strong"};

const char* class_name(int label);
/// Case-insensitive; throws ParseError.
int parse_class(const std::string& name);

enum class Split { kUnassigned, kTrain, kVal, kTest };
std::string to_string(Split split);
Split parse_split(const std::string& name);

/// Generation-time facts about a synthetic clip.
struct SynthTruth {
  std::int64_t bursts = 0;
  std::int64_t blobs = 0;
  double dispersion = 0;  // <= 0: uniform placement
  double speed = 0;
};

struct ClipRecord {
  std::string clip_id;
  int label = 0;
  Split split = Split::kUnassigned;
  /// Media; empty until loaded for manifest stubs.
  Waveform audio;
  NativeFrames frames;
  std::filesystem::path audio_path;
  std::filesystem::path video_path;
  std::optional<SynthTruth> synthetic;
};

/// Reads a CSV manifest with header clip_id,audio_path,video_path,label,split
/// (any column order). Paths are resolved against the manifest's directory and
/// must exist. The split cell may be empty. Errors name the line.
std::vector<ClipRecord> load_manifest(const std::filesystem::path& path);
/// Writes a manifest; paths are written relative to the manifest directory when possible.
void write_manifest(const std::filesystem::path& path, const std::vector<ClipRecord>& records);

/// Builds records from <root>/<ClassName>/<clip>.wav with a sibling frame
/// directory <root>/<ClassName>/<clip>/ of PNG files.
std::vector<ClipRecord> scan_class_folders(const std::filesystem::path& root);

/// Loads the audio (resampled to 64 kHz) and the frames of a manifest stub:
/// a directory of PNGs (sorted by name) or a packed frames file, area-resized
/// to `frame_size`.
void load_media(ClipRecord& record, std::int64_t frame_size);

/// Stratified per-class split with a seeded shuffle. Fractions (train, val, test) must sum to 1.
void make_splits(std::vector<ClipRecord>& records, const std::array<double, 3>& fractions, std::uint64_t seed);

/// Clip counts per split: {train, val, test, unassigned}.
std::array<std::size_t, 4> split_counts(const std::vector<ClipRecord>& records);

UFFIA_NAMESPACE_END
