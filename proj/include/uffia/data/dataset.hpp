#pragma once

#include <memory>

#include "uffia/data/synth.hpp"
#include "uffia/dsp/noise.hpp"

UFFIA_NAMESPACE_BEGIN

/// Random access to full clips (media included).
class ClipSource {
 public:
  virtual ~ClipSource() = default;
  virtual std::size_t size() const = 0;
  virtual ClipRecord load(std::size_t index) const = 0;
};

/// Seeded synthetic set: the first `train` indices are training clips, then
/// validation, then test; labels cycle None, Weak, Medium, Strong.
class SyntheticSource : public ClipSource {
 public:
  SyntheticSource(SynthParams params, std::size_t train, std::size_t val, std::size_t test);

  std::size_t size() const override { return train_ + val_ + test_; }
  ClipRecord load(std::size_t index) const override;
  const SynthParams& params() const { return params_; }

 private:
  SynthParams params_;
  std::size_t train_, val_, test_;
};

/// Manifest records loaded lazily from disk.
class ManifestSource : public ClipSource {
 public:
  ManifestSource(std::vector<ClipRecord> records, std::int64_t frame_size);

  std::size_t size() const override { return records_.size(); }
  ClipRecord load(std::size_t index) const override;

 private:
  std::vector<ClipRecord> records_;
  std::int64_t frame_size_;
};

/// A clip reduced to what training needs: clean full-resolution log-mel and frames.
struct PreparedClip {
  std::string clip_id;
  int label = 0;
  Split split = Split::kUnassigned;
  MelFeature mel;
  NativeFrames frames;
};

struct Dataset {
  std::vector<PreparedClip> clips;
  /// Needed to rebuild noisy audio; may be null for a dataset read from a cache.
  std::shared_ptr<const ClipSource> source;
  MelConfig mel_config;

  std::vector<std::size_t> indices(Split split) const;
  /// Log-mel of clip `index` after mixing noise at `spec` (seeded per clip).
  MelFeature noisy_mel(std::size_t index, const NoiseSpec& spec, std::uint64_t seed) const;
};

/// Loads every clip and computes its log-mel; `threads` > 1 works on clips in parallel.
Dataset prepare_dataset(std::shared_ptr<const ClipSource> source, const MelConfig& mel, int threads = 1);

void save_feature_cache(const std::filesystem::path& path, const Dataset& dataset);
/// `source` (optional) re-enables noisy_mel.
Dataset load_feature_cache(const std::filesystem::path& path, std::shared_ptr<const ClipSource> source = nullptr);

UFFIA_NAMESPACE_END
