#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "uffia/distill/kd.hpp"
#include "uffia/dsp/augment.hpp"
#include "uffia/dsp/noise.hpp"

UFFIA_NAMESPACE_BEGIN

struct OptimConfig {
  double lr = 1e-3;
  std::int64_t batch = 20;
  std::int64_t epochs = 50;
  /// Stop after this many epochs without a better validation score; 0 disables.
  std::int64_t patience = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AugmentConfig {
  bool spec_augment = false;
  SpecAugmentConfig spec;
  /// Per-channel gain/offset jitter amplitude on training frames; 0 disables.
  double color_jitter = 0.0;
  /// Chance that an audio-bearing training sample uses a noise-mixed copy of
  /// its clip (noise kind from `corruption.noise`); 0 disables.
  double noise_prob = 0.5;
  /// Noisy copies prepared per training clip, each at an SNR drawn uniformly
  /// from [noise_snr_min, noise_snr_max] dB.
  std::int64_t noise_copies = 2;
  double noise_snr_min = -10.0;
  double noise_snr_max = 20.0;
};

struct CorruptionConfig {
  NoiseKind noise = NoiseKind::kBubble;
  std::vector<double> snrs{-10, -5, 0, 10, 20};
  /// Visual corruption applied at evaluation: brightness factor and Gaussian variance.
  double darkness = 1.0;
  double variance = 0.0;
};

struct DataConfig {
  /// "synthetic", "manifest" or "cache".
  std::string source = "synthetic";
  std::string manifest;
  std::string cache;
  std::size_t train = 800;
  std::size_t val = 100;
  std::size_t test = 100;
  /// Native frames per synthetic clip.
  std::int64_t frames = 16;
  std::int64_t frame_size = 64;
  /// Used when manifest rows carry no split.
  std::array<double, 3> splits{0.7, 0.1, 0.2};
  std::uint64_t seed = 7;
};

struct KdRunConfig {
  bool enabled = false;
  KdConfig loss;
  /// Teacher checkpoints; either may be empty.
  std::string audio_teacher;
  std::string video_teacher;
};

struct RunConfig {
  std::string profile = "desk";
  ModelKind model = ModelKind::kUffia;
  std::uint64_t seed = 1;
  int threads = 1;
  double simpf_k = 0.5;
  ArchConfig arch;
  TeacherConfig teacher;
  DropoutConfig dropout{0.4, 0.2, 0.4};
  KdRunConfig kd;
  OptimConfig optim;
  AugmentConfig augment;
  CorruptionConfig corruption;
  DataConfig data;

  void validate() const;
};

/// Defaults of a named profile: "desk" (CPU-sized) or "paper" (published sizes).
RunConfig profile_defaults(const std::string& profile);

nlohmann::json to_json(const RunConfig& config);
/// Strict: unknown or mistyped fields raise ConfigError naming the field.
RunConfig run_config_from_json(const nlohmann::json& doc);

/// Applies "dotted.key=value" to a JSON document. The value is parsed as JSON
/// when possible, otherwise taken as a string. A bare key that is not a
/// top-level field resolves to the one section holding it ("epochs" is
/// "optim.epochs"); ambiguous or unknown bare keys raise ConfigError.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Profile defaults, then the config file, then overrides (later wins). The
/// file may also be a run.json record, whose echoed config is used.
RunConfig load_run_config(const std::optional<std::filesystem::path>& path, const std::vector<std::string>& overrides);

UFFIA_NAMESPACE_END
