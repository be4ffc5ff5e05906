#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uffia/core.hpp"

UFFIA_NAMESPACE_BEGIN

inline constexpr int kNumClasses = 4;

enum class Mode { kAudio, kVideo, kAudioVisual };
std::string to_string(Mode mode);
Mode parse_mode(const std::string& name);

enum class ModelKind {
  kUffia,
  kFusionSelf,
  kFusionCross,
  kFusionBottleneck,
  kAudioBaseline,
  kVideoBaseline,
  kAudioTeacher,
  kVideoTeacher,
};
std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

/// Architecture sizes shared by every model kind.
struct ArchConfig {
  std::int64_t dim = 128;
  int heads = 8;
  int layers = 2;
  std::int64_t ffn = 256;
  std::vector<std::int64_t> conv_channels{16, 32, 64, 128};
  std::int64_t audio_tokens = 8;
  std::int64_t patch = 16;
  /// Frames sampled per clip by the U-FFIA student; baselines use every frame.
  std::int64_t frames = 4;
  std::int64_t frame_size = 64;
  std::int64_t mel_bins = 128;
  std::int64_t bottleneck = 2;
};

/// Absolute probabilities of training on both modalities, audio only, video only.
struct DropoutConfig {
  double p_av = 1.0;
  double p_a = 0.0;
  double p_v = 0.0;

  void validate() const;
};

/// What a model consumes from a clip.
struct InputPolicy {
  double simpf_k = 1.0;
  /// 0 means every native frame.
  std::int64_t frames = 0;
};

UFFIA_NAMESPACE_END
