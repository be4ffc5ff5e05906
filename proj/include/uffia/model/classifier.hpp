#pragma once

#include <memory>
#include <vector>

#include "uffia/model/config.hpp"
#include "uffia/model/encoders.hpp"

UFFIA_NAMESPACE_BEGIN

/// Model-ready view of one clip. Either part may be absent; tensors may be
/// shape-only for cost accounting.
struct ClipInput {
  Tensor mel;                   // [frames x bins], raw log-mel
  std::vector<Tensor> patches;  // per frame [N x 3P^2]
  Tensor volume;                // [3 x F x H x W], only for models that convolve over time
  /// Fraction of the time axis kept by the audio frontend.
  double mel_compression = 1.0;
  bool full_frames = false;

  bool has_audio() const { return mel.defined(); }
  bool has_video() const { return !patches.empty(); }
};

ClipInput make_clip_input(const MelFeature* mel, const FrameStack* frames, std::int64_t patch);
ClipInput make_meta_input(std::int64_t mel_frames, std::int64_t mel_bins, std::int64_t frames, std::int64_t frame_size,
                          std::int64_t patch);

/// Common surface of U-FFIA and the fusion baselines.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual ModelKind kind() const = 0;
  /// Builds this model's input from a (possibly compressed) feature and a frame stack; either may be null.
  virtual ClipInput prepare(const MelFeature* mel, const FrameStack* frames) const {
    return make_clip_input(mel, frames, arch().patch);
  }
  /// Logits [1 x 4].
  virtual Tensor forward(const ClipInput& input, Mode mode) const = 0;
  virtual ParamList params() const = 0;
  virtual InputPolicy input_policy() const = 0;
  /// Modes this model is evaluated in.
  virtual std::vector<Mode> eval_modes() const = 0;
  /// Mode for one training sample.
  virtual Mode training_mode(Rng& rng) const = 0;
  /// Fixed standardisation applied to the raw log-mel (no-op for video-only models).
  virtual void set_audio_stats(double mean, double stddev) = 0;
  virtual const ArchConfig& arch() const = 0;
};

/// Argmax over the logits, ties to the lowest index. NaN raises NumericError.
int predict(std::span<const Real> logits);
inline int predict(const Tensor& logits) { return predict(logits.values()); }

std::unique_ptr<Classifier> make_classifier(ModelKind kind, const ArchConfig& arch, const DropoutConfig& dropout,
                                            double simpf_k, Rng& rng);

UFFIA_NAMESPACE_END
