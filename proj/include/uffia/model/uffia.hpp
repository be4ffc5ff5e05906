#pragma once

#include "uffia/fusion/attention.hpp"
#include "uffia/model/classifier.hpp"

UFFIA_NAMESPACE_BEGIN

/// Encoded tokens after modality dropout. A masked modality is all zeros.
struct FusedInput {
  Tensor audio;               // [T_a x d]
  std::vector<Tensor> video;  // per frame [(N + 1) x d]
  Mode mode = Mode::kAudioVisual;
};

struct UffiaOutput {
  Tensor logits;  // [1 x 4]
  Tensor pooled;  // [1 x d]
  Mode mode = Mode::kAudioVisual;
};

/// Draws the training branch: AV with p_av, A with p_a, V with p_v.
Mode draw_branch(const DropoutConfig& config, Rng& rng);

/// Draws a branch and replaces the dropped modality by zeros of its shape.
FusedInput apply_modality_dropout(const Tensor& audio, const std::vector<Tensor>& video, const DropoutConfig& config,
                                  Rng& rng);

/// The mode implied by which inputs are present.
Mode mode_for_inputs(bool has_audio, bool has_video);

/// Unified mixed-modality classifier: audio conv encoder, linear patch video
/// encoder, per-frame audio-to-video fusion, one shared transformer encoder,
/// one class token and one head per mode.
class UffiaModel : public Classifier {
 public:
  UffiaModel(ModelKind kind, const ArchConfig& arch, const DropoutConfig& dropout, double simpf_k, Rng& rng);

  ModelKind kind() const override { return kind_; }
  Tensor forward(const ClipInput& input, Mode mode) const override;
  ParamList params() const override;
  InputPolicy input_policy() const override { return policy_; }
  std::vector<Mode> eval_modes() const override;
  Mode training_mode(Rng& rng) const override { return draw_branch(dropout_, rng); }
  void set_audio_stats(double mean, double stddev) override { audio_.set_input_stats(mean, stddev); }
  const ArchConfig& arch() const override { return arch_; }

  /// Token-level entry points.
  Tensor encode_audio(const Tensor& mel) const { return audio_(mel); }
  std::vector<Tensor> encode_video(const std::vector<Tensor>& patches, Mode mode) const;
  UffiaOutput run(const FusedInput& input) const;
  const Tensor& class_token(Mode mode) const;

 private:
  ModelKind kind_;
  ArchConfig arch_;
  DropoutConfig dropout_;
  InputPolicy policy_;
  AudioEncoder audio_;
  VideoEmbedding video_;
  Tensor cls_audio_;
  Tensor cls_video_;
  Tensor cls_av_;
  AvFusionBlock fusion_;
  Encoder encoder_;
  Mlp head_audio_;
  Mlp head_video_;
  Mlp head_av_;
};

UFFIA_NAMESPACE_END
