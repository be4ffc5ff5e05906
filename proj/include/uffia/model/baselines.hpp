#pragma once

#include "uffia/fusion/attention.hpp"
#include "uffia/model/classifier.hpp"

UFFIA_NAMESPACE_BEGIN

/// Shared plumbing for the audio-visual fusion baselines: same encoders as
/// U-FFIA, every frame, full-resolution audio, evaluated in AV mode only.
class FusionBaseline : public Classifier {
 public:
  FusionBaseline(ModelKind kind, const ArchConfig& arch, Rng& rng);

  ModelKind kind() const override { return kind_; }
  Tensor forward(const ClipInput& input, Mode mode) const override;
  ParamList params() const override;
  InputPolicy input_policy() const override { return InputPolicy{1.0, 0}; }
  std::vector<Mode> eval_modes() const override { return {Mode::kAudioVisual}; }
  Mode training_mode(Rng&) const override { return Mode::kAudioVisual; }
  void set_audio_stats(double mean, double stddev) override { audio_.set_input_stats(mean, stddev); }
  const ArchConfig& arch() const override { return arch_; }

 protected:
  /// [1 x d] summary of one frame given its video tokens (led by the class token) and the audio tokens.
  virtual Tensor fuse_frame(const Tensor& video, const Tensor& audio) const = 0;
  virtual void collect_fusion(ParamList& list) const = 0;

  ModelKind kind_;
  ArchConfig arch_;
  AudioEncoder audio_;
  VideoEmbedding video_;
  Tensor cls_;
  Mlp head_;
};

/// One joint self-attention encoder over [class ; audio tokens ; patch tokens].
class FusionSelfModel : public FusionBaseline {
 public:
  FusionSelfModel(const ArchConfig& arch, Rng& rng);

 protected:
  Tensor fuse_frame(const Tensor& video, const Tensor& audio) const override;
  void collect_fusion(ParamList& list) const override;

 private:
  Encoder encoder_;
};

/// Stacked layers of video-to-audio cross-attention followed by a feed-forward block.
class FusionCrossModel : public FusionBaseline {
 public:
  struct Layer {
    LayerNorm query_norm;
    LayerNorm audio_norm;
    AttentionParams attn;
    LayerNorm ffn_norm;
    Linear ffn_in;
    Linear ffn_out;
  };

  FusionCrossModel(const ArchConfig& arch, Rng& rng);

 protected:
  Tensor fuse_frame(const Tensor& video, const Tensor& audio) const override;
  void collect_fusion(ParamList& list) const override;

 private:
  std::vector<Layer> layers_;
  LayerNorm final_norm_;
};

/// Per-modality transformer streams that exchange information only through
/// a few shared bottleneck tokens.
class FusionBottleneckModel : public FusionBaseline {
 public:
  FusionBottleneckModel(const ArchConfig& arch, Rng& rng);

 protected:
  Tensor fuse_frame(const Tensor& video, const Tensor& audio) const override;
  void collect_fusion(ParamList& list) const override;

 private:
  Tensor audio_cls_;
  Tensor bottleneck_;
  std::vector<BottleneckLayer> layers_;
  LayerNorm final_norm_;
};

UFFIA_NAMESPACE_END
