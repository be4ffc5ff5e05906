#pragma once

#include <memory>
#include <span>

#include "uffia/model/classifier.hpp"
#include "uffia/model/step.hpp"

UFFIA_NAMESPACE_BEGIN

struct KdConfig {
  /// Weight of the ground-truth cross-entropy; the divergence gets 1 - lambda.
  double lambda = 0.5;
  /// Divides the teacher logits only.
  double tau = 2.5;
  /// false: KL(student || teacher); true: KL(teacher || student).
  bool teacher_first = false;

  void validate() const;
};

/// lambda * CE(student, labels) + (1 - lambda) * KL between softmax(student)
/// and softmax(teacher / tau), averaged over the batch. Teacher logits are
/// treated as constants. Both logits [B x C].
Tensor kd_loss(const Tensor& student_logits, const Tensor& teacher_logits, std::span<const int> labels,
               const KdConfig& config);

struct TeacherConfig {
  std::vector<std::int64_t> audio_channels{16, 32, 64};
  std::vector<std::int64_t> video_channels{8, 16, 32};
  std::int64_t hidden = 64;
  /// Spatial average pooling applied to frames before the first block.
  std::int64_t video_input_pool = 2;
};

/// Conv stack over the uncompressed log-mel; global mean+max pooling; MLP head.
class AudioTeacher : public Classifier {
 public:
  AudioTeacher(const TeacherConfig& config, const ArchConfig& arch, Rng& rng);

  ModelKind kind() const override { return ModelKind::kAudioTeacher; }
  ClipInput prepare(const MelFeature* mel, const FrameStack* frames) const override;
  Tensor forward(const ClipInput& input, Mode mode) const override;
  ParamList params() const override;
  InputPolicy input_policy() const override { return InputPolicy{1.0, 0}; }
  std::vector<Mode> eval_modes() const override { return {Mode::kAudio}; }
  Mode training_mode(Rng&) const override { return Mode::kAudio; }
  void set_audio_stats(double mean, double stddev) override;
  const ArchConfig& arch() const override { return arch_; }

 private:
  ArchConfig arch_;
  std::vector<ConvBlock> blocks_;
  Mlp head_;
  Tensor input_stats_;
};

/// Separable 3-D conv stack over every native frame: per block a 1x3x3
/// spatial conv, a 3x1x1 temporal conv, then 2x2 spatial pooling.
class VideoTeacher : public Classifier {
 public:
  struct Block {
    ConvBlock spatial;
    ConvBlock temporal;
  };

  VideoTeacher(const TeacherConfig& config, const ArchConfig& arch, Rng& rng);

  ModelKind kind() const override { return ModelKind::kVideoTeacher; }
  ClipInput prepare(const MelFeature* mel, const FrameStack* frames) const override;
  Tensor forward(const ClipInput& input, Mode mode) const override;
  ParamList params() const override;
  InputPolicy input_policy() const override { return InputPolicy{1.0, 0}; }
  std::vector<Mode> eval_modes() const override { return {Mode::kVideo}; }
  Mode training_mode(Rng&) const override { return Mode::kVideo; }
  void set_audio_stats(double, double) override {}
  const ArchConfig& arch() const override { return arch_; }

 private:
  ArchConfig arch_;
  std::int64_t input_pool_;
  std::vector<Block> blocks_;
  Mlp head_;
};

std::unique_ptr<Classifier> make_teacher(ModelKind kind, const TeacherConfig& config, const ArchConfig& arch, Rng& rng);

/// The single mode a teacher serves.
Mode teacher_mode(ModelKind kind);

/// Frame stack as a [3 x F x H x W] volume.
Tensor frames_to_volume(const FrameStack& frames);

struct DistillExample {
  ClipInput student;
  ClipInput teacher;
  int label = 0;
};

/// One optimiser step of the student in `mode` (A or V) against a frozen
/// teacher of the matching modality. Returns the batch mean loss.
double distill_step(const Classifier& student, Mode mode, const Classifier& teacher,
                    std::span<const DistillExample> batch, const KdConfig& config, Adam& adam);

UFFIA_NAMESPACE_END
