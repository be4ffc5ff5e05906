#include "uffia/model/uffia.hpp"

#include <cmath>

UFFIA_NAMESPACE_BEGIN

ClipInput make_clip_input(const MelFeature* mel, const FrameStack* frames, std::int64_t patch) {
  ClipInput input;
  if (mel) {
    input.mel = Tensor::from_values({mel->frames, mel->bins}, mel->values);
    input.mel_compression = mel->compression;
  }
  if (frames) {
    input.full_frames = frames->is_complete();
    for (std::int64_t f = 0; f < frames->count(); ++f) {
      input.patches.push_back(patchify(frames->frame(f), frames->height, frames->width, patch));
    }
  }
  return input;
}

ClipInput make_meta_input(std::int64_t mel_frames, std::int64_t mel_bins, std::int64_t frames, std::int64_t frame_size,
                          std::int64_t patch) {
  ClipInput input;
  if (mel_frames > 0) input.mel = Tensor::meta({mel_frames, mel_bins});
  const std::int64_t n = (frame_size / patch) * (frame_size / patch);
  for (std::int64_t f = 0; f < frames; ++f) input.patches.push_back(Tensor::meta({n, 3 * patch * patch}));
  return input;
}

int predict(std::span<const Real> logits) {
  if (logits.empty()) throw ShapeError("predict on empty logits");
  int best = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (std::isnan(logits[i])) throw NumericError("predict: NaN logit");
    if (logits[i] > logits[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

Mode draw_branch(const DropoutConfig& config, Rng& rng) {
  config.validate();
  const double u = rng.uniform();
  if (u < config.p_av) return Mode::kAudioVisual;
  if (u < config.p_av + config.p_a) return Mode::kAudio;
  if (config.p_v > 0) return Mode::kVideo;
  return config.p_a > 0 ? Mode::kAudio : Mode::kAudioVisual;
}

FusedInput apply_modality_dropout(const Tensor& audio, const std::vector<Tensor>& video, const DropoutConfig& config,
                                  Rng& rng) {
  FusedInput out{audio, video, draw_branch(config, rng)};
  if (out.mode == Mode::kAudio) {
    for (auto& v : out.video) v = Tensor::zeros(v.shape());
  } else if (out.mode == Mode::kVideo) {
    out.audio = Tensor::zeros(audio.shape());
  }
  return out;
}

Mode mode_for_inputs(bool has_audio, bool has_video) {
  if (has_audio && has_video) return Mode::kAudioVisual;
  if (has_audio) return Mode::kAudio;
  if (has_video) return Mode::kVideo;
  throw InputError("clip has neither audio nor video");
}

UffiaModel::UffiaModel(ModelKind kind, const ArchConfig& arch, const DropoutConfig& dropout, double simpf_k, Rng& rng)
    : kind_(kind), arch_(arch), dropout_(dropout) {
  switch (kind) {
    case ModelKind::kUffia:
      policy_ = InputPolicy{simpf_k, arch.frames};
      break;
    case ModelKind::kAudioBaseline:
      dropout_ = DropoutConfig{0, 1, 0};
      policy_ = InputPolicy{1.0, 0};
      break;
    case ModelKind::kVideoBaseline:
      dropout_ = DropoutConfig{0, 0, 1};
      policy_ = InputPolicy{1.0, 0};
      break;
    default:
      throw ConfigError("UffiaModel cannot represent " + to_string(kind));
  }
  dropout_.validate();
  audio_ = AudioEncoder::create(arch.conv_channels, arch.audio_tokens, arch.dim, rng);
  video_ = VideoEmbedding::create(arch.frame_size, arch.patch, arch.dim, rng);
  cls_audio_ = normal_param({1, arch.dim}, Real(0.02), rng);
  cls_video_ = normal_param({1, arch.dim}, Real(0.02), rng);
  cls_av_ = normal_param({1, arch.dim}, Real(0.02), rng);
  fusion_ = AvFusionBlock::create(arch.dim, arch.heads, rng);
  encoder_ = Encoder::create(arch.dim, arch.heads, arch.ffn, arch.layers, rng);
  head_audio_ = Mlp::create(arch.dim, arch.dim, kNumClasses, rng);
  head_video_ = Mlp::create(arch.dim, arch.dim, kNumClasses, rng);
  head_av_ = Mlp::create(arch.dim, arch.dim, kNumClasses, rng);
}

std::vector<Mode> UffiaModel::eval_modes() const {
  if (kind_ == ModelKind::kAudioBaseline) return {Mode::kAudio};
  if (kind_ == ModelKind::kVideoBaseline) return {Mode::kVideo};
  return {Mode::kAudioVisual, Mode::kAudio, Mode::kVideo};
}

const Tensor& UffiaModel::class_token(Mode mode) const {
  switch (mode) {
    case Mode::kAudio: return cls_audio_;
    case Mode::kVideo: return cls_video_;
    case Mode::kAudioVisual: return cls_av_;
  }
  return cls_av_;
}

std::vector<Tensor> UffiaModel::encode_video(const std::vector<Tensor>& patches, Mode mode) const {
  if (patches.empty()) throw InputError("video encoder needs at least one frame");
  std::vector<Tensor> out;
  for (const auto& p : patches) out.push_back(embed_patches(p, video_.projection, video_.positions, class_token(mode)));
  return out;
}

Tensor UffiaModel::forward(const ClipInput& input, Mode mode) const {
  const bool audio = mode != Mode::kVideo;
  const bool video = mode != Mode::kAudio;
  if ((audio && !input.has_audio()) || (video && !input.has_video())) {
    throw ContractError("inputs do not support mode " + to_string(mode));
  }
  FusedInput fused;
  fused.mode = mode;
  if (audio) fused.audio = encode_audio(input.mel);
  if (video) fused.video = encode_video(input.patches, mode);
  return run(fused).logits;
}

UffiaOutput UffiaModel::run(const FusedInput& input) const {
  UffiaOutput out;
  out.mode = input.mode;
  if (input.mode == Mode::kAudio) {
    const Tensor seq = concat({cls_audio_, input.audio}, 0);
    out.pooled = slice(encoder_(seq), 0, 0, 1);
    out.logits = head_audio_(out.pooled);
    return out;
  }
  if (input.video.empty()) throw ContractError("mode " + to_string(input.mode) + " needs video tokens");
  std::vector<Tensor> summaries;
  if (input.mode == Mode::kVideo) {
    for (const auto& frame : input.video) summaries.push_back(slice(encoder_(frame), 0, 0, 1));
  } else {
    const Tensor audio_seq = concat({cls_audio_, input.audio}, 0);
    for (const auto& frame : input.video) {
      summaries.push_back(slice(encoder_(av_fusion_block(frame, audio_seq, fusion_)), 0, 0, 1));
    }
  }
  out.pooled = reshape(reduce_mean(concat(summaries, 0), 0), {1, arch_.dim});
  out.logits = (input.mode == Mode::kVideo ? head_video_ : head_av_)(out.pooled);
  return out;
}

ParamList UffiaModel::params() const {
  ParamList list;
  audio_.collect(list, "audio.");
  video_.collect(list, "video.");
  list.add("cls.audio", cls_audio_);
  list.add("cls.video", cls_video_);
  list.add("cls.av", cls_av_);
  fusion_.collect(list, "fusion.");
  encoder_.collect(list, "encoder.");
  head_audio_.collect(list, "head.audio.");
  head_video_.collect(list, "head.video.");
  head_av_.collect(list, "head.av.");
  return list;
}

UFFIA_NAMESPACE_END
