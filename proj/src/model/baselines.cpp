#include "uffia/model/baselines.hpp"

#include "uffia/model/uffia.hpp"

UFFIA_NAMESPACE_BEGIN

FusionBaseline::FusionBaseline(ModelKind kind, const ArchConfig& arch, Rng& rng) : kind_(kind), arch_(arch) {
  audio_ = AudioEncoder::create(arch.conv_channels, arch.audio_tokens, arch.dim, rng);
  video_ = VideoEmbedding::create(arch.frame_size, arch.patch, arch.dim, rng);
  cls_ = normal_param({1, arch.dim}, Real(0.02), rng);
  head_ = Mlp::create(arch.dim, arch.dim, kNumClasses, rng);
}

Tensor FusionBaseline::forward(const ClipInput& input, Mode mode) const {
  if (mode != Mode::kAudioVisual) throw ContractError(to_string(kind_) + " only runs in AV mode");
  if (!input.has_audio() || !input.has_video()) throw ContractError(to_string(kind_) + " needs audio and video");
  const Tensor audio = audio_(input.mel);
  std::vector<Tensor> summaries;
  for (const auto& p : input.patches) {
    summaries.push_back(fuse_frame(embed_patches(p, video_.projection, video_.positions, cls_), audio));
  }
  return head_(reshape(reduce_mean(concat(summaries, 0), 0), {1, arch_.dim}));
}

ParamList FusionBaseline::params() const {
  ParamList list;
  audio_.collect(list, "audio.");
  video_.collect(list, "video.");
  list.add("cls", cls_);
  collect_fusion(list);
  head_.collect(list, "head.");
  return list;
}

FusionSelfModel::FusionSelfModel(const ArchConfig& arch, Rng& rng) : FusionBaseline(ModelKind::kFusionSelf, arch, rng) {
  encoder_ = Encoder::create(arch.dim, arch.heads, arch.ffn, arch.layers, rng);
}

Tensor FusionSelfModel::fuse_frame(const Tensor& video, const Tensor& audio) const {
  const Tensor joint = concat({slice(video, 0, 0, 1), audio, slice(video, 0, 1, video.dim(0) - 1)}, 0);
  return slice(encoder_(joint), 0, 0, 1);
}

void FusionSelfModel::collect_fusion(ParamList& list) const { encoder_.collect(list, "encoder."); }

FusionCrossModel::FusionCrossModel(const ArchConfig& arch, Rng& rng)
    : FusionBaseline(ModelKind::kFusionCross, arch, rng) {
  for (int i = 0; i < arch.layers; ++i) {
    Layer layer;
    layer.query_norm = LayerNorm::create(arch.dim);
    layer.audio_norm = LayerNorm::create(arch.dim);
    layer.attn = AttentionParams::create(arch.dim, arch.heads, rng);
    layer.ffn_norm = LayerNorm::create(arch.dim);
    layer.ffn_in = Linear::create(arch.dim, arch.ffn, rng);
    layer.ffn_out = Linear::create(arch.ffn, arch.dim, rng);
    layers_.push_back(std::move(layer));
  }
  final_norm_ = LayerNorm::create(arch.dim);
}

Tensor FusionCrossModel::fuse_frame(const Tensor& video, const Tensor& audio) const {
  Tensor x = video;
  for (const auto& layer : layers_) {
    x = add(x, mha(layer.query_norm(x), layer.audio_norm(audio), layer.audio_norm(audio), layer.attn));
    x = add(x, layer.ffn_out(gelu(layer.ffn_in(layer.ffn_norm(x)))));
  }
  return slice(final_norm_(x), 0, 0, 1);
}

void FusionCrossModel::collect_fusion(ParamList& list) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::string p = "cross" + std::to_string(i) + ".";
    layers_[i].query_norm.collect(list, p + "query_norm.");
    layers_[i].audio_norm.collect(list, p + "audio_norm.");
    layers_[i].attn.collect(list, p + "attn.");
    layers_[i].ffn_norm.collect(list, p + "ffn_norm.");
    layers_[i].ffn_in.collect(list, p + "ffn_in.");
    layers_[i].ffn_out.collect(list, p + "ffn_out.");
  }
  final_norm_.collect(list, "final_norm.");
}

FusionBottleneckModel::FusionBottleneckModel(const ArchConfig& arch, Rng& rng)
    : FusionBaseline(ModelKind::kFusionBottleneck, arch, rng) {
  audio_cls_ = normal_param({1, arch.dim}, Real(0.02), rng);
  bottleneck_ = make_bottleneck_tokens(arch.bottleneck, arch.dim, rng);
  for (int i = 0; i < arch.layers; ++i) layers_.push_back(BottleneckLayer::create(arch.dim, arch.heads, arch.ffn, rng));
  final_norm_ = LayerNorm::create(arch.dim);
}

Tensor FusionBottleneckModel::fuse_frame(const Tensor& video, const Tensor& audio) const {
  Tensor v = video;
  Tensor a = concat({audio_cls_, audio}, 0);
  Tensor b = bottleneck_;
  for (const auto& layer : layers_) {
    auto out = bottleneck_fusion_layer(v, a, b, layer);
    v = out.video;
    a = out.audio;
    b = out.bottleneck;
  }
  const Tensor both = add(slice(final_norm_(v), 0, 0, 1), slice(final_norm_(a), 0, 0, 1));
  return scale(both, Real(0.5));
}

void FusionBottleneckModel::collect_fusion(ParamList& list) const {
  list.add("audio_cls", audio_cls_);
  list.add("bottleneck", bottleneck_);
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].collect(list, "bottleneck" + std::to_string(i) + ".");
  final_norm_.collect(list, "final_norm.");
}

std::unique_ptr<Classifier> make_classifier(ModelKind kind, const ArchConfig& arch, const DropoutConfig& dropout,
                                            double simpf_k, Rng& rng) {
  switch (kind) {
    case ModelKind::kUffia:
    case ModelKind::kAudioBaseline:
    case ModelKind::kVideoBaseline:
      return std::make_unique<UffiaModel>(kind, arch, dropout, simpf_k, rng);
    case ModelKind::kFusionSelf: return std::make_unique<FusionSelfModel>(arch, rng);
    case ModelKind::kFusionCross: return std::make_unique<FusionCrossModel>(arch, rng);
    case ModelKind::kFusionBottleneck: return std::make_unique<FusionBottleneckModel>(arch, rng);
    case ModelKind::kAudioTeacher:
    case ModelKind::kVideoTeacher:
      throw ConfigError("teachers are built by the distillation module");
  }
  throw ConfigError("unknown model kind");
}

UFFIA_NAMESPACE_END
