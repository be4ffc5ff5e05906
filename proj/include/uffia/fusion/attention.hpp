#pragma once

#include <vector>

#include "uffia/numerics/nn.hpp"

UFFIA_NAMESPACE_BEGIN

/// Query/key/value/output projections of one multi-head attention block.
struct AttentionParams {
  Linear query;
  Linear key;
  Linear value;
  Linear output;
  int heads = 1;

  static AttentionParams create(std::int64_t dim, int heads, Rng& rng);
  std::int64_t dim() const { return query.in_features(); }
  void collect(ParamList& list, const std::string& prefix) const;
};

/// Multi-head scaled dot-product attention with per-head scale 1/sqrt(d / heads).
/// Output has one row per query token. `weights` receives one [n x m] matrix per head.
Tensor mha(const Tensor& queries, const Tensor& keys, const Tensor& values, const AttentionParams& params,
           std::vector<Tensor>* weights = nullptr);

/// Video tokens query audio tokens.
Tensor cross_attention_layer(const Tensor& video, const Tensor& audio, const AttentionParams& params);

/// Pre-norm block: x + mha(LN(x)), then x + FFN(LN(x)) with a GELU FFN.
struct TransformerLayer {
  LayerNorm attn_norm;
  AttentionParams attn;
  LayerNorm ffn_norm;
  Linear ffn_in;
  Linear ffn_out;

  static TransformerLayer create(std::int64_t dim, int heads, std::int64_t ffn, Rng& rng);
  Tensor operator()(const Tensor& x) const;
  void collect(ParamList& list, const std::string& prefix) const;
};

/// Stack of pre-norm layers followed by a final layer norm.
struct Encoder {
  std::vector<TransformerLayer> layers;
  LayerNorm final_norm;

  static Encoder create(std::int64_t dim, int heads, std::int64_t ffn, int depth, Rng& rng);
  Tensor operator()(const Tensor& tokens) const;
  void collect(ParamList& list, const std::string& prefix) const;
};

/// Closed-form parameter count of Encoder::create.
std::int64_t encoder_param_count(std::int64_t dim, std::int64_t ffn, int depth);

/// Fused tokens shared by the two modality streams.
Tensor make_bottleneck_tokens(std::int64_t count, std::int64_t dim, Rng& rng);

struct BottleneckLayer {
  TransformerLayer video_layer;
  TransformerLayer audio_layer;

  static BottleneckLayer create(std::int64_t dim, int heads, std::int64_t ffn, Rng& rng);
  void collect(ParamList& list, const std::string& prefix) const;
};

struct BottleneckOutput {
  Tensor video;
  Tensor audio;
  Tensor bottleneck;
  /// Bottleneck state after the video step, before the audio step.
  Tensor intermediate;
};

/// Video layer over [video ; bottleneck], then audio layer over [audio ; updated bottleneck].
/// If `frozen_intermediate` is given it replaces the updated bottleneck fed to
/// the audio step, cutting every path from video to audio.
BottleneckOutput bottleneck_fusion_layer(const Tensor& video, const Tensor& audio, const Tensor& bottleneck,
                                         const BottleneckLayer& layer, const Tensor* frozen_intermediate = nullptr);

/// Self-attention over a frame's tokens, then cross-attention from those
/// tokens to the audio tokens; both sublayers pre-norm with residuals.
struct AvFusionBlock {
  LayerNorm self_norm;
  AttentionParams self_attn;
  LayerNorm query_norm;
  LayerNorm audio_norm;
  AttentionParams cross_attn;

  static AvFusionBlock create(std::int64_t dim, int heads, Rng& rng);
  void collect(ParamList& list, const std::string& prefix) const;
};

Tensor av_fusion_block(const Tensor& video, const Tensor& audio, const AvFusionBlock& block);

UFFIA_NAMESPACE_END
