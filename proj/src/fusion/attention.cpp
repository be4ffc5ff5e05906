#include "uffia/fusion/attention.hpp"

#include <cmath>

UFFIA_NAMESPACE_BEGIN

AttentionParams AttentionParams::create(std::int64_t dim, int heads, Rng& rng) {
  if (heads < 1 || dim % heads != 0) {
    throw ConfigError("model dimension " + std::to_string(dim) + " is not divisible by " + std::to_string(heads) + " heads");
  }
  Linear q = Linear::create(dim, dim, rng);
  Linear k = Linear::create(dim, dim, rng);
  Linear v = Linear::create(dim, dim, rng);
  Linear o = Linear::create(dim, dim, rng);
  return AttentionParams{std::move(q), std::move(k), std::move(v), std::move(o), heads};
}

void AttentionParams::collect(ParamList& list, const std::string& prefix) const {
  query.collect(list, prefix + "query.");
  key.collect(list, prefix + "key.");
  value.collect(list, prefix + "value.");
  output.collect(list, prefix + "output.");
}

Tensor mha(const Tensor& queries, const Tensor& keys, const Tensor& values, const AttentionParams& params,
           std::vector<Tensor>* weights) {
  const std::int64_t d = params.dim();
  for (const Tensor* t : {&queries, &keys, &values}) {
    if (t->rank() != 2 || t->dim(1) != d) {
      throw ShapeError("mha: tokens " + shape_to_string(t->shape()) + " do not have dimension " + std::to_string(d));
    }
  }
  if (keys.dim(0) != values.dim(0)) throw ShapeError("mha: key and value token counts differ");
  const Real scale = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(d / params.heads)));
  Tensor mixed = multi_head_attention(params.query(queries), params.key(keys), params.value(values), params.heads,
                                      scale, weights);
  return params.output(mixed);
}

Tensor cross_attention_layer(const Tensor& video, const Tensor& audio, const AttentionParams& params) {
  if (!audio.defined()) throw InputError("cross-attention needs at least one audio token");
  return mha(video, audio, audio, params);
}

TransformerLayer TransformerLayer::create(std::int64_t dim, int heads, std::int64_t ffn, Rng& rng) {
  TransformerLayer layer;
  layer.attn_norm = LayerNorm::create(dim);
  layer.attn = AttentionParams::create(dim, heads, rng);
  layer.ffn_norm = LayerNorm::create(dim);
  layer.ffn_in = Linear::create(dim, ffn, rng);
  layer.ffn_out = Linear::create(ffn, dim, rng);
  return layer;
}

Tensor TransformerLayer::operator()(const Tensor& x) const {
  const Tensor normed = attn_norm(x);
  const Tensor h = add(x, mha(normed, normed, normed, attn));
  return add(h, ffn_out(gelu(ffn_in(ffn_norm(h)))));
}

void TransformerLayer::collect(ParamList& list, const std::string& prefix) const {
  attn_norm.collect(list, prefix + "attn_norm.");
  attn.collect(list, prefix + "attn.");
  ffn_norm.collect(list, prefix + "ffn_norm.");
  ffn_in.collect(list, prefix + "ffn_in.");
  ffn_out.collect(list, prefix + "ffn_out.");
}

Encoder Encoder::create(std::int64_t dim, int heads, std::int64_t ffn, int depth, Rng& rng) {
  if (depth < 0) throw ConfigError("encoder depth must be non-negative");
  Encoder enc;
  for (int i = 0; i < depth; ++i) enc.layers.push_back(TransformerLayer::create(dim, heads, ffn, rng));
  enc.final_norm = LayerNorm::create(dim);
  return enc;
}

Tensor Encoder::operator()(const Tensor& tokens) const {
  Tensor x = tokens;
  for (const auto& layer : layers) x = layer(x);
  return final_norm(x);
}

void Encoder::collect(ParamList& list, const std::string& prefix) const {
  for (std::size_t i = 0; i < layers.size(); ++i) layers[i].collect(list, prefix + "layer" + std::to_string(i) + ".");
  final_norm.collect(list, prefix + "final_norm.");
}

std::int64_t encoder_param_count(std::int64_t dim, std::int64_t ffn, int depth) {
  const std::int64_t attention = 4 * dim * dim + 4 * dim;
  const std::int64_t norms = 2 * 2 * dim;
  const std::int64_t feed_forward = dim * ffn + ffn + ffn * dim + dim;
  return depth * (attention + norms + feed_forward) + 2 * dim;
}

Tensor make_bottleneck_tokens(std::int64_t count, std::int64_t dim, Rng& rng) {
  if (count < 1) throw ConfigError("bottleneck fusion needs at least one bottleneck token");
  return normal_param({count, dim}, Real(0.02), rng);
}

BottleneckLayer BottleneckLayer::create(std::int64_t dim, int heads, std::int64_t ffn, Rng& rng) {
  TransformerLayer v = TransformerLayer::create(dim, heads, ffn, rng);
  TransformerLayer a = TransformerLayer::create(dim, heads, ffn, rng);
  return BottleneckLayer{std::move(v), std::move(a)};
}

void BottleneckLayer::collect(ParamList& list, const std::string& prefix) const {
  video_layer.collect(list, prefix + "video.");
  audio_layer.collect(list, prefix + "audio.");
}

BottleneckOutput bottleneck_fusion_layer(const Tensor& video, const Tensor& audio, const Tensor& bottleneck,
                                         const BottleneckLayer& layer, const Tensor* frozen_intermediate) {
  if (!bottleneck.defined()) throw ConfigError("bottleneck fusion needs at least one bottleneck token");
  const std::int64_t nv = video.dim(0), na = audio.dim(0), nb = bottleneck.dim(0);
  const Tensor first = layer.video_layer(concat({video, bottleneck}, 0));
  BottleneckOutput out;
  out.video = slice(first, 0, 0, nv);
  out.intermediate = slice(first, 0, nv, nb);
  const Tensor& carried = frozen_intermediate ? *frozen_intermediate : out.intermediate;
  if (carried.shape() != bottleneck.shape()) throw ShapeError("frozen bottleneck has the wrong shape");
  const Tensor second = layer.audio_layer(concat({audio, carried}, 0));
  out.audio = slice(second, 0, 0, na);
  out.bottleneck = slice(second, 0, na, nb);
  return out;
}

AvFusionBlock AvFusionBlock::create(std::int64_t dim, int heads, Rng& rng) {
  AvFusionBlock block;
  block.self_norm = LayerNorm::create(dim);
  block.self_attn = AttentionParams::create(dim, heads, rng);
  block.query_norm = LayerNorm::create(dim);
  block.audio_norm = LayerNorm::create(dim);
  block.cross_attn = AttentionParams::create(dim, heads, rng);
  return block;
}

void AvFusionBlock::collect(ParamList& list, const std::string& prefix) const {
  self_norm.collect(list, prefix + "self_norm.");
  self_attn.collect(list, prefix + "self_attn.");
  query_norm.collect(list, prefix + "query_norm.");
  audio_norm.collect(list, prefix + "audio_norm.");
  cross_attn.collect(list, prefix + "cross_attn.");
}

Tensor av_fusion_block(const Tensor& video, const Tensor& audio, const AvFusionBlock& block) {
  const Tensor normed = block.self_norm(video);
  const Tensor s = add(video, mha(normed, normed, normed, block.self_attn));
  return add(s, cross_attention_layer(block.query_norm(s), block.audio_norm(audio), block.cross_attn));
}

UFFIA_NAMESPACE_END
