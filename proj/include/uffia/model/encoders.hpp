#pragma once

#include <vector>

#include "uffia/dsp/features.hpp"
#include "uffia/numerics/nn.hpp"
#include "uffia/video/frames.hpp"

UFFIA_NAMESPACE_BEGIN

struct ConvBlock {
  Tensor weight;  // [out x in x 3 x 3]
  Tensor bias;    // [out]
};

/// Convolutional audio front: conv blocks (3x3, replicate padding, ReLU,
/// 2x2 average pool; the time pool is skipped once it would leave fewer than
/// `tokens` frames), mean over frequency, max+mean pooling into `tokens`
/// time windows, then a two-layer MLP into the model dimension.
struct AudioEncoder {
  std::vector<ConvBlock> blocks;
  Mlp projection;
  std::int64_t tokens = 8;
  /// Fixed input standardisation (mean, std); not trained.
  Tensor input_stats;

  static AudioEncoder create(const std::vector<std::int64_t>& channels, std::int64_t tokens, std::int64_t dim, Rng& rng);
  /// [tokens x dim]
  Tensor operator()(const MelFeature& mel) const;
  /// Raw [frames x bins] log-mel, standardised here as data (no gradient to the input).
  Tensor operator()(const Tensor& raw) const;
  void collect(ParamList& list, const std::string& prefix) const;
  void set_input_stats(double mean, double stddev);
};

/// Linear patch projection with per-patch position embeddings shared by every frame.
struct VideoEmbedding {
  Tensor projection;  // [3P^2 x d]
  Tensor positions;   // [(N + 1) x d]
  std::int64_t patch = 16;
  std::int64_t frame_size = 64;

  static VideoEmbedding create(std::int64_t frame_size, std::int64_t patch, std::int64_t dim, Rng& rng);
  std::int64_t patch_count() const { return (frame_size / patch) * (frame_size / patch); }
  /// One [(N + 1) x d] sequence per frame, led by `class_token`.
  std::vector<Tensor> operator()(const FrameStack& stack, const Tensor& class_token) const;
  /// Shape-only variant for `count` frames.
  std::vector<Tensor> meta(std::int64_t count, const Tensor& class_token) const;
  void collect(ParamList& list, const std::string& prefix) const;
};

UFFIA_NAMESPACE_END
