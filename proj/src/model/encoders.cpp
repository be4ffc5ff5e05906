#include "uffia/model/encoders.hpp"

#include <cmath>

UFFIA_NAMESPACE_BEGIN

AudioEncoder AudioEncoder::create(const std::vector<std::int64_t>& channels, std::int64_t tokens, std::int64_t dim,
                                  Rng& rng) {
  if (channels.empty()) throw ConfigError("audio encoder needs at least one conv block");
  if (tokens < 1) throw ConfigError("audio token count must be positive");
  AudioEncoder enc;
  enc.tokens = tokens;
  std::int64_t in = 1;
  for (auto out : channels) {
    const Real bound = static_cast<Real>(std::sqrt(6.0 / static_cast<double>(in * 9)));
    Tensor w = uniform_param({out, in, 3, 3}, bound, rng);
    enc.blocks.push_back(ConvBlock{w, constant_param({out}, Real(0))});
    in = out;
  }
  enc.projection = Mlp::create(in, dim, dim, rng);
  enc.input_stats = meta_mode() ? Tensor::meta({2}) : Tensor::from_values({2}, {0, 1});
  return enc;
}

void AudioEncoder::set_input_stats(double mean, double stddev) {
  if (!(stddev > 0)) throw ConfigError("audio input standard deviation must be positive");
  auto v = input_stats.mutable_values();
  v[0] = static_cast<Real>(mean);
  v[1] = static_cast<Real>(stddev);
}

Tensor AudioEncoder::operator()(const MelFeature& mel) const {
  return (*this)(Tensor::from_values({mel.frames, mel.bins}, mel.values));
}

Tensor AudioEncoder::operator()(const Tensor& raw) const {
  Tensor mel = raw;
  if (!raw.is_meta()) {
    const auto stats = input_stats.values();
    std::vector<Real> values(raw.values().begin(), raw.values().end());
    for (auto& v : values) v = (v - stats[0]) / stats[1];
    mel = Tensor::from_values(raw.shape(), std::move(values));
  }
  if (mel.rank() != 2) throw ShapeError("audio encoder expects a [frames x bins] feature");
  Tensor x = reshape(mel, {1, mel.dim(0), mel.dim(1)});
  for (const auto& block : blocks) {
    x = relu(conv2d(x, block.weight, block.bias, Padding::kReplicate));
    const std::int64_t time_pool = x.dim(1) / 2 >= tokens ? 2 : 1;
    const std::int64_t freq_pool = x.dim(2) >= 2 ? 2 : 1;
    if (time_pool > 1 || freq_pool > 1) x = avg_pool2d(x, time_pool, freq_pool);
  }
  if (x.dim(1) < tokens) {
    throw ShapeError("audio feature has " + std::to_string(mel.dim(0)) + " frames, fewer than the " +
                     std::to_string(tokens) + " audio tokens");
  }
  const Tensor per_time = transpose(reduce_mean(x, 2));  // [T' x C]
  return projection(window_max_mean(per_time, tokens));
}

void AudioEncoder::collect(ParamList& list, const std::string& prefix) const {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    list.add(prefix + "conv" + std::to_string(i) + ".weight", blocks[i].weight);
    list.add(prefix + "conv" + std::to_string(i) + ".bias", blocks[i].bias);
  }
  projection.collect(list, prefix + "mlp.");
  list.add(prefix + "input_stats", input_stats);
}

VideoEmbedding VideoEmbedding::create(std::int64_t frame_size, std::int64_t patch, std::int64_t dim, Rng& rng) {
  if (patch < 1 || frame_size % patch != 0) throw ConfigError("frame size must be a multiple of the patch size");
  VideoEmbedding emb;
  emb.patch = patch;
  emb.frame_size = frame_size;
  emb.projection = xavier_param(3 * patch * patch, dim, rng);
  emb.positions = normal_param({emb.patch_count() + 1, dim}, Real(0.02), rng);
  return emb;
}

std::vector<Tensor> VideoEmbedding::operator()(const FrameStack& stack, const Tensor& class_token) const {
  if (stack.count() < 1) throw InputError("video encoder needs at least one frame");
  if (stack.height != frame_size || stack.width != frame_size) {
    throw ShapeError("frames are " + std::to_string(stack.height) + "x" + std::to_string(stack.width) +
                     ", model expects " + std::to_string(frame_size));
  }
  std::vector<Tensor> out;
  for (std::int64_t f = 0; f < stack.count(); ++f) {
    out.push_back(embed_patches(patchify(stack.frame(f), stack.height, stack.width, patch), projection, positions,
                                class_token));
  }
  return out;
}

std::vector<Tensor> VideoEmbedding::meta(std::int64_t count, const Tensor& class_token) const {
  std::vector<Tensor> out;
  for (std::int64_t f = 0; f < count; ++f) {
    out.push_back(embed_patches(Tensor::meta({patch_count(), 3 * patch * patch}), projection, positions, class_token));
  }
  return out;
}

void VideoEmbedding::collect(ParamList& list, const std::string& prefix) const {
  list.add(prefix + "projection", projection);
  list.add(prefix + "positions", positions);
}

UFFIA_NAMESPACE_END
