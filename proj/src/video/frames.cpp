#include "uffia/video/frames.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

UFFIA_NAMESPACE_BEGIN

std::vector<std::int64_t> sample_indices(std::int64_t native, std::int64_t count, Rng& rng) {
  if (count < 1) throw InputError("sample_frames: need at least one frame");
  if (count > native) {
    throw InputError("sample_frames: requested " + std::to_string(count) + " of " + std::to_string(native) + " frames");
  }
  std::vector<std::int64_t> pool(static_cast<std::size_t>(native));
  std::iota(pool.begin(), pool.end(), std::int64_t{0});
  for (std::int64_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(native - i)));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(count));
  std::sort(pool.begin(), pool.end());
  return pool;
}

namespace {

FrameStack gather(const NativeFrames& clip, std::vector<std::int64_t> indices) {
  FrameStack stack;
  stack.height = clip.height;
  stack.width = clip.width;
  const std::int64_t size = clip.frame_size();
  stack.values.reserve(static_cast<std::size_t>(size) * indices.size());
  for (auto idx : indices) {
    const auto* src = clip.pixels.data() + idx * size;
    for (std::int64_t i = 0; i < size; ++i) stack.values.push_back(static_cast<Real>(src[i]) / Real(255));
  }
  stack.source_indices = std::move(indices);
  stack.native_count = clip.count;
  return stack;
}

}  // namespace

bool FrameStack::is_complete() const {
  if (native_count < 1 || count() != native_count) return false;
  for (std::int64_t i = 0; i < count(); ++i) {
    if (source_indices[static_cast<std::size_t>(i)] != i) return false;
  }
  return true;
}

FrameStack sample_frames(const NativeFrames& clip, std::int64_t count, Rng& rng) {
  return gather(clip, sample_indices(clip.count, count, rng));
}

FrameStack strided_frames(const NativeFrames& clip, std::int64_t count) {
  if (count < 1 || count > clip.count) {
    throw ShapeError("cannot take " + std::to_string(count) + " of " + std::to_string(clip.count) + " frames");
  }
  std::vector<std::int64_t> idx(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) idx[static_cast<std::size_t>(i)] = (2 * i + 1) * clip.count / (2 * count);
  return gather(clip, std::move(idx));
}

FrameStack all_frames(const NativeFrames& clip) {
  if (clip.count < 1) throw InputError("clip has no frames");
  std::vector<std::int64_t> idx(static_cast<std::size_t>(clip.count));
  std::iota(idx.begin(), idx.end(), std::int64_t{0});
  return gather(clip, std::move(idx));
}

FrameStack corrupt_frames(const FrameStack& stack, double darkness, double variance, Rng& rng) {
  if (!(darkness > 0.0) || darkness > 1.0) throw ConfigError("darkness factor must lie in (0, 1]");
  if (variance < 0.0) throw ConfigError("noise variance must be non-negative");
  if (variance > 0.2) throw ConfigError("noise variance above the supported maximum of 0.2");
  FrameStack out = stack;
  const double sd = std::sqrt(variance);
  for (auto& v : out.values) {
    double x = static_cast<double>(v) * darkness;
    if (sd > 0) x += sd * rng.normal();
    v = static_cast<Real>(std::clamp(x, 0.0, 1.0));
  }
  return out;
}

FrameStack color_jitter(const FrameStack& stack, double amount, Rng& rng) {
  if (amount < 0.0 || amount >= 1.0) throw ConfigError("colour jitter amount must lie in [0, 1)");
  FrameStack out = stack;
  if (amount == 0.0) return out;
  const std::int64_t plane = stack.height * stack.width;
  for (std::int64_t f = 0; f < stack.count(); ++f) {
    for (int c = 0; c < 3; ++c) {
      const double gain = rng.uniform(1.0 - amount, 1.0 + amount);
      Real* p = out.values.data() + (f * 3 + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i) p[i] = static_cast<Real>(std::clamp(p[i] * gain, 0.0, 1.0));
    }
  }
  return out;
}

Tensor patchify(std::span<const Real> frame, std::int64_t height, std::int64_t width, std::int64_t patch) {
  if (patch < 1 || height % patch != 0 || width % patch != 0) {
    throw ShapeError("patchify: " + std::to_string(height) + "x" + std::to_string(width) +
                     " is not divisible by patch size " + std::to_string(patch));
  }
  if (static_cast<std::int64_t>(frame.size()) != 3 * height * width) throw ShapeError("patchify: frame size mismatch");
  const std::int64_t rows = height / patch, cols = width / patch, dim = 3 * patch * patch;
  std::vector<Real> out(static_cast<std::size_t>(rows * cols * dim));
  std::size_t o = 0;
  for (std::int64_t pr = 0; pr < rows; ++pr)
    for (std::int64_t pc = 0; pc < cols; ++pc)
      for (std::int64_t c = 0; c < 3; ++c)
        for (std::int64_t y = 0; y < patch; ++y)
          for (std::int64_t x = 0; x < patch; ++x) out[o++] = frame[((c * height) + pr * patch + y) * width + pc * patch + x];
  return Tensor::from_values({rows * cols, dim}, std::move(out));
}

std::vector<Real> reassemble(const Tensor& patches, std::int64_t height, std::int64_t width, std::int64_t patch) {
  const std::int64_t rows = height / patch, cols = width / patch;
  if (patches.shape() != Shape{rows * cols, 3 * patch * patch}) throw ShapeError("reassemble: patch matrix shape mismatch");
  std::vector<Real> frame(static_cast<std::size_t>(3 * height * width));
  const auto v = patches.values();
  std::size_t o = 0;
  for (std::int64_t pr = 0; pr < rows; ++pr)
    for (std::int64_t pc = 0; pc < cols; ++pc)
      for (std::int64_t c = 0; c < 3; ++c)
        for (std::int64_t y = 0; y < patch; ++y)
          for (std::int64_t x = 0; x < patch; ++x) frame[((c * height) + pr * patch + y) * width + pc * patch + x] = v[o++];
  return frame;
}

Tensor embed_patches(const Tensor& patches, const Tensor& projection, const Tensor& positions, const Tensor& class_token) {
  if (patches.rank() != 2 || projection.rank() != 2 || patches.dim(1) != projection.dim(0)) {
    throw ShapeError("embed_patches: projection " + shape_to_string(projection.shape()) + " does not accept patches " +
                     shape_to_string(patches.shape()));
  }
  const std::int64_t d = projection.dim(1);
  if (class_token.shape() != Shape{1, d}) throw ShapeError("embed_patches: class token must be [1 x d]");
  if (positions.shape() != Shape{patches.dim(0) + 1, d}) throw ShapeError("embed_patches: position table must be [(N+1) x d]");
  return add(concat({class_token, matmul(patches, projection)}, 0), positions);
}

UFFIA_NAMESPACE_END
