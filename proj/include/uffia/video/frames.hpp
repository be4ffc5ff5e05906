#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "uffia/numerics/ops.hpp"
#include "uffia/numerics/rng.hpp"

UFFIA_NAMESPACE_BEGIN

/// A clip's full frame sequence, stored compactly as 8-bit RGB planes:
/// pixels[((f * 3 + c) * height + y) * width + x].
struct NativeFrames {
  std::int64_t count = 0;
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<std::uint8_t> pixels;

  std::int64_t frame_size() const { return 3 * height * width; }
};

/// Selected frames as reals in [0, 1], same plane layout as NativeFrames.
struct FrameStack {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<Real> values;
  std::vector<std::int64_t> source_indices;
  /// Frames in the clip this stack was drawn from (0 if unknown).
  std::int64_t native_count = 0;

  std::int64_t count() const { return static_cast<std::int64_t>(source_indices.size()); }
  std::int64_t frame_size() const { return 3 * height * width; }
  /// True when every native frame is present, in order.
  bool is_complete() const;
  std::span<const Real> frame(std::int64_t i) const {
    return std::span<const Real>(values).subspan(static_cast<std::size_t>(i * frame_size()),
                                                 static_cast<std::size_t>(frame_size()));
  }
};

/// `count` distinct indices from [0, native), uniformly without replacement, sorted.
std::vector<std::int64_t> sample_indices(std::int64_t native, std::int64_t count, Rng& rng);
FrameStack sample_frames(const NativeFrames& clip, std::int64_t count, Rng& rng);
/// `count` evenly spaced frames, each the midpoint of its share of the clip.
FrameStack strided_frames(const NativeFrames& clip, std::int64_t count);
/// Every frame, in order.
FrameStack all_frames(const NativeFrames& clip);

/// Scales by `darkness`, adds N(0, variance) per value, clips to [0, 1].
FrameStack corrupt_frames(const FrameStack& stack, double darkness, double variance, Rng& rng);
/// Per-frame, per-channel multiplicative jitter in [1 - amount, 1 + amount], clipped.
FrameStack color_jitter(const FrameStack& stack, double amount, Rng& rng);

/// Splits a [3 x H x W] frame into [N x 3P^2] rows: patches in row-major
/// order, each flattened channel-major (c, then y, then x).
Tensor patchify(std::span<const Real> frame, std::int64_t height, std::int64_t width, std::int64_t patch);
/// Inverse of patchify.
std::vector<Real> reassemble(const Tensor& patches, std::int64_t height, std::int64_t width, std::int64_t patch);

/// [class_token; patches * projection] + positions, giving [(N + 1) x d].
Tensor embed_patches(const Tensor& patches, const Tensor& projection, const Tensor& positions, const Tensor& class_token);

/// Area-averages (or nearest-repeats, when enlarging) `channels` planes of
/// src_height x src_width to height x width, appending to `out`.
void resize_planes(const std::uint8_t* src, std::int64_t channels, std::int64_t src_height, std::int64_t src_width,
                   std::int64_t height, std::int64_t width, std::vector<std::uint8_t>& out);

/// Packed clip file: a container tagged "uffia-frames" whose u8 entry "frames" is [F x 3 x H x W].
void save_packed_frames(const std::filesystem::path& path, const NativeFrames& clip);
/// Reads a packed clip, resized to frame_size x frame_size.
NativeFrames load_packed_frames(const std::filesystem::path& path, std::int64_t frame_size);

/// Reads an 8-bit RGB/RGBA/gray PNG and area-averages it down (or nearest-up) to height x width.
/// Appends the frame's planes to `out`.
void read_png_frame(const std::filesystem::path& path, std::int64_t height, std::int64_t width,
                    std::vector<std::uint8_t>& out);
/// Writes frame `index` of `clip` as an RGB PNG.
void write_png_frame(const std::filesystem::path& path, const NativeFrames& clip, std::int64_t index);

UFFIA_NAMESPACE_END
