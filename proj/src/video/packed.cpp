#include "uffia/numerics/container.hpp"
#include "uffia/video/frames.hpp"

UFFIA_NAMESPACE_BEGIN

namespace {
constexpr const char* kPackedTag = "uffia-frames";
}

void save_packed_frames(const std::filesystem::path& path, const NativeFrames& clip) {
  if (clip.count < 1 || static_cast<std::int64_t>(clip.pixels.size()) != clip.count * clip.frame_size()) {
    throw ShapeError("packed frames: pixel buffer does not match " + std::to_string(clip.count) + " frames");
  }
  Container c(kPackedTag);
  c.add_u8("frames", {clip.count, 3, clip.height, clip.width}, clip.pixels);
  c.save(path);
}

NativeFrames load_packed_frames(const std::filesystem::path& path, std::int64_t frame_size) {
  const Container c = Container::load(path);
  if (c.tag() != kPackedTag) throw ParseError(path.string() + ": container holds '" + c.tag() + "', not frames");
  const auto& e = c.entry("frames");
  if (e.shape.size() != 4 || e.shape[1] != 3 || e.shape[0] < 1) {
    throw ParseError(path.string() + ": frames entry must be [F x 3 x H x W], got " + shape_to_string(e.shape));
  }
  const auto pixels = c.u8_values("frames");
  NativeFrames out{e.shape[0], frame_size, frame_size, {}};
  out.pixels.reserve(static_cast<std::size_t>(out.count * out.frame_size()));
  const std::int64_t src_frame = 3 * e.shape[2] * e.shape[3];
  for (std::int64_t f = 0; f < out.count; ++f) {
    resize_planes(pixels.data() + f * src_frame, 3, e.shape[2], e.shape[3], frame_size, frame_size, out.pixels);
  }
  return out;
}

UFFIA_NAMESPACE_END
