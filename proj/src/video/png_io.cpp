#include <png.h>

#include <algorithm>

#include "uffia/video/frames.hpp"

UFFIA_NAMESPACE_BEGIN

void resize_planes(const std::uint8_t* src, std::int64_t channels, std::int64_t src_height, std::int64_t src_width,
                   std::int64_t height, std::int64_t width, std::vector<std::uint8_t>& out) {
  const std::int64_t sh = src_height, sw = src_width;
  // Area average over the source rectangle that maps onto each target pixel.
  for (std::int64_t c = 0; c < channels; ++c) {
    const std::uint8_t* plane = src + c * sh * sw;
    for (std::int64_t y = 0; y < height; ++y) {
      const std::int64_t y0 = y * sh / height, y1 = std::max(y0 + 1, (y + 1) * sh / height);
      for (std::int64_t x = 0; x < width; ++x) {
        const std::int64_t x0 = x * sw / width, x1 = std::max(x0 + 1, (x + 1) * sw / width);
        std::uint64_t total = 0;
        for (std::int64_t yy = y0; yy < y1; ++yy)
          for (std::int64_t xx = x0; xx < x1; ++xx) total += plane[yy * sw + xx];
        const auto n = static_cast<std::uint64_t>((y1 - y0) * (x1 - x0));
        out.push_back(static_cast<std::uint8_t>((total + n / 2) / n));
      }
    }
  }
}

void read_png_frame(const std::filesystem::path& path, std::int64_t height, std::int64_t width,
                    std::vector<std::uint8_t>& out) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw InputError("cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> rgb(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, rgb.data(), 0, nullptr)) {
    throw InputError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  const std::int64_t sh = image.height, sw = image.width;
  std::vector<std::uint8_t> planes(rgb.size());
  for (std::int64_t i = 0; i < sh * sw; ++i)
    for (int c = 0; c < 3; ++c) planes[static_cast<std::size_t>(c * sh * sw + i)] = rgb[static_cast<std::size_t>(i * 3 + c)];
  resize_planes(planes.data(), 3, sh, sw, height, width, out);
}

void write_png_frame(const std::filesystem::path& path, const NativeFrames& clip, std::int64_t index) {
  if (index < 0 || index >= clip.count) throw IndexError("frame index out of range");
  const std::int64_t plane = clip.height * clip.width;
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(plane * 3));
  const auto* src = clip.pixels.data() + index * clip.frame_size();
  for (std::int64_t i = 0; i < plane; ++i)
    for (int c = 0; c < 3; ++c) rgb[static_cast<std::size_t>(i * 3 + c)] = src[c * plane + i];
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(clip.width);
  image.height = static_cast<png_uint_32>(clip.height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, rgb.data(), 0, nullptr)) {
    throw InputError("cannot write PNG " + path.string() + ": " + image.message);
  }
}

UFFIA_NAMESPACE_END
