#include "uffia/dsp/augment.hpp"

#include <numeric>

UFFIA_NAMESPACE_BEGIN

MelFeature spec_augment(const MelFeature& mel, const SpecAugmentConfig& config, Rng& rng) {
  if (config.min_time_width < 0 || config.min_time_width > config.max_time_width ||
      config.min_freq_width < 0 || config.min_freq_width > config.max_freq_width) {
    throw ConfigError("spec_augment: inconsistent mask widths");
  }
  if (config.max_time_width > mel.frames || config.max_freq_width > mel.bins) {
    throw ConfigError("spec_augment: mask width exceeds feature extent");
  }
  MelFeature out = mel;
  if (config.time_masks == 0 && config.freq_masks == 0) return out;
  const double total = std::accumulate(mel.values.begin(), mel.values.end(), 0.0);
  const Real fill = static_cast<Real>(total / static_cast<double>(mel.values.size()));

  auto draw = [&](int lo, int hi, std::int64_t extent) {
    const auto width = static_cast<std::int64_t>(lo + rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
    const auto start = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(extent - width + 1)));
    return std::pair{start, width};
  };
  for (int i = 0; i < config.time_masks; ++i) {
    const auto [start, width] = draw(config.min_time_width, config.max_time_width, mel.frames);
    for (std::int64_t t = start; t < start + width; ++t)
      for (std::int64_t m = 0; m < mel.bins; ++m) out.values[static_cast<std::size_t>(t * mel.bins + m)] = fill;
  }
  for (int i = 0; i < config.freq_masks; ++i) {
    const auto [start, width] = draw(config.min_freq_width, config.max_freq_width, mel.bins);
    for (std::int64_t t = 0; t < mel.frames; ++t)
      for (std::int64_t m = start; m < start + width; ++m) out.values[static_cast<std::size_t>(t * mel.bins + m)] = fill;
  }
  return out;
}

UFFIA_NAMESPACE_END
