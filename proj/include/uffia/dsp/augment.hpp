#pragma once

#include "uffia/dsp/features.hpp"
#include "uffia/numerics/rng.hpp"

UFFIA_NAMESPACE_BEGIN

struct SpecAugmentConfig {
  int time_masks = 2;
  int freq_masks = 2;
  int max_time_width = 12;
  int max_freq_width = 12;
  int min_time_width = 0;
  int min_freq_width = 0;
};

/// Time and frequency masking. Masked cells take the mean of the input
/// feature; widths are uniform in [min, max] and positions uniform over the
/// valid range, drawn from `rng` in a fixed order (all time masks first).
MelFeature spec_augment(const MelFeature& mel, const SpecAugmentConfig& config, Rng& rng);

UFFIA_NAMESPACE_END
