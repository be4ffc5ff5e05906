#pragma once

#include "uffia/data/records.hpp"

UFFIA_NAMESPACE_BEGIN

/// Per-class generator settings. Distances and speeds are in pixels at a
/// 64x64 frame and scale with the frame size.
struct ClassProfile {
  double burst_rate = 0;  // audio events per second
  std::int64_t blobs = 0;
  double dispersion = 0;  // Rayleigh scale of the school around its centre; <= 0: uniform
  double speed = 0;       // pixels per frame
};

struct SynthParams {
  std::array<ClassProfile, 4> classes{{
      {0.0, 6, 0.0, 0.3},
      {4.0, 10, 11.0, 0.8},
      {12.0, 14, 6.0, 1.5},
      {30.0, 18, 3.0, 2.5},
  }};
  std::int64_t frames = 16;
  std::int64_t frame_size = 64;
  double duration = 2.0;
  double sample_rate = kSampleRate;
  double background_rms = 0.02;
  /// RMS of one burst over its own duration.
  double burst_rms = 0.1;
  double burst_ms = 10.0;
  double band_low = 2000.0;
  double band_high = 8000.0;
  double blob_radius = 1.5;
  double blob_amplitude = 0.6;
  double pixel_noise = 0.03;
  std::uint64_t seed = 7;

  void validate() const;
};

/// Renders one clip of class `label`: pink background noise plus Poisson-timed
/// Hann-windowed band-limited bursts; dark frames with bright Gaussian blobs
/// orbiting a school centre (or drifting uniformly for class None).
ClipRecord generate_clip(int label, const SynthParams& params, Rng& rng);

/// Clip `index` of a seeded synthetic set; fully determined by (params.seed, index, label).
ClipRecord synth_clip(const SynthParams& params, std::uint64_t index, int label);

/// Measurements the labelling oracle works from.
struct OracleFeatures {
  double burst_rate = 0;  // estimated events per second from in-band energy
  double dispersion = 0;  // intensity-weighted RMS radius of the first frame, 64-px units
};

OracleFeatures measure_clip(const ClipRecord& clip, const SynthParams& params);

/// Expected value of the dispersion measurement for each class.
double reference_dispersion(int label, const SynthParams& params);

/// Each measurement is mapped to a continuous class coordinate by piecewise
/// linear interpolation between the class references (burst rate linearly,
/// dispersion in log space), the two coordinates are averaged, and the result
/// is rounded with exact halves going to the lower class.
int oracle_from_features(const OracleFeatures& features, const SynthParams& params);

/// Label recovered from the media of a synthetic clip. Non-synthetic clips raise UnsupportedError.
int oracle_label(const ClipRecord& clip, const SynthParams& params);

UFFIA_NAMESPACE_END
