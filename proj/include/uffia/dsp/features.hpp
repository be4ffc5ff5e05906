#pragma once

#include <cstdint>
#include <vector>

#include "uffia/core.hpp"

UFFIA_NAMESPACE_BEGIN

inline constexpr double kSampleRate = 64000.0;

struct Waveform {
  std::vector<double> samples;
  double sample_rate = kSampleRate;

  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

/// Log-mel matrix, time-major: values[t * bins + m].
struct MelFeature {
  std::int64_t frames = 0;
  std::int64_t bins = 0;
  std::vector<Real> values;
  /// Fraction of the original frame count kept by simpf_pool (1 = uncompressed).
  double compression = 1.0;

  Real at(std::int64_t t, std::int64_t m) const { return values[static_cast<std::size_t>(t * bins + m)]; }
};

struct MelConfig {
  int n_fft = 2048;
  int hop = 1024;
  int mel_bins = 128;
  double sample_rate = kSampleRate;
  /// Output frames per second of audio; 2 s of input always yields 128 frames.
  double frame_rate = 64.0;
  double log_floor = 1e-10;
};

/// HTK-style mel scale.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Centre frequencies (Hz) of `bins` filters equally spaced on the mel scale
/// between 0 and sample_rate / 2 (end points excluded).
std::vector<double> mel_center_frequencies(int bins, double sample_rate);

/// Triangular filters, row-major [bins x (n_fft/2 + 1)]. Each triangle is
/// widened to reach at least one FFT bin either side of its centre, so no
/// filter is empty at high mel resolution.
std::vector<double> mel_filterbank(int bins, int n_fft, double sample_rate);

/// Periodic Hann window, magnitude STFT, mel projection, natural log.
/// Frames start every `hop` samples; the tail is zero-padded so the frame
/// count is ceil(duration * frame_rate).
MelFeature stft_log_mel(const Waveform& wave, const MelConfig& config = {});

/// Spectral pooling along time: keeps the floor(k * T) lowest-frequency DFT
/// coefficients of each mel row and transforms back at the reduced length,
/// rescaled so every row keeps its time mean.
MelFeature simpf_pool(const MelFeature& mel, double k);

UFFIA_NAMESPACE_END
