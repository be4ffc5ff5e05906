#pragma once

#include <limits>
#include <string>
#include <vector>

#include "uffia/dsp/features.hpp"
#include "uffia/numerics/rng.hpp"

UFFIA_NAMESPACE_BEGIN

enum class NoiseKind { kWhite, kBubble, kPump };

NoiseKind parse_noise_kind(const std::string& name);
std::string to_string(NoiseKind kind);

struct NoiseSpec {
  NoiseKind kind = NoiseKind::kBubble;
  /// +infinity disables mixing.
  double snr_db = std::numeric_limits<double>::infinity();
};

/// Unscaled noise of `count` samples:
///  white  - unit-variance Gaussian;
///  bubble - Gaussian noise band-limited to 500-4000 Hz;
///  pump   - 50 Hz hum with harmonics (amplitude 1/h, random phases) plus a faint broadband floor.
std::vector<double> make_noise(NoiseKind kind, std::size_t count, double sample_rate, Rng& rng);

double mean_power(const std::vector<double>& samples);

/// signal + noise, with the noise rescaled so that the signal-to-noise power
/// ratio equals snr_db exactly. snr_db = +inf returns the signal unchanged.
Waveform mix_with_noise(const Waveform& signal, const std::vector<double>& noise, double snr_db);
Waveform mix_at_snr(const Waveform& signal, const NoiseSpec& spec, Rng& rng);

UFFIA_NAMESPACE_END
