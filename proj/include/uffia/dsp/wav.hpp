#pragma once

#include <filesystem>

#include "uffia/dsp/features.hpp"

UFFIA_NAMESPACE_BEGIN

/// Reads PCM16/PCM32 WAV, averages channels, and linearly resamples to `target_rate`.
Waveform read_wav(const std::filesystem::path& path, double target_rate = kSampleRate);
/// Writes mono PCM16, clipping to [-1, 1].
void write_wav(const std::filesystem::path& path, const Waveform& wave);

/// Linear-interpolation resampler.
Waveform resample_linear(const Waveform& wave, double target_rate);

UFFIA_NAMESPACE_END
