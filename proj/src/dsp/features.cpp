#include "uffia/dsp/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "fft.hpp"

UFFIA_NAMESPACE_BEGIN

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

std::vector<double> mel_points(int bins, double sample_rate) {
  const double top = hz_to_mel(sample_rate / 2);
  std::vector<double> hz(static_cast<std::size_t>(bins + 2));
  for (int i = 0; i < bins + 2; ++i) hz[i] = mel_to_hz(top * i / (bins + 1));
  return hz;
}

}  // namespace

std::vector<double> mel_center_frequencies(int bins, double sample_rate) {
  auto pts = mel_points(bins, sample_rate);
  return {pts.begin() + 1, pts.end() - 1};
}

std::vector<double> mel_filterbank(int bins, int n_fft, double sample_rate) {
  if (bins < 1 || n_fft < 2) throw ConfigError("mel filterbank needs at least one bin and n_fft >= 2");
  if (bins > n_fft / 2) throw ConfigError("mel bins exceed n_fft / 2");
  const int width = n_fft / 2 + 1;
  const double spacing = sample_rate / n_fft;
  const auto pts = mel_points(bins, sample_rate);
  std::vector<double> fb(static_cast<std::size_t>(bins) * width, 0.0);
  for (int m = 0; m < bins; ++m) {
    const double centre = pts[m + 1];
    const double lo = std::min(pts[m], centre - spacing);
    const double hi = std::max(pts[m + 2], centre + spacing);
    for (int k = 0; k < width; ++k) {
      const double f = k * spacing;
      const double w = f <= centre ? (f - lo) / (centre - lo) : (hi - f) / (hi - centre);
      fb[static_cast<std::size_t>(m) * width + k] = std::max(0.0, w);
    }
  }
  return fb;
}

MelFeature stft_log_mel(const Waveform& wave, const MelConfig& config) {
  if (wave.samples.empty()) throw InputError("stft_log_mel: empty signal");
  if (std::abs(wave.sample_rate - config.sample_rate) > 1e-9) {
    throw InputError("stft_log_mel: expected " + std::to_string(config.sample_rate) + " Hz input");
  }
  const std::int64_t n = static_cast<std::int64_t>(wave.samples.size());
  const std::int64_t frames =
      static_cast<std::int64_t>(std::ceil(static_cast<double>(n) * config.frame_rate / config.sample_rate - 1e-9));
  const int width = config.n_fft / 2 + 1;
  const auto fb = mel_filterbank(config.mel_bins, config.n_fft, config.sample_rate);

  std::vector<double> window(static_cast<std::size_t>(config.n_fft));
  for (int i = 0; i < config.n_fft; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / config.n_fft);
  }

  MelFeature out;
  out.frames = frames;
  out.bins = config.mel_bins;
  out.values.resize(static_cast<std::size_t>(frames * config.mel_bins));
  std::vector<double> segment(static_cast<std::size_t>(config.n_fft));
  std::vector<std::complex<double>> spectrum(static_cast<std::size_t>(width));
  std::vector<double> magnitude(static_cast<std::size_t>(width));
  for (std::int64_t t = 0; t < frames; ++t) {
    const std::int64_t start = t * config.hop;
    for (int i = 0; i < config.n_fft; ++i) {
      const std::int64_t s = start + i;
      segment[i] = s < n ? wave.samples[static_cast<std::size_t>(s)] * window[i] : 0.0;
    }
    detail::rfft(segment, spectrum);
    for (int k = 0; k < width; ++k) magnitude[k] = std::abs(spectrum[k]);
    for (int m = 0; m < config.mel_bins; ++m) {
      const double* row = fb.data() + static_cast<std::size_t>(m) * width;
      double energy = 0;
      for (int k = 0; k < width; ++k) energy += row[k] * magnitude[k];
      out.values[static_cast<std::size_t>(t * config.mel_bins + m)] =
          static_cast<Real>(std::log(std::max(energy, config.log_floor)));
    }
  }
  return out;
}

MelFeature simpf_pool(const MelFeature& mel, double k) {
  if (!(k > 0.0) || k > 1.0) throw ConfigError("simpf_pool: compression must lie in (0, 1]");
  const std::int64_t frames = mel.frames;
  const std::int64_t kept = static_cast<std::int64_t>(std::floor(k * static_cast<double>(frames) + 1e-9));
  if (kept < 1) throw ConfigError("simpf_pool: compression keeps no frames");

  MelFeature out;
  out.frames = kept;
  out.bins = mel.bins;
  out.compression = mel.compression * static_cast<double>(kept) / static_cast<double>(frames);
  out.values.resize(static_cast<std::size_t>(kept * mel.bins));

  std::vector<double> row(static_cast<std::size_t>(frames));
  std::vector<std::complex<double>> spectrum(static_cast<std::size_t>(frames / 2 + 1));
  std::vector<std::complex<double>> cropped(static_cast<std::size_t>(kept / 2 + 1));
  std::vector<double> pooled(static_cast<std::size_t>(kept));
  for (std::int64_t m = 0; m < mel.bins; ++m) {
    for (std::int64_t t = 0; t < frames; ++t) row[t] = mel.at(t, m);
    detail::rfft(row, spectrum);
    std::copy_n(spectrum.begin(), cropped.size(), cropped.begin());
    // For even lengths the boundary bin stands for both +K/2 and -K/2; only
    // its real part survives in a real-valued output.
    if (kept % 2 == 0) cropped.back() = {cropped.back().real(), 0.0};
    detail::irfft(cropped, pooled);
    for (std::int64_t t = 0; t < kept; ++t) {
      out.values[static_cast<std::size_t>(t * mel.bins + m)] = static_cast<Real>(pooled[t] / static_cast<double>(frames));
    }
  }
  return out;
}

UFFIA_NAMESPACE_END
