#include "uffia/dsp/noise.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "fft.hpp"

UFFIA_NAMESPACE_BEGIN

NoiseKind parse_noise_kind(const std::string& name) {
  if (name == "white") return NoiseKind::kWhite;
  if (name == "bubble") return NoiseKind::kBubble;
  if (name == "pump") return NoiseKind::kPump;
  throw ConfigError("unknown noise kind '" + name + "' (expected white, bubble or pump)");
}

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kWhite: return "white";
    case NoiseKind::kBubble: return "bubble";
    case NoiseKind::kPump: return "pump";
  }
  return "unknown";
}

std::vector<double> make_noise(NoiseKind kind, std::size_t count, double sample_rate, Rng& rng) {
  std::vector<double> out(count);
  switch (kind) {
    case NoiseKind::kWhite:
      for (auto& v : out) v = rng.normal();
      break;
    case NoiseKind::kBubble: {
      for (auto& v : out) v = rng.normal();
      std::vector<std::complex<double>> spectrum(count / 2 + 1);
      detail::rfft(out, spectrum);
      for (std::size_t k = 0; k < spectrum.size(); ++k) {
        const double f = static_cast<double>(k) * sample_rate / static_cast<double>(count);
        if (f < 500.0 || f > 4000.0) spectrum[k] = 0.0;
      }
      detail::irfft(spectrum, out);
      break;
    }
    case NoiseKind::kPump: {
      double phases[8];
      for (auto& p : phases) p = rng.uniform(0.0, 2.0 * std::numbers::pi);
      for (std::size_t i = 0; i < count; ++i) {
        const double t = static_cast<double>(i) / sample_rate;
        double v = 0;
        for (int h = 1; h <= 8; ++h) v += std::sin(2.0 * std::numbers::pi * 50.0 * h * t + phases[h - 1]) / h;
        out[i] = v + 0.05 * rng.normal();
      }
      break;
    }
  }
  return out;
}

double mean_power(const std::vector<double>& samples) {
  if (samples.empty()) return 0.0;
  double total = 0;
  for (double v : samples) total += v * v;
  return total / static_cast<double>(samples.size());
}

Waveform mix_with_noise(const Waveform& signal, const std::vector<double>& noise, double snr_db) {
  if (std::isinf(snr_db) && snr_db > 0) return signal;
  if (noise.size() != signal.samples.size()) throw ShapeError("noise length differs from signal length");
  const double ps = mean_power(signal.samples);
  if (!(ps > 0)) throw InputError("mix_at_snr: silent signal, SNR undefined");
  const double pn = mean_power(noise);
  if (!(pn > 0)) throw InputError("mix_at_snr: silent noise");
  const double gain = std::sqrt(ps / (pn * std::pow(10.0, snr_db / 10.0)));
  Waveform out = signal;
  for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] += gain * noise[i];
  return out;
}

Waveform mix_at_snr(const Waveform& signal, const NoiseSpec& spec, Rng& rng) {
  if (std::isinf(spec.snr_db) && spec.snr_db > 0) return signal;
  return mix_with_noise(signal, make_noise(spec.kind, signal.samples.size(), signal.sample_rate, rng), spec.snr_db);
}

UFFIA_NAMESPACE_END
