#include "uffia/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "../dsp/fft.hpp"

UFFIA_NAMESPACE_BEGIN

namespace {

constexpr double kPinkLowCut = 20.0;
// Leakage margin of the Hann-windowed bursts around the generation band.
constexpr double kBandMargin = 300.0;
constexpr std::array<double, 3> kBackground{0.05, 0.15, 0.25};
constexpr std::array<double, 3> kFishColour{1.0, 0.9, 0.7};
constexpr double kForegroundThreshold = 0.1;

std::int64_t sample_count(const SynthParams& p) { return std::llround(p.duration * p.sample_rate); }
std::int64_t burst_length(const SynthParams& p) { return std::llround(p.burst_ms * 1e-3 * p.sample_rate); }

/// Largest radius a school member may sit at, in units of the dispersion.
constexpr double kRadiusClamp = 2.5;

std::vector<double> pink_noise(const SynthParams& p, Rng& rng) {
  const auto n = static_cast<std::size_t>(sample_count(p));
  std::vector<std::complex<double>> spectrum(n / 2 + 1);
  for (std::size_t k = 1; k < spectrum.size(); ++k) {
    const double f = static_cast<double>(k) * p.sample_rate / static_cast<double>(n);
    const double phase = 2 * std::numbers::pi * rng.uniform();
    if (f >= kPinkLowCut) spectrum[k] = std::polar(1.0 / std::sqrt(f), phase);
  }
  spectrum.back() = std::abs(spectrum.back());
  std::vector<double> out(n);
  detail::irfft(spectrum, out);
  double power = 0;
  for (double v : out) power += v * v;
  const double gain = p.background_rms / std::sqrt(power / static_cast<double>(n));
  for (auto& v : out) v *= gain;
  return out;
}

void add_burst(std::vector<double>& audio, std::int64_t start, const SynthParams& p, Rng& rng) {
  const std::int64_t len = burst_length(p);
  constexpr int kTones = 12;
  // Each tone advanced by complex rotation instead of per-sample sin().
  std::array<std::complex<double>, kTones> phasor{}, step{};
  for (int t = 0; t < kTones; ++t) {
    const double freq = rng.uniform(p.band_low, p.band_high);
    phasor[static_cast<std::size_t>(t)] = std::polar(1.0, 2 * std::numbers::pi * rng.uniform());
    step[static_cast<std::size_t>(t)] = std::polar(1.0, 2 * std::numbers::pi * freq / p.sample_rate);
  }
  std::vector<double> burst(static_cast<std::size_t>(len));
  double energy = 0;
  for (std::int64_t i = 0; i < len; ++i) {
    const double window = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * (static_cast<double>(i) + 0.5) / static_cast<double>(len));
    double s = 0;
    for (std::size_t t = 0; t < kTones; ++t) {
      s += phasor[t].imag();
      phasor[t] *= step[t];
    }
    burst[static_cast<std::size_t>(i)] = window * s;
    energy += window * window * s * s;
  }
  const double gain = std::sqrt(static_cast<double>(len) * p.burst_rms * p.burst_rms / energy);
  for (std::int64_t i = 0; i < len; ++i) audio[static_cast<std::size_t>(start + i)] += gain * burst[static_cast<std::size_t>(i)];
}

struct Blob {
  double x, y;
};

/// Blob positions for every frame.
std::vector<std::vector<Blob>> place_blobs(const ClassProfile& cls, const SynthParams& p, Rng& rng) {
  const double size = static_cast<double>(p.frame_size);
  const double scale = size / 64.0;
  const auto n = static_cast<std::size_t>(cls.blobs);
  std::vector<std::vector<Blob>> frames(static_cast<std::size_t>(p.frames), std::vector<Blob>(n));
  if (cls.dispersion <= 0) {
    for (std::size_t b = 0; b < n; ++b) {
      double x = rng.uniform(0, size), y = rng.uniform(0, size);
      const double heading = 2 * std::numbers::pi * rng.uniform();
      double vx = cls.speed * scale * std::cos(heading), vy = cls.speed * scale * std::sin(heading);
      for (auto& frame : frames) {
        frame[b] = {x, y};
        x += vx;
        y += vy;
        if (x < 0 || x > size) vx = -vx, x = std::clamp(x, 0.0, size);
        if (y < 0 || y > size) vy = -vy, y = std::clamp(y, 0.0, size);
      }
    }
    return frames;
  }
  const double sigma = cls.dispersion * scale;
  const double cx = rng.uniform(0.35 * size, 0.65 * size), cy = rng.uniform(0.35 * size, 0.65 * size);
  // Stratified radii: one draw per quantile band of the clamped Rayleigh law.
  const double top = 1 - std::exp(-0.5 * kRadiusClamp * kRadiusClamp);
  for (std::size_t b = 0; b < n; ++b) {
    const double u = top * (static_cast<double>(b) + rng.uniform()) / static_cast<double>(n);
    const double radius = sigma * std::sqrt(-2 * std::log1p(-u));
    const double angle = 2 * std::numbers::pi * rng.uniform();
    const double direction = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const double omega = direction * cls.speed * scale / std::max(radius, scale);
    for (std::size_t f = 0; f < frames.size(); ++f) {
      const double a = angle + omega * static_cast<double>(f);
      frames[f][b] = {cx + radius * std::cos(a), cy + radius * std::sin(a)};
    }
  }
  return frames;
}

void render(NativeFrames& out, const std::vector<std::vector<Blob>>& blobs, const SynthParams& p, Rng& rng) {
  const std::int64_t s = p.frame_size;
  const double radius = p.blob_radius * static_cast<double>(s) / 64.0;
  const double reach = 4 * radius;
  std::vector<double> canvas(static_cast<std::size_t>(s * s));
  for (std::int64_t f = 0; f < p.frames; ++f) {
    std::fill(canvas.begin(), canvas.end(), 0.0);
    for (const auto& blob : blobs[static_cast<std::size_t>(f)]) {
      const auto y0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(blob.y - reach)));
      const auto y1 = std::min<std::int64_t>(s - 1, static_cast<std::int64_t>(std::ceil(blob.y + reach)));
      const auto x0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(blob.x - reach)));
      const auto x1 = std::min<std::int64_t>(s - 1, static_cast<std::int64_t>(std::ceil(blob.x + reach)));
      for (std::int64_t y = y0; y <= y1; ++y) {
        for (std::int64_t x = x0; x <= x1; ++x) {
          const double dx = static_cast<double>(x) + 0.5 - blob.x, dy = static_cast<double>(y) + 0.5 - blob.y;
          canvas[static_cast<std::size_t>(y * s + x)] += p.blob_amplitude * std::exp(-(dx * dx + dy * dy) / (2 * radius * radius));
        }
      }
    }
    for (std::int64_t c = 0; c < 3; ++c) {
      for (std::int64_t i = 0; i < s * s; ++i) {
        const double v = kBackground[static_cast<std::size_t>(c)] + kFishColour[static_cast<std::size_t>(c)] * canvas[static_cast<std::size_t>(i)] +
                         p.pixel_noise * rng.normal();
        out.pixels[static_cast<std::size_t>((f * 3 + c) * s * s + i)] =
            static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
      }
    }
  }
}

/// Fraction of the background's power inside the measurement band; exact because
/// the background spectrum has deterministic magnitudes.
double background_band_fraction(const SynthParams& p) {
  const auto n = sample_count(p);
  double band = 0, total = 0;
  for (std::int64_t k = 1; k <= n / 2; ++k) {
    const double f = static_cast<double>(k) * p.sample_rate / static_cast<double>(n);
    if (f < kPinkLowCut) continue;
    const double w = (k == n / 2 ? 1.0 : 2.0) / f;
    total += w;
    if (f >= p.band_low - kBandMargin && f <= p.band_high + kBandMargin) band += w;
  }
  return band / total;
}

/// Piecewise-linear coordinate of `value` along increasing `refs` (one per class), clamped to [0, 3].
double coordinate(double value, const std::array<double, 4>& refs) {
  if (value <= refs[0]) return 0.0;
  for (std::size_t i = 0; i + 1 < refs.size(); ++i) {
    if (value <= refs[i + 1]) return static_cast<double>(i) + (value - refs[i]) / (refs[i + 1] - refs[i]);
  }
  return 3.0;
}

}  // namespace

void SynthParams::validate() const {
  for (std::size_t c = 0; c + 1 < classes.size(); ++c) {
    if (!(classes[c].burst_rate < classes[c + 1].burst_rate)) throw ConfigError("burst rates must increase with intensity");
    const double a = classes[c].dispersion <= 0 ? INFINITY : classes[c].dispersion;
    if (!(classes[c + 1].dispersion > 0 && classes[c + 1].dispersion < a)) {
      throw ConfigError("dispersion must decrease with intensity");
    }
  }
  for (const auto& c : classes) {
    if (c.blobs < 1 || c.burst_rate < 0 || c.speed < 0) throw ConfigError("invalid class profile");
  }
  if (frames < 1 || frame_size < 8) throw ConfigError("synthetic clips need at least one frame of 8x8 pixels");
  if (!(duration > 0) || !(sample_rate > 0) || burst_length(*this) < 2 || burst_length(*this) > sample_count(*this)) {
    throw ConfigError("invalid synthetic audio timing");
  }
  if (!(band_low > 0 && band_low < band_high && band_high < sample_rate / 2)) throw ConfigError("invalid burst band");
}

ClipRecord generate_clip(int label, const SynthParams& params, Rng& rng) {
  params.validate();
  const ClassProfile& cls = params.classes.at(static_cast<std::size_t>(label));
  ClipRecord rec;
  rec.label = label;
  rec.audio.sample_rate = params.sample_rate;
  rec.audio.samples = pink_noise(params, rng);
  const std::int64_t bursts = cls.burst_rate > 0 ? rng.poisson(cls.burst_rate * params.duration) : 0;
  const std::int64_t span = sample_count(params) - burst_length(params);
  for (std::int64_t b = 0; b < bursts; ++b) {
    add_burst(rec.audio.samples, static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(span + 1))), params, rng);
  }
  rec.frames = NativeFrames{params.frames, params.frame_size, params.frame_size,
                            std::vector<std::uint8_t>(static_cast<std::size_t>(params.frames * 3 * params.frame_size * params.frame_size))};
  render(rec.frames, place_blobs(cls, params, rng), params, rng);
  rec.synthetic = SynthTruth{bursts, cls.blobs, cls.dispersion, cls.speed};
  return rec;
}

ClipRecord synth_clip(const SynthParams& params, std::uint64_t index, int label) {
  Rng rng = Rng::stream(params.seed, index);
  ClipRecord rec = generate_clip(label, params, rng);
  rec.clip_id = "synth-" + std::to_string(index);
  return rec;
}

OracleFeatures measure_clip(const ClipRecord& clip, const SynthParams& params) {
  OracleFeatures out;
  const auto& x = clip.audio.samples;
  const auto n = x.size();
  if (n != static_cast<std::size_t>(sample_count(params))) throw InputError("clip length does not match the generator");
  std::vector<std::complex<double>> spectrum(n / 2 + 1);
  detail::rfft(x, spectrum);
  double band = 0;
  for (std::size_t k = 1; k < spectrum.size(); ++k) {
    const double f = static_cast<double>(k) * params.sample_rate / static_cast<double>(n);
    if (f < params.band_low - kBandMargin || f > params.band_high + kBandMargin) continue;
    band += (k == n / 2 ? 1.0 : 2.0) * std::norm(spectrum[k]) / static_cast<double>(n);
  }
  const double background = background_band_fraction(params) * static_cast<double>(n) * params.background_rms *
                            params.background_rms;
  const double per_burst = static_cast<double>(burst_length(params)) * params.burst_rms * params.burst_rms;
  out.burst_rate = std::max(0.0, (band - background) / per_burst) / params.duration;

  const std::int64_t s = clip.frames.height;
  const double scale = static_cast<double>(s) / 64.0;
  double mass = 0, mx = 0, my = 0, mxx = 0;
  std::vector<double> weight(static_cast<std::size_t>(s * s));
  for (std::int64_t i = 0; i < s * s; ++i) {
    double lum = 0, base = 0;
    for (std::int64_t c = 0; c < 3; ++c) {
      lum += clip.frames.pixels[static_cast<std::size_t>(c * s * s + i)] / 255.0;
      base += kBackground[static_cast<std::size_t>(c)];
    }
    weight[static_cast<std::size_t>(i)] = std::max(0.0, (lum - base) / 3.0 - kForegroundThreshold);
  }
  for (std::int64_t y = 0; y < s; ++y) {
    for (std::int64_t xi = 0; xi < s; ++xi) {
      const double w = weight[static_cast<std::size_t>(y * s + xi)];
      mass += w;
      mx += w * static_cast<double>(xi);
      my += w * static_cast<double>(y);
      mxx += w * (static_cast<double>(xi) * xi + static_cast<double>(y) * y);
    }
  }
  if (mass > 0) {
    mx /= mass;
    my /= mass;
    out.dispersion = std::sqrt(std::max(0.0, mxx / mass - mx * mx - my * my)) / scale;
  }
  return out;
}

double reference_dispersion(int label, const SynthParams& params) {
  const ClassProfile& cls = params.classes.at(static_cast<std::size_t>(label));
  // Thresholded Gaussian blob: intensity-weighted second moment of what remains above the cut.
  const double blob = 2 * params.blob_radius * params.blob_radius * 0.6;
  if (cls.dispersion <= 0) {
    // Uniform placement in a 64 px square, measured about the sample centroid.
    const double n = static_cast<double>(cls.blobs);
    return std::sqrt(2 * 64.0 * 64.0 / 12.0 * (n - 1) / n + blob);
  }
  // Second moment of a Rayleigh law truncated at kRadiusClamp scales.
  const double c2 = kRadiusClamp * kRadiusClamp / 2;
  const double truncated = 2 * (1 - (1 + c2) * std::exp(-c2)) / (1 - std::exp(-c2));
  return std::sqrt(cls.dispersion * cls.dispersion * truncated + blob);
}

int oracle_from_features(const OracleFeatures& features, const SynthParams& params) {
  std::array<double, 4> rates{}, log_spread{};
  for (int c = 0; c < 4; ++c) {
    rates[static_cast<std::size_t>(c)] = params.classes[static_cast<std::size_t>(c)].burst_rate;
    // Negated so that the reference sequence increases with intensity.
    log_spread[static_cast<std::size_t>(c)] = -std::log(reference_dispersion(c, params));
  }
  const double audio = coordinate(features.burst_rate, rates);
  const double video = coordinate(-std::log(std::max(features.dispersion, 1e-9)), log_spread);
  const double index = 0.5 * (audio + video);
  return static_cast<int>(std::clamp(std::ceil(index - 0.5), 0.0, 3.0));
}

int oracle_label(const ClipRecord& clip, const SynthParams& params) {
  if (!clip.synthetic) throw UnsupportedError("the labelling oracle only applies to synthetic clips");
  return oracle_from_features(measure_clip(clip, params), params);
}

UFFIA_NAMESPACE_END
