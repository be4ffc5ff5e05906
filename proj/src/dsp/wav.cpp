#include "uffia/dsp/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

UFFIA_NAMESPACE_BEGIN

namespace {

std::uint32_t read_u32(const std::uint8_t* p) { return p[0] | (p[1] << 8) | (p[2] << 16) | (std::uint32_t(p[3]) << 24); }
std::uint16_t read_u16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

void put_u32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
  out.write(b, 4);
}
void put_u16(std::ofstream& out, std::uint16_t v) {
  const char b[2] = {char(v & 0xff), char((v >> 8) & 0xff)};
  out.write(b, 2);
}

}  // namespace

Waveform resample_linear(const Waveform& wave, double target_rate) {
  if (!(target_rate > 0) || !(wave.sample_rate > 0)) throw InputError("resample: sample rates must be positive");
  if (wave.sample_rate == target_rate || wave.samples.empty()) return Waveform{wave.samples, target_rate};
  const double ratio = wave.sample_rate / target_rate;
  const auto count = static_cast<std::size_t>(std::llround(static_cast<double>(wave.samples.size()) / ratio));
  Waveform out{std::vector<double>(count), target_rate};
  const std::size_t last = wave.samples.size() - 1;
  for (std::size_t i = 0; i < count; ++i) {
    const double pos = static_cast<double>(i) * ratio;
    const auto left = std::min(static_cast<std::size_t>(pos), last);
    const auto right = std::min(left + 1, last);
    const double frac = pos - static_cast<double>(left);
    out.samples[i] = wave.samples[left] * (1 - frac) + wave.samples[right] * frac;
  }
  return out;
}

Waveform read_wav(const std::filesystem::path& path, double target_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw ParseError(path.string() + ": not a RIFF/WAVE file");
  }
  int channels = 0, bits = 0, format = 0;
  double rate = 0;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t size = read_u32(bytes.data() + pos + 4);
    const std::uint8_t* body = bytes.data() + pos + 8;
    if (pos + 8 + size > bytes.size()) throw ParseError(path.string() + ": truncated chunk");
    if (std::memcmp(bytes.data() + pos, "fmt ", 4) == 0) {
      format = read_u16(body);
      channels = read_u16(body + 2);
      rate = read_u32(body + 4);
      bits = read_u16(body + 14);
    } else if (std::memcmp(bytes.data() + pos, "data", 4) == 0) {
      data = body;
      data_size = size;
    }
    pos += 8 + size + (size & 1);
  }
  if (format != 1 && format != 0xFFFE) throw UnsupportedError(path.string() + ": only PCM WAV is supported");
  if (bits != 16 && bits != 32) throw UnsupportedError(path.string() + ": only 16- and 32-bit PCM are supported");
  if (channels < 1 || rate <= 0 || data == nullptr) throw ParseError(path.string() + ": missing fmt or data chunk");

  const std::size_t width = static_cast<std::size_t>(bits / 8);
  const std::size_t frames = data_size / (width * static_cast<std::size_t>(channels));
  Waveform wave{std::vector<double>(frames), rate};
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0;
    for (int c = 0; c < channels; ++c) {
      const std::uint8_t* p = data + (f * channels + c) * width;
      if (bits == 16) acc += static_cast<std::int16_t>(read_u16(p)) / 32768.0;
      else acc += static_cast<std::int32_t>(read_u32(p)) / 2147483648.0;
    }
    wave.samples[f] = acc / channels;
  }
  return resample_linear(wave, target_rate);
}

void write_wav(const std::filesystem::path& path, const Waveform& wave) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  const auto data_size = static_cast<std::uint32_t>(wave.samples.size() * 2);
  const auto rate = static_cast<std::uint32_t>(std::lround(wave.sample_rate));
  out.write("RIFF", 4);
  put_u32(out, 36 + data_size);
  out.write("WAVEfmt ", 8);
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, rate);
  put_u32(out, rate * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.write("data", 4);
  put_u32(out, data_size);
  for (double v : wave.samples) {
    const auto s = static_cast<std::int16_t>(std::lround(std::clamp(v, -1.0, 1.0) * 32767.0));
    put_u16(out, static_cast<std::uint16_t>(s));
  }
}

UFFIA_NAMESPACE_END
