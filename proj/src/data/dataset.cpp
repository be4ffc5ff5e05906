#include "uffia/data/dataset.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "uffia/numerics/container.hpp"

UFFIA_NAMESPACE_BEGIN

SyntheticSource::SyntheticSource(SynthParams params, std::size_t train, std::size_t val, std::size_t test)
    : params_(std::move(params)), train_(train), val_(val), test_(test) {
  params_.validate();
}

ClipRecord SyntheticSource::load(std::size_t index) const {
  if (index >= size()) throw IndexError("synthetic clip index out of range");
  ClipRecord rec = synth_clip(params_, index, static_cast<int>(index % kClassNames.size()));
  rec.split = index < train_ ? Split::kTrain : index < train_ + val_ ? Split::kVal : Split::kTest;
  return rec;
}

ManifestSource::ManifestSource(std::vector<ClipRecord> records, std::int64_t frame_size)
    : records_(std::move(records)), frame_size_(frame_size) {}

ClipRecord ManifestSource::load(std::size_t index) const {
  ClipRecord rec = records_.at(index);
  load_media(rec, frame_size_);
  return rec;
}

std::vector<std::size_t> Dataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    if (clips[i].split == split) out.push_back(i);
  }
  return out;
}

MelFeature Dataset::noisy_mel(std::size_t index, const NoiseSpec& spec, std::uint64_t seed) const {
  if (!source) throw UnsupportedError("dataset has no clip source to rebuild noisy audio from");
  if (std::isinf(spec.snr_db) && spec.snr_db > 0) return clips.at(index).mel;
  Rng rng = Rng::stream(seed, index);
  return stft_log_mel(mix_at_snr(source->load(index).audio, spec, rng), mel_config);
}

Dataset prepare_dataset(std::shared_ptr<const ClipSource> source, const MelConfig& mel, int threads) {
  Dataset data;
  data.source = source;
  data.mel_config = mel;
  data.clips.resize(source->size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < data.clips.size(); i = next++) {
      ClipRecord rec = source->load(i);
      PreparedClip& clip = data.clips[i];
      clip.clip_id = rec.clip_id;
      clip.label = rec.label;
      clip.split = rec.split;
      clip.mel = stft_log_mel(rec.audio, mel);
      clip.frames = std::move(rec.frames);
    }
  };
  const int n = std::max(1, threads);
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return data;
}

void save_feature_cache(const std::filesystem::path& path, const Dataset& dataset) {
  Container c("uffia-features");
  nlohmann::json clips = nlohmann::json::array();
  for (std::size_t i = 0; i < dataset.clips.size(); ++i) {
    const auto& clip = dataset.clips[i];
    clips.push_back({{"id", clip.clip_id}, {"label", clip.label}, {"split", to_string(clip.split)}});
    c.add_real("mel." + std::to_string(i), {clip.mel.frames, clip.mel.bins}, clip.mel.values);
    c.add_u8("frames." + std::to_string(i), {clip.frames.count, 3, clip.frames.height, clip.frames.width},
             clip.frames.pixels);
  }
  c.meta()["clips"] = clips;
  const auto& m = dataset.mel_config;
  c.meta()["mel"] = {{"n_fft", m.n_fft}, {"hop", m.hop}, {"mel_bins", m.mel_bins}, {"sample_rate", m.sample_rate},
                     {"frame_rate", m.frame_rate}, {"log_floor", m.log_floor}};
  c.save(path);
}

Dataset load_feature_cache(const std::filesystem::path& path, std::shared_ptr<const ClipSource> source) {
  const Container c = Container::load(path);
  if (c.tag() != "uffia-features") throw ParseError(path.string() + " is not a feature cache");
  Dataset data;
  data.source = std::move(source);
  try {
    const auto& m = c.meta().at("mel");
    data.mel_config = MelConfig{m.at("n_fft"), m.at("hop"), m.at("mel_bins"), m.at("sample_rate"), m.at("frame_rate"),
                                m.at("log_floor")};
    const auto& clips = c.meta().at("clips");
    for (std::size_t i = 0; i < clips.size(); ++i) {
      PreparedClip clip;
      clip.clip_id = clips[i].at("id").get<std::string>();
      clip.label = clips[i].at("label").get<int>();
      clip.split = parse_split(clips[i].at("split").get<std::string>());
      const auto& mel_entry = c.entry("mel." + std::to_string(i));
      clip.mel.frames = mel_entry.shape.at(0);
      clip.mel.bins = mel_entry.shape.at(1);
      clip.mel.values = c.real_values("mel." + std::to_string(i));
      const auto& frames_entry = c.entry("frames." + std::to_string(i));
      clip.frames = NativeFrames{frames_entry.shape.at(0), frames_entry.shape.at(2), frames_entry.shape.at(3),
                                 c.u8_values("frames." + std::to_string(i))};
      data.clips.push_back(std::move(clip));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": malformed feature cache (" + e.what() + ")");
  }
  if (data.source && data.source->size() != data.clips.size()) {
    throw ConfigError("feature cache and clip source disagree on the clip count");
  }
  return data;
}

UFFIA_NAMESPACE_END
