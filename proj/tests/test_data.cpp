#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "uffia/data/dataset.hpp"
#include "uffia/dsp/wav.hpp"

using namespace uffia;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("uffia_test_data_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

/// Audio-focused parameters: a single small frame keeps generation cheap.
SynthParams light_params() {
  SynthParams p;
  p.frames = 1;
  return p;
}

}  // namespace

TEST_CASE("class and split names") {
  CHECK(parse_class("Medium") == 2);
  CHECK(parse_class("strong") == 3);
  CHECK(std::string(class_name(0)) == "None");
  CHECK_THROWS_AS(parse_class("Ravenous"), ParseError);
  CHECK(parse_split("validation") == Split::kVal);
  CHECK(parse_split("") == Split::kUnassigned);
  CHECK_THROWS_AS(parse_split("holdout"), ParseError);
}

TEST_CASE("synthetic generator") {
  const SynthParams params;
  SUBCASE("class None has no bursts and uniform placement") {
    for (std::uint64_t i = 0; i < 5; ++i) {
      const auto clip = synth_clip(params, i, 0);
      REQUIRE(clip.synthetic);
      CHECK(clip.synthetic->bursts == 0);
      CHECK(clip.synthetic->dispersion <= 0);
    }
  }
  SUBCASE("shapes") {
    const auto clip = synth_clip(params, 3, 2);
    CHECK(clip.audio.samples.size() == 128000);
    CHECK(clip.audio.sample_rate == 64000);
    CHECK(clip.frames.count == 16);
    CHECK(clip.frames.height == 64);
    CHECK(clip.frames.pixels.size() == 16u * 3 * 64 * 64);
  }
  SUBCASE("bit-identical under a fixed seed") {
    const auto a = synth_clip(params, 11, 3);
    const auto b = synth_clip(params, 11, 3);
    CHECK(a.audio.samples == b.audio.samples);
    CHECK(a.frames.pixels == b.frames.pixels);
    const auto c = synth_clip(params, 12, 3);
    CHECK(a.audio.samples != c.audio.samples);
  }
  SUBCASE("Strong burst count matches the Poisson mean") {
    const auto p = light_params();
    double total = 0;
    for (std::uint64_t i = 0; i < 1000; ++i) total += static_cast<double>(synth_clip(p, i, 3).synthetic->bursts);
    const double expected = p.classes[3].burst_rate * p.duration;
    CHECK(std::abs(total / 1000 - expected) < 0.05 * expected);
  }
  SUBCASE("parameter validation") {
    SynthParams bad = params;
    bad.classes[2].burst_rate = 3.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = params;
    bad.classes[3].dispersion = 7.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = params;
    bad.frames = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }
}

TEST_CASE("labelling oracle") {
  const SynthParams params;
  SUBCASE("each class recovered from a fresh clip") {
    for (int label = 0; label < 4; ++label) CHECK(oracle_label(synth_clip(params, 100 + label, label), params) == label);
  }
  SUBCASE("agreement over 1000 clips") {
    const auto p = light_params();
    int agree = 0;
    for (std::uint64_t i = 0; i < 1000; ++i) {
      const int label = static_cast<int>(i % 4);
      agree += oracle_label(synth_clip(p, 5000 + i, label), p) == label;
    }
    CHECK(agree >= 990);
  }
  SUBCASE("reference features classify to their own class") {
    for (int label = 0; label < 4; ++label) {
      OracleFeatures f{params.classes[static_cast<std::size_t>(label)].burst_rate, reference_dispersion(label, params)};
      CHECK(oracle_from_features(f, params) == label);
    }
  }
  SUBCASE("midway features go to the lower class") {
    for (int lower = 0; lower < 3; ++lower) {
      const auto& a = params.classes[static_cast<std::size_t>(lower)];
      const auto& b = params.classes[static_cast<std::size_t>(lower + 1)];
      OracleFeatures f{0.5 * (a.burst_rate + b.burst_rate),
                       std::sqrt(reference_dispersion(lower, params) * reference_dispersion(lower + 1, params))};
      CHECK(oracle_from_features(f, params) == lower);
    }
    SynthParams midway = params;
    midway.classes[1] = ClassProfile{8.0, 12, std::sqrt(11.0 * 6.0), 1.1};
    midway.classes[2] = ClassProfile{8.5, 12, std::sqrt(11.0 * 6.0) - 0.1, 1.1};
    const auto clip = synth_clip(midway, 1, 1);
    const int first = oracle_label(clip, midway);
    CHECK(first == oracle_label(clip, midway));
    CHECK((first == 1 || first == 2));
  }
  SUBCASE("real clips are unsupported") {
    ClipRecord real;
    real.audio.samples.assign(128000, 0.0);
    CHECK_THROWS_AS(oracle_label(real, params), UnsupportedError);
  }
}

TEST_CASE("manifest parsing") {
  const fs::path dir = scratch("manifest");
  write_text(dir / "a.wav", "");
  fs::create_directories(dir / "frames_a");
  SUBCASE("header only") {
    write_text(dir / "m.csv", "clip_id,audio_path,video_path,label,split\n");
    CHECK(load_manifest(dir / "m.csv").empty());
  }
  SUBCASE("a Medium row") {
    write_text(dir / "m.csv", "clip_id,audio_path,video_path,label,split\nc1,a.wav,frames_a,Medium,train\n");
    const auto recs = load_manifest(dir / "m.csv");
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].label == 2);
    CHECK(recs[0].split == Split::kTrain);
    CHECK(recs[0].audio_path == dir / "a.wav");
  }
  SUBCASE("column order is free and quoted cells work") {
    write_text(dir / "m.csv", "label,split,clip_id,video_path,audio_path\nweak,,\"c,1\",frames_a,a.wav\n");
    const auto recs = load_manifest(dir / "m.csv");
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].clip_id == "c,1");
    CHECK(recs[0].split == Split::kUnassigned);
  }
  SUBCASE("errors name the line") {
    auto message = [&](const std::string& text) {
      write_text(dir / "m.csv", text);
      try {
        load_manifest(dir / "m.csv");
      } catch (const ParseError& e) {
        return std::string(e.what());
      }
      return std::string("no error");
    };
    CHECK(message("clip_id,audio_path,label,split\n").find(":1: missing column 'video_path'") != std::string::npos);
    const std::string header = "clip_id,audio_path,video_path,label,split\n";
    CHECK(message(header + "c1,a.wav,frames_a,None,train\nc2,a.wav,frames_a,Ravenous,train\n").find(":3:") !=
          std::string::npos);
    CHECK(message(header + "c1,missing.wav,frames_a,None,train\n").find(":2: audio path 'missing.wav'") !=
          std::string::npos);
    CHECK(message(header + "c1,a.wav,frames_a,None\n").find(":2: expected 5 cells") != std::string::npos);
    CHECK_THROWS_AS(load_manifest(dir / "absent.csv"), ParseError);
  }
  SUBCASE("split counts reported verbatim") {
    std::string text = "clip_id,audio_path,video_path,label,split\n";
    const std::array<std::pair<const char*, int>, 3> splits{{{"train", 21000}, {"val", 2800}, {"test", 2800}}};
    int id = 0;
    for (const auto& [name, count] : splits) {
      for (int i = 0; i < count; ++i) text += "c" + std::to_string(id++) + ",a.wav,frames_a," + kClassNames[static_cast<std::size_t>(i % 4)] + "," + name + "\n";
    }
    write_text(dir / "m.csv", text);
    const auto counts = split_counts(load_manifest(dir / "m.csv"));
    CHECK(counts[0] == 21000);
    CHECK(counts[1] == 2800);
    CHECK(counts[2] == 2800);
    CHECK(counts[3] == 0);
  }
  SUBCASE("write and reload") {
    std::vector<ClipRecord> recs(2);
    for (int i = 0; i < 2; ++i) {
      recs[static_cast<std::size_t>(i)].clip_id = "clip" + std::to_string(i);
      recs[static_cast<std::size_t>(i)].label = 3 - i;
      recs[static_cast<std::size_t>(i)].split = Split::kTest;
      recs[static_cast<std::size_t>(i)].audio_path = dir / "a.wav";
      recs[static_cast<std::size_t>(i)].video_path = dir / "frames_a";
    }
    write_manifest(dir / "out" / "m.csv", recs);
    const auto back = load_manifest(dir / "out" / "m.csv");
    REQUIRE(back.size() == 2);
    CHECK(back[1].label == 2);
    CHECK(fs::equivalent(back[0].audio_path, dir / "a.wav"));
  }
  fs::remove_all(dir);
}

TEST_CASE("stratified splits") {
  std::vector<ClipRecord> recs(1000);
  for (std::size_t i = 0; i < recs.size(); ++i) recs[i].label = static_cast<int>(i % 4);
  SUBCASE("all train") {
    make_splits(recs, {1, 0, 0}, 1);
    CHECK(split_counts(recs)[0] == 1000);
  }
  SUBCASE("70/10/20 balanced") {
    make_splits(recs, {0.7, 0.1, 0.2}, 3);
    const auto counts = split_counts(recs);
    CHECK(std::abs(static_cast<int>(counts[0]) - 700) <= 4);
    CHECK(std::abs(static_cast<int>(counts[1]) - 100) <= 4);
    CHECK(std::abs(static_cast<int>(counts[2]) - 200) <= 4);
    for (int c = 0; c < 4; ++c) {
      std::array<int, 3> per{0, 0, 0};
      for (const auto& r : recs) {
        if (r.label == c) ++per[static_cast<std::size_t>(r.split) - 1];
      }
      CHECK(std::abs(per[0] - 175) <= 1);
      CHECK(std::abs(per[1] - 25) <= 1);
      CHECK(std::abs(per[2] - 50) <= 1);
    }
  }
  SUBCASE("deterministic and seed-dependent") {
    auto a = recs, b = recs, c = recs;
    make_splits(a, {0.7, 0.1, 0.2}, 9);
    make_splits(b, {0.7, 0.1, 0.2}, 9);
    make_splits(c, {0.7, 0.1, 0.2}, 10);
    bool same = true, differs = false;
    for (std::size_t i = 0; i < recs.size(); ++i) {
      same = same && a[i].split == b[i].split;
      differs = differs || a[i].split != c[i].split;
    }
    CHECK(same);
    CHECK(differs);
  }
  CHECK_THROWS_AS(make_splits(recs, {0.7, 0.1, 0.1}, 1), ConfigError);
}

TEST_CASE("class folders and media loading") {
  const fs::path dir = scratch("folders");
  SynthParams p;
  p.frames = 3;
  for (int label : {1, 3}) {
    const auto clip = synth_clip(p, static_cast<std::uint64_t>(label), label);
    const fs::path cls = dir / class_name(label);
    fs::create_directories(cls / "clip0");
    write_wav(cls / "clip0.wav", clip.audio);
    for (std::int64_t f = 0; f < clip.frames.count; ++f) {
      write_png_frame(cls / "clip0" / ("frame_" + std::to_string(f) + ".png"), clip.frames, f);
    }
  }
  auto recs = scan_class_folders(dir);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].label == 1);
  CHECK(recs[1].clip_id == "Strong/clip0");
  load_media(recs[1], 32);
  CHECK(recs[1].frames.count == 3);
  CHECK(recs[1].frames.height == 32);
  CHECK(recs[1].audio.samples.size() == 128000);
  write_manifest(dir / "manifest.csv", recs);
  CHECK(load_manifest(dir / "manifest.csv").size() == 2);
  fs::remove_all(dir);
}

TEST_CASE("prepared dataset and feature cache") {
  SynthParams p;
  p.frames = 4;
  auto source = std::make_shared<SyntheticSource>(p, 8, 4, 4);
  const Dataset data = prepare_dataset(source, MelConfig{}, 2);
  REQUIRE(data.clips.size() == 16);
  CHECK(data.indices(Split::kTrain).size() == 8);
  CHECK(data.indices(Split::kVal).size() == 4);
  CHECK(data.indices(Split::kTest).size() == 4);
  CHECK(data.clips[5].label == 1);
  CHECK(data.clips[5].mel.frames == 128);
  CHECK(data.clips[5].mel.bins == 128);

  const Dataset serial = prepare_dataset(source, MelConfig{}, 1);
  CHECK(serial.clips[9].mel.values == data.clips[9].mel.values);

  const fs::path dir = scratch("cache");
  save_feature_cache(dir / "features.bin", data);
  const Dataset back = load_feature_cache(dir / "features.bin", source);
  REQUIRE(back.clips.size() == 16);
  CHECK(back.clips[13].mel.values == data.clips[13].mel.values);
  CHECK(back.clips[13].frames.pixels == data.clips[13].frames.pixels);
  CHECK(back.clips[13].split == Split::kTest);

  CHECK(data.noisy_mel(3, NoiseSpec{}, 1).values == data.clips[3].mel.values);
  const auto noisy = data.noisy_mel(3, NoiseSpec{NoiseKind::kBubble, 0.0}, 1);
  CHECK(noisy.values != data.clips[3].mel.values);
  CHECK(noisy.values == data.noisy_mel(3, NoiseSpec{NoiseKind::kBubble, 0.0}, 1).values);
  CHECK_THROWS_AS(load_feature_cache(dir / "features.bin").noisy_mel(0, NoiseSpec{NoiseKind::kWhite, 0.0}, 1),
                  UnsupportedError);
  fs::remove_all(dir);
}
