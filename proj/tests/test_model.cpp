#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <limits>
#include <set>

#include "support/gradcheck.hpp"
#include "uffia/model/baselines.hpp"
#include "uffia/model/uffia.hpp"
#include "uffia/numerics/adam.hpp"

using namespace uffia;
using testing::gradcheck;
using testing::random_tensor;

namespace {

ClipInput clip_of(Tensor mel, std::vector<Tensor> patches) {
  ClipInput input;
  input.mel = std::move(mel);
  input.patches = std::move(patches);
  return input;
}

ArchConfig tiny_arch() {
  ArchConfig arch;
  arch.dim = 16;
  arch.heads = 2;
  arch.layers = 1;
  arch.ffn = 32;
  arch.conv_channels = {2, 3};
  arch.audio_tokens = 2;
  arch.patch = 2;
  arch.frames = 3;
  arch.frame_size = 4;
  arch.mel_bins = 8;
  arch.bottleneck = 2;
  return arch;
}

ClipInput random_input(const ArchConfig& arch, std::int64_t frames, Rng& rng, std::int64_t mel_frames = 16) {
  ClipInput in;
  in.mel = random_tensor({mel_frames, arch.mel_bins}, rng, 1.0, false);
  const std::int64_t n = (arch.frame_size / arch.patch) * (arch.frame_size / arch.patch);
  for (std::int64_t f = 0; f < frames; ++f) in.patches.push_back(random_tensor({n, 3 * arch.patch * arch.patch}, rng, 0.5, false));
  return in;
}

std::vector<Real> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

TEST_CASE("mode and kind names round-trip") {
  for (auto m : {Mode::kAudio, Mode::kVideo, Mode::kAudioVisual}) CHECK(parse_mode(to_string(m)) == m);
  CHECK(parse_mode("audio-visual") == Mode::kAudioVisual);
  CHECK_THROWS_AS(parse_mode("AVX"), ConfigError);
  for (auto k : {ModelKind::kUffia, ModelKind::kFusionSelf, ModelKind::kFusionCross, ModelKind::kFusionBottleneck,
                 ModelKind::kAudioBaseline, ModelKind::kVideoBaseline}) {
    CHECK(parse_model_kind(to_string(k)) == k);
  }
  CHECK_THROWS_AS(parse_model_kind("mbt"), ConfigError);
}

TEST_CASE("audio encoder") {
  Rng rng(1);
  SUBCASE("constant mel gives identical tokens") {
    auto enc = AudioEncoder::create({16, 32, 64, 128}, 8, 32, rng);
    MelFeature mel;
    mel.frames = 128;
    mel.bins = 128;
    mel.values.assign(128 * 128, Real(-3.25));
    const Tensor tokens = enc(mel);
    REQUIRE(tokens.shape() == Shape{8, 32});
    for (std::int64_t t = 1; t < 8; ++t) {
      for (std::int64_t c = 0; c < 32; ++c) CHECK(tokens.at({t, c}) == doctest::Approx(tokens.at({0, c})).epsilon(1e-12));
    }
  }
  SUBCASE("compressed features keep the token count") {
    auto enc = AudioEncoder::create({16, 32, 64, 128}, 8, 32, rng);
    for (std::int64_t frames : {128, 64, 32, 13}) {
      CHECK(enc(random_tensor({frames, 128}, rng, 1.0, false)).shape() == Shape{8, 32});
    }
    CHECK_THROWS_AS(enc(random_tensor({5, 128}, rng, 1.0, false)), ShapeError);
  }
  SUBCASE("model dimension 768") {
    MetaModeGuard meta;
    auto enc = AudioEncoder::create({16, 32, 64, 128}, 8, 768, rng);
    CHECK(enc(Tensor::meta({128, 128})).shape() == Shape{8, 768});
  }
  SUBCASE("max plus mean on a 2x2 map") {
    const Tensor x = Tensor::from_values({2, 2}, {1, 2, 3, 0});
    CHECK(vals(window_max_mean(x, 1)) == std::vector<Real>{5, 3});
    CHECK(vals(window_max_mean(x, 2)) == std::vector<Real>{2, 4, 6, 0});
  }
  SUBCASE("input statistics standardise and are not trainable") {
    auto enc = AudioEncoder::create({4}, 2, 8, rng);
    const Tensor mel = random_tensor({16, 8}, rng, 1.0, false);
    const auto before = vals(enc(mel));
    enc.set_input_stats(2.0, 4.0);
    std::vector<Real> shifted(mel.values().begin(), mel.values().end());
    for (auto& v : shifted) v = v * 4 + 2;
    const auto after = vals(enc(Tensor::from_values(mel.shape(), shifted)));
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(after[i] == doctest::Approx(before[i]).epsilon(1e-10));
    ParamList list;
    enc.collect(list, "");
    CHECK_FALSE(list.find("input_stats").requires_grad());
    CHECK_THROWS_AS(enc.set_input_stats(0.0, 0.0), ConfigError);
  }
}

TEST_CASE("video embedding") {
  Rng rng(2);
  SUBCASE("four frames of 197 x 768") {
    MetaModeGuard meta;
    auto emb = VideoEmbedding::create(224, 16, 768, rng);
    auto seqs = emb.meta(4, Tensor::meta({1, 768}));
    REQUIRE(seqs.size() == 4);
    for (const auto& s : seqs) CHECK(s.shape() == Shape{197, 768});
  }
  SUBCASE("deterministic under seed and rejects empty stacks") {
    auto make = [] {
      Rng r(5);
      auto emb = VideoEmbedding::create(8, 4, 6, r);
      FrameStack stack{8, 8, std::vector<Real>(2 * 3 * 64, Real(0.25)), {0, 1}};
      return vals(emb(stack, Tensor::zeros({1, 6}))[1]);
    };
    CHECK(make() == make());
    auto emb = VideoEmbedding::create(8, 4, 6, rng);
    CHECK_THROWS_AS(emb(FrameStack{8, 8, {}, {}}, Tensor::zeros({1, 6})), InputError);
    CHECK_THROWS_AS(VideoEmbedding::create(10, 4, 6, rng), ConfigError);
  }
}

TEST_CASE("modality dropout") {
  SUBCASE("configuration validation") {
    CHECK_NOTHROW(DropoutConfig{0.5, 0.25, 0.25}.validate());
    CHECK_THROWS_AS((DropoutConfig{0.5, 0.25, 0.3}.validate()), ConfigError);
    CHECK_THROWS_AS((DropoutConfig{1.2, -0.1, -0.1}.validate()), ConfigError);
    Rng rng(0);
    CHECK_THROWS_AS(draw_branch(DropoutConfig{0.6, 0.6, 0.0}, rng), ConfigError);
  }
  SUBCASE("branch frequencies converge") {
    for (auto cfg : {DropoutConfig{0.7, 0.15, 0.15}, DropoutConfig{0.5, 0.25, 0.25}, DropoutConfig{0.4, 0.2, 0.4},
                     DropoutConfig{0.6, 0.2, 0.2}, DropoutConfig{0.8, 0.1, 0.1}}) {
      Rng rng(123);
      constexpr int kDraws = 100000;
      int counts[3] = {0, 0, 0};
      for (int i = 0; i < kDraws; ++i) ++counts[static_cast<int>(draw_branch(cfg, rng))];
      CHECK(std::abs(counts[static_cast<int>(Mode::kAudioVisual)] / double(kDraws) - cfg.p_av) < 0.01);
      CHECK(std::abs(counts[static_cast<int>(Mode::kAudio)] / double(kDraws) - cfg.p_a) < 0.01);
      CHECK(std::abs(counts[static_cast<int>(Mode::kVideo)] / double(kDraws) - cfg.p_v) < 0.01);
    }
  }
  SUBCASE("masked blocks are zeros of the exact shape") {
    Rng rng(9);
    const Tensor audio = random_tensor({8, 16}, rng, 1.0, false);
    const std::vector<Tensor> video{random_tensor({5, 16}, rng, 1.0, false), random_tensor({5, 16}, rng, 1.0, false)};
    for (int i = 0; i < 20; ++i) {
      auto both = apply_modality_dropout(audio, video, DropoutConfig{1, 0, 0}, rng);
      CHECK(both.mode == Mode::kAudioVisual);
      CHECK(vals(both.audio) == vals(audio));
      CHECK(vals(both.video[1]) == vals(video[1]));
    }
    auto a = apply_modality_dropout(audio, video, DropoutConfig{0, 1, 0}, rng);
    CHECK(a.mode == Mode::kAudio);
    CHECK(vals(a.audio) == vals(audio));
    REQUIRE(a.video.size() == 2);
    for (const auto& v : a.video) {
      CHECK(v.shape() == Shape{5, 16});
      for (Real x : v.values()) CHECK(x == 0);
    }
    auto v = apply_modality_dropout(audio, video, DropoutConfig{0, 0, 1}, rng);
    CHECK(v.mode == Mode::kVideo);
    CHECK(v.audio.shape() == Shape{8, 16});
    for (Real x : v.audio.values()) CHECK(x == 0);
    CHECK(vals(v.video[0]) == vals(video[0]));
  }
  CHECK(mode_for_inputs(true, true) == Mode::kAudioVisual);
  CHECK(mode_for_inputs(true, false) == Mode::kAudio);
  CHECK(mode_for_inputs(false, true) == Mode::kVideo);
  CHECK_THROWS_AS(mode_for_inputs(false, false), InputError);
}

TEST_CASE("predict") {
  CHECK(predict(std::vector<Real>{0, 0, 0, 1}) == 3);
  CHECK(predict(std::vector<Real>{0, 0, 0, 0}) == 0);
  CHECK(predict(std::vector<Real>{1, 3, 3, 2}) == 1);
  CHECK_THROWS_AS(predict(std::vector<Real>{0, std::numeric_limits<Real>::quiet_NaN(), 0, 0}), NumericError);
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Real> logits(4);
    for (auto& x : logits) x = static_cast<Real>(rng.below(3));
    const int label = predict(logits);
    const Real shift = static_cast<Real>(rng.normal(0, 100));
    for (auto& x : logits) x += shift;
    CHECK(predict(logits) == label);
  }
}

TEST_CASE("U-FFIA forward") {
  Rng rng(11);
  const auto arch = tiny_arch();
  UffiaModel model(ModelKind::kUffia, arch, DropoutConfig{0.5, 0.25, 0.25}, 0.5, rng);
  const ClipInput in = random_input(arch, 3, rng);

  SUBCASE("logits and pooled shapes in every mode") {
    for (auto mode : {Mode::kAudio, Mode::kVideo, Mode::kAudioVisual}) {
      CHECK(model.forward(in, mode).shape() == Shape{1, 4});
    }
    FusedInput fused{model.encode_audio(in.mel), model.encode_video(in.patches, Mode::kAudioVisual), Mode::kAudioVisual};
    auto out = model.run(fused);
    CHECK(out.pooled.shape() == Shape{1, arch.dim});
    CHECK(out.mode == Mode::kAudioVisual);
  }
  SUBCASE("mode isolation") {
    ClipInput other = random_input(arch, 3, rng);
    const ClipInput audio_changed = clip_of(other.mel, in.patches);
    const ClipInput video_changed = clip_of(in.mel, other.patches);
    CHECK(vals(model.forward(in, Mode::kVideo)) == vals(model.forward(audio_changed, Mode::kVideo)));
    CHECK(vals(model.forward(in, Mode::kAudio)) == vals(model.forward(video_changed, Mode::kAudio)));
    CHECK(vals(model.forward(in, Mode::kAudioVisual)) != vals(model.forward(audio_changed, Mode::kAudioVisual)));
    CHECK(vals(model.forward(in, Mode::kAudioVisual)) != vals(model.forward(video_changed, Mode::kAudioVisual)));
    CHECK_NOTHROW(model.forward(clip_of(in.mel, {}), Mode::kAudio));
    CHECK_NOTHROW(model.forward(clip_of(Tensor{}, in.patches), Mode::kVideo));
  }
  SUBCASE("mode/input mismatch") {
    CHECK_THROWS_AS(model.forward(clip_of(in.mel, {}), Mode::kAudioVisual), ContractError);
    CHECK_THROWS_AS(model.forward(clip_of(Tensor{}, in.patches), Mode::kAudio), ContractError);
  }
  SUBCASE("frame order does not matter") {
    const ClipInput permuted = clip_of(in.mel, {in.patches[2], in.patches[0], in.patches[1]});
    for (auto mode : {Mode::kVideo, Mode::kAudioVisual}) {
      const auto a = vals(model.forward(in, mode));
      const auto b = vals(model.forward(permuted, mode));
      for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-12));
    }
  }
  SUBCASE("distinct class tokens and heads per mode") {
    CHECK(vals(model.class_token(Mode::kAudio)) != vals(model.class_token(Mode::kVideo)));
    CHECK(vals(model.class_token(Mode::kAudio)) != vals(model.class_token(Mode::kAudioVisual)));
    auto params = model.params();
    std::set<std::string> names;
    for (const auto& p : params.entries()) CHECK(names.insert(p.name).second);
    for (const char* n : {"cls.audio", "cls.video", "cls.av", "head.audio.output.weight", "head.video.output.weight",
                          "head.av.output.weight"}) {
      CHECK_NOTHROW(params.find(n));
    }
  }
  SUBCASE("input policy and evaluation modes") {
    CHECK(model.input_policy().simpf_k == 0.5);
    CHECK(model.input_policy().frames == 3);
    CHECK(model.eval_modes().size() == 3);
  }
}

TEST_CASE("end-to-end finite-difference check on a tiny instance") {
  Rng rng(21);
  const auto arch = tiny_arch();
  const std::vector<int> label{2};
  SUBCASE("U-FFIA, every mode") {
    UffiaModel model(ModelKind::kUffia, arch, DropoutConfig{}, 1.0, rng);
    const ClipInput in = random_input(arch, 2, rng);
    auto params = model.params();
    std::vector<Tensor> trainable;
    for (const auto& p : params.entries()) {
      if (p.tensor.requires_grad()) trainable.push_back(p.tensor);
    }
    for (auto mode : {Mode::kAudio, Mode::kVideo, Mode::kAudioVisual}) {
      CAPTURE(to_string(mode));
      CHECK(gradcheck([&] { return cross_entropy(model.forward(in, mode), label); }, trainable) < 1e-4);
    }
  }
  SUBCASE("fusion baselines") {
    for (auto kind : {ModelKind::kFusionSelf, ModelKind::kFusionCross, ModelKind::kFusionBottleneck}) {
      CAPTURE(to_string(kind));
      auto model = make_classifier(kind, arch, DropoutConfig{}, 1.0, rng);
      const ClipInput in = random_input(arch, 2, rng);
      std::vector<Tensor> trainable;
      const auto params = model->params();
      for (const auto& p : params.entries()) {
        if (p.tensor.requires_grad()) trainable.push_back(p.tensor);
      }
      CHECK(gradcheck([&] { return cross_entropy(model->forward(in, Mode::kAudioVisual), label); }, trainable) < 1e-4);
    }
  }
}

TEST_CASE("classifier factory") {
  Rng rng(31);
  const auto arch = tiny_arch();
  const ClipInput in = random_input(arch, 2, rng);
  for (auto kind : {ModelKind::kUffia, ModelKind::kFusionSelf, ModelKind::kFusionCross, ModelKind::kFusionBottleneck,
                    ModelKind::kAudioBaseline, ModelKind::kVideoBaseline}) {
    CAPTURE(to_string(kind));
    auto model = make_classifier(kind, arch, DropoutConfig{0.5, 0.25, 0.25}, 0.5, rng);
    CHECK(model->kind() == kind);
    for (auto mode : model->eval_modes()) CHECK(model->forward(in, mode).shape() == Shape{1, 4});
    std::set<std::string> names;
    const auto params = model->params();
    for (const auto& p : params.entries()) CHECK(names.insert(p.name).second);
    Rng draw(3);
    for (int i = 0; i < 50; ++i) {
      const Mode m = model->training_mode(draw);
      const auto modes = model->eval_modes();
      if (kind != ModelKind::kUffia) CHECK(std::find(modes.begin(), modes.end(), m) != modes.end());
    }
    if (kind != ModelKind::kUffia) {
      CHECK(model->input_policy().simpf_k == 1.0);
      CHECK(model->input_policy().frames == 0);
    }
  }
  auto cross = make_classifier(ModelKind::kFusionCross, arch, DropoutConfig{}, 1.0, rng);
  CHECK_THROWS_AS(cross->forward(in, Mode::kAudio), ContractError);
}

TEST_CASE("shape-only forward for cost accounting") {
  Rng rng(41);
  MetaModeGuard meta;
  ArchConfig arch;
  auto model = make_classifier(ModelKind::kUffia, arch, DropoutConfig{}, 0.5, rng);
  const ClipInput in = make_meta_input(64, 128, 4, 64, 16);
  for (auto mode : {Mode::kAudio, Mode::kVideo, Mode::kAudioVisual}) {
    const Tensor logits = model->forward(in, mode);
    CHECK(logits.is_meta());
    CHECK(logits.shape() == Shape{1, 4});
  }
}

TEST_CASE("input statistics are saved but never updated by training") {
  Rng rng(51);
  const auto arch = tiny_arch();
  UffiaModel model(ModelKind::kUffia, arch, DropoutConfig{}, 1.0, rng);
  model.set_audio_stats(-4.0, 2.0);
  Adam adam(model.params(), AdamConfig{});
  const ClipInput in = random_input(arch, 2, rng);
  const std::vector<int> label{1};
  backward(cross_entropy(model.forward(in, Mode::kAudioVisual), label));
  adam.step();
  const auto stats = model.params().find("audio.input_stats").values();
  CHECK(stats[0] == -4.0);
  CHECK(stats[1] == 2.0);
}
