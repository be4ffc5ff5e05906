#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "uffia/bench/config.hpp"
#include "uffia/bench/evaluate.hpp"
#include "uffia/bench/flops.hpp"
#include "uffia/bench/train.hpp"
#include "uffia/fusion/attention.hpp"

using namespace uffia;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("uffia_test_bench_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Small enough that a few epochs over a dozen clips take seconds.
RunConfig tiny_config() {
  RunConfig c;
  c.arch.dim = 16;
  c.arch.heads = 2;
  c.arch.layers = 1;
  c.arch.ffn = 16;
  c.arch.conv_channels = {4, 8};
  c.arch.audio_tokens = 4;
  c.arch.patch = 8;
  c.arch.frames = 2;
  c.arch.frame_size = 16;
  c.teacher.audio_channels = {4};
  c.teacher.video_channels = {4};
  c.teacher.hidden = 8;
  c.teacher.video_input_pool = 1;
  c.data.frames = 4;
  c.data.frame_size = 16;
  c.data.train = 8;
  c.data.val = 4;
  c.data.test = 4;
  c.optim.batch = 4;
  c.optim.epochs = 1;
  return c;
}

const Dataset& tiny_data() {
  static const Dataset data = load_dataset(tiny_config());
  return data;
}

/// Hand-built balanced set without media: `n` clips, labels cycling 0..3.
Dataset stub_data(std::size_t n) {
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    PreparedClip c;
    c.clip_id = "stub-" + std::to_string(i);
    c.label = static_cast<int>(i % 4);
    c.split = Split::kTest;
    c.mel = MelFeature{2, 2, {0, 0, 0, 0}, 1.0};
    c.frames = NativeFrames{1, 1, 1, {0, 0, 0}};
    d.clips.push_back(std::move(c));
  }
  return d;
}

std::vector<std::size_t> all_indices(const Dataset& d) {
  std::vector<std::size_t> idx(d.clips.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return idx;
}

std::array<double, kNumClasses> one_hot(int label) {
  std::array<double, kNumClasses> s{};
  s[static_cast<std::size_t>(label)] = 1.0;
  return s;
}

class EchoPredictor : public Predictor {
 public:
  explicit EchoPredictor(const Dataset& d) : d_(d) {}
  std::array<double, kNumClasses> scores(const EvalItem& item) const override {
    return one_hot(d_.clips[item.index].label);
  }

 private:
  const Dataset& d_;
};

class FixedPredictor : public Predictor {
 public:
  std::array<double, kNumClasses> scores(const EvalItem&) const override { return one_hot(2); }
};

class RandomPredictor : public Predictor {
 public:
  std::array<double, kNumClasses> scores(const EvalItem& item) const override {
    Rng rng = Rng::stream(99, item.index);
    return one_hot(static_cast<int>(rng.below(kNumClasses)));
  }
};

/// Predicts from the first audio value, so it would notice any change to the audio it is given.
class AudioSumPredictor : public Predictor {
 public:
  std::array<double, kNumClasses> scores(const EvalItem& item) const override {
    return one_hot(item.mel->values[0] > 0 ? 1 : 0);
  }
};

}  // namespace

TEST_CASE("run config: JSON round trip, strict fields and overrides") {
  const RunConfig desk = profile_defaults("desk");
  CHECK(to_json(run_config_from_json(to_json(desk))) == to_json(desk));
  CHECK(desk.optim.batch == 20);
  CHECK(desk.optim.epochs == 50);
  CHECK(desk.arch.dim == 128);

  const RunConfig paper = profile_defaults("paper");
  CHECK(paper.arch.dim == 768);
  CHECK(paper.arch.layers == 6);
  CHECK(paper.arch.heads == 8);
  CHECK(paper.arch.ffn == 1024);
  CHECK(paper.optim.lr == doctest::Approx(1e-4));
  CHECK(paper.optim.epochs == 200);
  CHECK(paper.optim.batch == 20);
  CHECK(paper.data.frame_size == 224);
  CHECK(paper.data.frames == 50);
  CHECK(to_json(run_config_from_json(to_json(paper))) == to_json(paper));
  CHECK(run_config_from_json(nlohmann::json{{"profile", "paper"}}).arch.dim == 768);
  CHECK_THROWS_AS(profile_defaults("laptop"), ConfigError);

  auto message = [](const nlohmann::json& doc) {
    try {
      run_config_from_json(doc);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message({{"optim", {{"lrr", 0.1}}}}).find("optim.lrr") != std::string::npos);
  CHECK(message({{"optim", {{"lr", "fast"}}}}).find("optim.lr") != std::string::npos);
  CHECK(message({{"optim", {{"batch", 0}}}}).find("optim.batch") != std::string::npos);
  CHECK(message({{"optim", {{"epochs", 0}}}}).find("optim.epochs") != std::string::npos);
  CHECK(message({{"model", "resnet"}}).find("model") != std::string::npos);
  CHECK(message({{"kd", {{"tau", 0}}}}).find("kd") != std::string::npos);
  CHECK(message({{"corruption", {{"variance", 0.3}}}}).find("corruption.variance") != std::string::npos);
  CHECK(message({{"dropout", {{"p_av", 0.5}, {"p_a", 0.1}, {"p_v", 0.1}}}}).find("dropout") != std::string::npos);

  nlohmann::json doc = nlohmann::json::object();
  apply_override(doc, "optim.lr=0.01");
  apply_override(doc, "epochs=3");
  apply_override(doc, "model=fusion-cross");
  apply_override(doc, "kd.audio_teacher=teachers/a.bin");
  apply_override(doc, "corruption.snrs=[0,5]");
  const RunConfig c = run_config_from_json(doc);
  CHECK(c.optim.lr == doctest::Approx(0.01));
  CHECK(c.optim.epochs == 3);
  CHECK(c.model == ModelKind::kFusionCross);
  CHECK(c.kd.audio_teacher == "teachers/a.bin");
  CHECK(c.corruption.snrs == std::vector<double>{0, 5});
  CHECK_THROWS_AS(apply_override(doc, "frames=2"), ConfigError);  // arch.frames or data.frames
  CHECK_THROWS_AS(apply_override(doc, "nonsense=2"), ConfigError);
  CHECK_THROWS_AS(apply_override(doc, "optim.lr"), ConfigError);
  CHECK_THROWS_AS(apply_override(doc, "optim..lr=1"), ConfigError);
}

TEST_CASE("run config: precedence and run records") {
  const fs::path dir = scratch("precedence");
  std::ofstream(dir / "run.json") << R"({"optim": {"lr": 0.5, "epochs": 7}, "seed": 3})";
  const RunConfig from_file = load_run_config(dir / "run.json", {});
  CHECK(from_file.optim.lr == doctest::Approx(0.5));
  CHECK(from_file.optim.epochs == 7);
  CHECK(from_file.optim.batch == 20);  // profile default
  const RunConfig overridden = load_run_config(dir / "run.json", {"optim.lr=0.25"});
  CHECK(overridden.optim.lr == doctest::Approx(0.25));
  CHECK(overridden.optim.epochs == 7);
  CHECK(overridden.seed == 3);

  MetricsLog log;
  std::ofstream(dir / "record.json") << run_record(overridden, log).dump(2);
  CHECK(to_json(load_run_config(dir / "record.json", {})) == to_json(overridden));

  std::ofstream(dir / "bad.json") << "{not json";
  CHECK_THROWS_AS(load_run_config(dir / "bad.json", {}), ConfigError);
  CHECK_THROWS_AS(load_run_config(dir / "missing.json", {}), ConfigError);
}

TEST_CASE("count_params counts trainable scalars only") {
  Rng rng(1);
  ParamList linear;
  Linear::create(3, 2, rng).collect(linear, "fc");
  CHECK(count_params(linear) == 8);

  const std::int64_t d = 768;
  ParamList attention;
  AttentionParams::create(d, 8, rng).collect(attention, "attn");
  CHECK(count_params(attention) == 4 * d * d + 4 * d);
  std::int64_t enumerated = 0;
  for (const auto& e : attention.entries()) enumerated += e.tensor.numel();
  CHECK(enumerated == 4 * d * d + 4 * d);

  // A frozen teacher added to the list contributes nothing.
  RunConfig config = tiny_config();
  config.model = ModelKind::kAudioTeacher;
  const auto teacher = build_model(config);
  const ParamList teacher_params = teacher->params();
  freeze(teacher_params);
  ParamList combined = linear;
  combined.append(teacher_params, "teacher.");
  CHECK(count_params(combined) == 8);
}

TEST_CASE("FLOP formulas") {
  const std::int64_t m = 24, n = 10;
  {
    OpTraceScope trace;
    matmul(Tensor::zeros({1, m}), Tensor::zeros({m, n}));
    CHECK(count_flops(trace.records()).total == 2 * m * n);
  }
  const auto attn = [](std::int64_t tokens) { return op_flops(OpRecord{"attention", {8, tokens, tokens, 96}}); };
  CHECK(attn(2 * 50) == 4 * attn(50));
  CHECK(op_flops(OpRecord{"softmax", {10}}) == 50);
  CHECK(op_flops(OpRecord{"layer_norm", {10}}) == 50);
  CHECK(op_flops(OpRecord{"reshape", {10}}) == 0);
  CHECK(op_flops(OpRecord{"conv", {4, 27, 100}}) == 2 * 4 * 27 * 100);

  const std::vector<OpRecord> trace{{"add", {3}}, {"fft", {8}}, {"warp", {2}}};
  try {
    count_flops(trace);
    FAIL("expected UnsupportedError");
  } catch (const UnsupportedError& e) {
    const std::string what = e.what();
    CHECK(what.find("fft") != std::string::npos);
    CHECK(what.find("warp") != std::string::npos);
  }
}

TEST_CASE("count_flops is monotone in every input extent") {
  RunConfig config = tiny_config();
  const auto model = build_model(config);
  const auto flops = [&](std::int64_t mel_frames, std::int64_t frames, Mode mode) {
    ClipInput in = make_meta_input(mel_frames, config.arch.mel_bins, frames, config.arch.frame_size, config.arch.patch);
    return count_flops(*model, in, mode).total;
  };
  for (Mode mode : {Mode::kAudio, Mode::kVideo, Mode::kAudioVisual}) {
    std::int64_t prev = 0;
    for (std::int64_t t : {16, 32, 64, 128}) {
      const auto f = flops(t, 2, mode);
      CHECK(f >= prev);
      prev = f;
    }
    prev = 0;
    for (std::int64_t frames : {1, 2, 3, 4}) {
      const auto f = flops(64, frames, mode);
      CHECK(f >= prev);
      prev = f;
    }
  }
  for (const char* kind : {"uffia", "fusion-self", "fusion-cross", "fusion-bottleneck"}) {
    std::int64_t prev = 0;
    for (std::int64_t size : {16, 32, 48}) {
      RunConfig c = tiny_config();
      c.model = parse_model_kind(kind);
      c.arch.frame_size = size;
      const auto m = build_model(c);
      const auto f = count_flops(*m, make_meta_input(64, c.arch.mel_bins, 2, size, c.arch.patch), m->eval_modes()[0]).total;
      CHECK(f > prev);
      prev = f;
    }
  }
}

TEST_CASE("U-FFIA student is cheaper than the all-frames self-attention baseline at canonical shapes") {
  RunConfig student = profile_defaults("paper");
  RunConfig baseline = student;
  baseline.model = ModelKind::kFusionSelf;
  MetaModeGuard meta;  // parameters are shapes only
  const auto s = build_model(student);
  const auto b = build_model(baseline);
  const auto fs = count_flops(*s, policy_input(*s, 128, 50), Mode::kAudioVisual).total;
  const auto fb = count_flops(*b, policy_input(*b, 128, 50), Mode::kAudioVisual).total;
  MESSAGE("student " << fs << " baseline " << fb);
  CHECK(fs < fb);
}

TEST_CASE("evaluate: stub predictors") {
  const Dataset d = stub_data(1000);
  const auto idx = all_indices(d);
  CHECK(evaluate(EchoPredictor(d), d, idx, Mode::kAudioVisual).accuracy() == 1.0);
  CHECK(evaluate(FixedPredictor(), d, idx, Mode::kAudio).accuracy() == 0.25);
  const double random = evaluate(RandomPredictor(), d, idx, Mode::kVideo).accuracy();
  CHECK(std::abs(random - 0.25) <= 0.03);
  // Same answer on any number of worker threads.
  CHECK(evaluate(RandomPredictor(), d, idx, Mode::kVideo, {}, 3).correct ==
        evaluate(RandomPredictor(), d, idx, Mode::kVideo, {}, 1).correct);
  CHECK_THROWS_AS(evaluate(FixedPredictor(), d, std::vector<std::size_t>{}, Mode::kAudio), InputError);
  CHECK_THROWS_AS(evaluate(FixedPredictor(), d, std::vector<std::size_t>{5000}, Mode::kAudio), InputError);

  // Clean features need no source; noisy ones do.
  Corruption noisy;
  noisy.noise.snr_db = 0;
  CHECK_THROWS_AS(evaluate(FixedPredictor(), d, idx, Mode::kAudio, noisy), UnsupportedError);
}

TEST_CASE("noise sweep: CSV contract and mode isolation") {
  const Dataset& data = tiny_data();
  const auto test = data.indices(Split::kTest);
  const std::vector<double> snrs{-10, -5, 0, 10, 20};
  const fs::path dir = scratch("sweep");

  // Echo stub ignores the audio entirely: constant rows.
  const std::vector<Mode> av{Mode::kAudioVisual};
  const auto echo = noise_sweep(EchoPredictor(data), data, test, av, snrs, {});
  REQUIRE(echo.size() == snrs.size());
  for (const auto& r : echo) CHECK(r.result.accuracy() == 1.0);
  write_sweep_csv(dir / "sweep.csv", echo);
  std::ifstream in(dir / "sweep.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "mode,snr_db,accuracy");
  std::size_t rows = 0;
  while (std::getline(in, line)) rows += line.empty() ? 0 : 1;
  CHECK(rows == snrs.size());

  // The audio really does change with SNR ...
  const MelFeature quiet = data.noisy_mel(test[0], NoiseSpec{NoiseKind::kBubble, 20}, 0);
  const MelFeature loud = data.noisy_mel(test[0], NoiseSpec{NoiseKind::kBubble, -10}, 0);
  CHECK(quiet.values != loud.values);
  CHECK(quiet.values != data.clips[test[0]].mel.values);

  // ... yet a V-mode model's scores do not, clip by clip.
  RunConfig config = tiny_config();
  const auto model = build_model(config);
  const ClassifierPredictor predictor(*model);
  const auto clip = test[1];
  const FrameStack frames = eval_frames(data.clips[clip].frames, model->input_policy().frames);
  const auto clean = predictor.scores(EvalItem{clip, &data.clips[clip].mel, &frames, Mode::kVideo});
  for (double snr : snrs) {
    const MelFeature mel = data.noisy_mel(clip, NoiseSpec{NoiseKind::kBubble, snr}, 1);
    CHECK(predictor.scores(EvalItem{clip, &mel, &frames, Mode::kVideo}) == clean);
  }
  const std::vector<Mode> modes{Mode::kVideo, Mode::kAudio};
  const auto rows_v = noise_sweep(predictor, data, test, modes, snrs, {});
  for (const auto& r : rows_v) {
    if (r.mode == Mode::kVideo) CHECK(r.result.accuracy() == rows_v.front().result.accuracy());
  }
}

TEST_CASE("train: smoke run writes every report") {
  RunConfig config = tiny_config();
  config.data.train = 10;
  const Dataset data = load_dataset(config);
  const fs::path dir = scratch("smoke");
  const TrainResult r = train(config, data, TrainOptions{dir, nullptr});
  CHECK(r.log.epochs_run == 1);
  CHECK(r.log.best_epoch == 1);
  for (Mode mode : {Mode::kAudioVisual, Mode::kAudio, Mode::kVideo}) {
    const double acc = r.log.test_accuracy(mode);
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
  }
  CHECK(r.log.params == count_params(r.model->params()));
  CHECK(r.log.flops > 0);
  CHECK(fs::exists(dir / "metrics.csv"));
  CHECK(fs::exists(dir / "checkpoint.bin"));
  CHECK(fs::exists(dir / "run.json"));
  CHECK(slurp(dir / "metrics.csv").rfind("epoch,split,mode,loss,accuracy\n", 0) == 0);

  const auto record = nlohmann::json::parse(slurp(dir / "run.json"));
  CHECK(record.at("config") == to_json(config));
  CHECK(record.at("result").at("flop_convention") == kFlopConvention);
  CHECK(record.at("environment").contains("compiler"));

  // The checkpoint rebuilds the same model.
  const Checkpoint ck = load_checkpoint(dir / "checkpoint.bin");
  CHECK(to_json(ck.config) == to_json(config));
  const auto& clip = data.clips[data.indices(Split::kTest)[0]];
  const FrameStack frames = eval_frames(clip.frames, config.arch.frames);
  const EvalItem item{0, &clip.mel, &frames, Mode::kAudioVisual};
  CHECK(ClassifierPredictor(*ck.model).scores(item) == ClassifierPredictor(*r.model).scores(item));

  // Epoch indices are monotone, accuracies in range.
  std::int64_t last = 0;
  for (const auto& row : r.log.rows) {
    if (row.split == "test") continue;
    CHECK(row.epoch >= last);
    last = row.epoch;
    CHECK(row.accuracy >= 0.0);
    CHECK(row.accuracy <= 1.0);
  }
}

TEST_CASE("train: identical config and seed give identical checkpoints and logs") {
  RunConfig config = tiny_config();
  config.optim.epochs = 2;
  config.augment.spec_augment = true;
  config.augment.color_jitter = 0.1;
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  train(config, tiny_data(), TrainOptions{a, nullptr});
  train(config, tiny_data(), TrainOptions{b, nullptr});
  CHECK(slurp(a / "checkpoint.bin") == slurp(b / "checkpoint.bin"));
  CHECK(slurp(a / "metrics.csv") == slurp(b / "metrics.csv"));

  config.seed = 2;
  const fs::path c = scratch("det_c");
  train(config, tiny_data(), TrainOptions{c, nullptr});
  CHECK(slurp(a / "checkpoint.bin") != slurp(c / "checkpoint.bin"));
}

TEST_CASE("train: best epoch ties go to the earlier epoch; divergence aborts") {
  RunConfig config = tiny_config();
  config.optim.epochs = 3;
  config.optim.lr = 1e-30;  // weights effectively frozen, so every epoch scores the same
  const TrainResult r = train(config, tiny_data());
  CHECK(r.log.epochs_run == 3);
  CHECK(r.log.best_epoch == 1);

  config.optim.patience = 1;
  CHECK(train(config, tiny_data()).log.epochs_run == 2);

  // An infinite step leaves non-finite weights, so the next forward pass yields a non-finite loss.
  config.optim.patience = 0;
  config.optim.lr = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(train(config, tiny_data()), NumericError);
}

TEST_CASE("train: noise augmentation") {
  RunConfig config = tiny_config();
  const TrainResult noisy = train(config, tiny_data());
  config.augment.noise_prob = 0;
  const TrainResult clean = train(config, tiny_data());
  CHECK(noisy.log.rows.front().loss != clean.log.rows.front().loss);

  Dataset deaf = tiny_data();
  deaf.source = nullptr;
  CHECK_NOTHROW(train(config, deaf));
  config.augment.noise_prob = 0.5;
  CHECK_THROWS_WITH_AS(train(config, deaf), doctest::Contains("augment.noise_prob"), ConfigError);
  config.model = ModelKind::kVideoBaseline;  // never hears audio, so nothing to mix
  CHECK_NOTHROW(train(config, deaf));

  config.augment.noise_snr_min = 30;
  CHECK_THROWS_AS(config.validate(), ConfigError);
}

TEST_CASE("train: teachers and distillation") {
  const fs::path dir = scratch("kd");
  RunConfig teacher = tiny_config();
  teacher.model = ModelKind::kAudioTeacher;
  const TrainResult a = train(teacher, tiny_data(), TrainOptions{dir / "audio", nullptr});
  CHECK(a.model->eval_modes() == std::vector<Mode>{Mode::kAudio});
  teacher.model = ModelKind::kVideoTeacher;
  train(teacher, tiny_data(), TrainOptions{dir / "video", nullptr});

  RunConfig student = tiny_config();
  student.kd.enabled = true;
  student.kd.audio_teacher = (dir / "audio" / "checkpoint.bin").string();
  student.kd.video_teacher = (dir / "video" / "checkpoint.bin").string();
  const TrainResult s = train(student, tiny_data());
  CHECK(s.log.epochs_run == 1);

  // λ = 1 ignores the teacher: the run matches plain training up to gradient summation order.
  student.kd.loss.lambda = 1.0;
  RunConfig plain = student;
  plain.kd.enabled = false;
  const auto with_kd = train(student, tiny_data()).model->params();
  const auto without = train(plain, tiny_data()).model->params();
  for (std::size_t i = 0; i < with_kd.size(); ++i) {
    const auto x = with_kd.entries()[i].tensor.values();
    const auto y = without.entries()[i].tensor.values();
    for (std::size_t j = 0; j < x.size(); ++j) CHECK(x[j] == doctest::Approx(y[j]).epsilon(1e-10));
  }

  RunConfig swapped = student;
  swapped.kd.audio_teacher = student.kd.video_teacher;
  CHECK_THROWS_AS(train(swapped, tiny_data()), ConfigError);
  RunConfig fusion = student;
  fusion.model = ModelKind::kFusionSelf;
  CHECK_THROWS_AS(train(fusion, tiny_data()), ConfigError);
}
