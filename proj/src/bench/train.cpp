#include "uffia/bench/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <thread>

#include "parallel.hpp"
#include "uffia/bench/flops.hpp"
#include "uffia/distill/kd.hpp"
#include "uffia/dsp/augment.hpp"
#include "uffia/numerics/adam.hpp"
#include "uffia/numerics/container.hpp"

UFFIA_NAMESPACE_BEGIN

using nlohmann::json;

namespace {

constexpr const char* kCheckpointTag = "checkpoint";

bool is_teacher(ModelKind kind) { return kind == ModelKind::kAudioTeacher || kind == ModelKind::kVideoTeacher; }

MelConfig mel_config_for(const RunConfig& config) {
  MelConfig mel;
  mel.mel_bins = static_cast<int>(config.arch.mel_bins);
  return mel;
}

std::pair<double, double> audio_stats(const Dataset& data, std::span<const std::size_t> indices) {
  double sum = 0, sq = 0;
  std::size_t n = 0;
  for (auto i : indices) {
    for (Real v : data.clips[i].mel.values) {
      sum += v;
      sq += static_cast<double>(v) * v;
    }
    n += data.clips[i].mel.values.size();
  }
  if (n == 0) return {0.0, 1.0};
  const double mean = sum / static_cast<double>(n);
  const double var = std::max(sq / static_cast<double>(n) - mean * mean, 0.0);
  return {mean, var > 0 ? std::sqrt(var) : 1.0};
}

// Frozen teacher outputs for every training clip, computed once on clean full inputs.
struct TeacherTargets {
  std::vector<Tensor> audio;
  std::vector<Tensor> video;
};

std::vector<Tensor> teacher_logits(const std::string& path, ModelKind expected, const Dataset& data,
                                   std::span<const std::size_t> indices) {
  std::vector<Tensor> out(data.clips.size());
  if (path.empty()) return out;
  const Checkpoint teacher = load_checkpoint(path);
  if (teacher.config.model != expected) {
    throw ConfigError("kd teacher " + path + " is a " + to_string(teacher.config.model) + ", expected " +
                      to_string(expected));
  }
  const Mode mode = teacher_mode(expected);
  NoGradGuard no_grad;
  for (auto i : indices) {
    const PreparedClip& clip = data.clips[i];
    const FrameStack frames = all_frames(clip.frames);
    const Tensor logits = teacher.model->forward(teacher.model->prepare(&clip.mel, &frames), mode);
    out[i] = Tensor::from_values(logits.shape(), std::vector<Real>(logits.values().begin(), logits.values().end()));
  }
  return out;
}

std::string epoch_line(std::int64_t epoch, double loss, double train_acc, const std::vector<MetricRow>& val) {
  std::string line = "epoch " + std::to_string(epoch) + " loss " + std::to_string(loss) + " train " +
                     std::to_string(train_acc);
  for (const auto& r : val) line += " val[" + r.mode + "] " + std::to_string(r.accuracy);
  return line;
}

}  // namespace

double MetricsLog::test_accuracy(Mode mode) const {
  for (const auto& r : rows) {
    if (r.split == "test" && r.mode == to_string(mode)) return r.accuracy;
  }
  throw InputError("no test accuracy recorded for mode " + to_string(mode));
}

void write_metrics_csv(const std::filesystem::path& path, const MetricsLog& log) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out.precision(17);
  out << "epoch,split,mode,loss,accuracy\n";
  for (const auto& r : log.rows) {
    out << r.epoch << ',' << r.split << ',' << r.mode << ',' << r.loss << ',' << r.accuracy << '\n';
  }
}

Dataset load_dataset(const RunConfig& config, int threads) {
  const MelConfig mel = mel_config_for(config);
  const auto& d = config.data;
  if (d.source == "synthetic") {
    SynthParams params;
    params.frames = d.frames;
    params.frame_size = d.frame_size;
    params.seed = d.seed;
    return prepare_dataset(std::make_shared<SyntheticSource>(params, d.train, d.val, d.test), mel, threads);
  }
  std::shared_ptr<const ClipSource> source;
  if (!d.manifest.empty()) {
    auto records = load_manifest(d.manifest);
    const bool unsplit = std::any_of(records.begin(), records.end(),
                                     [](const ClipRecord& r) { return r.split == Split::kUnassigned; });
    if (unsplit) make_splits(records, d.splits, d.seed);
    source = std::make_shared<ManifestSource>(std::move(records), d.frame_size);
  }
  if (d.source == "cache") return load_feature_cache(d.cache, source);
  return prepare_dataset(source, mel, threads);
}

std::unique_ptr<Classifier> build_model(const RunConfig& config) {
  Rng rng = Rng::stream(config.seed, 0);
  if (is_teacher(config.model)) return make_teacher(config.model, config.teacher, config.arch, rng);
  return make_classifier(config.model, config.arch, config.dropout, config.simpf_k, rng);
}

void save_checkpoint(const std::filesystem::path& path, const RunConfig& config, const Classifier& model,
                     std::int64_t best_epoch) {
  Container c(kCheckpointTag);
  c.meta()["kind"] = to_string(model.kind());
  c.meta()["config"] = to_json(config);
  c.meta()["best_epoch"] = best_epoch;
  save_params(c, model.params());
  c.save(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const Container c = Container::load(path);
  if (c.tag() != kCheckpointTag) throw ParseError(path.string() + ": container holds '" + c.tag() + "', not a checkpoint");
  if (!c.meta().contains("config")) throw ParseError(path.string() + ": checkpoint has no config");
  Checkpoint ck;
  ck.config = run_config_from_json(c.meta().at("config"));
  ck.model = build_model(ck.config);
  load_params(c, ck.model->params());
  ck.best_epoch = c.meta().value("best_epoch", std::int64_t{0});
  return ck;
}

namespace {

/// Noise-mixed log-mels per training clip (empty when augmentation is off or
/// the model never sees audio). SNRs and noise seeds are drawn up front, so
/// the copies do not depend on the thread count.
std::vector<std::vector<MelFeature>> noisy_copies(const RunConfig& config, const Classifier& model, const Dataset& data,
                                                  std::span<const std::size_t> train_idx) {
  std::vector<std::vector<MelFeature>> out(data.clips.size());
  const auto modes = model.eval_modes();
  const bool hears = std::any_of(modes.begin(), modes.end(), [](Mode m) { return m != Mode::kVideo; });
  const auto& aug = config.augment;
  if (aug.noise_prob <= 0 || !hears) return out;
  if (!data.source) {
    throw ConfigError("config field 'augment.noise_prob': noise augmentation needs the clip audio; "
                      "set data.manifest or augment.noise_prob=0");
  }
  struct Job {
    std::size_t clip;
    NoiseSpec spec;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  Rng draw = Rng::stream(config.seed, 2);
  for (std::size_t idx : train_idx) {
    for (std::int64_t c = 0; c < aug.noise_copies; ++c) {
      const double snr = draw.uniform(aug.noise_snr_min, aug.noise_snr_max);
      jobs.push_back({idx, NoiseSpec{config.corruption.noise, snr}, draw.below(std::uint64_t{1} << 62)});
    }
  }
  std::vector<MelFeature> mels(jobs.size());
  parallel_for(jobs.size(), config.threads,
               [&](std::size_t j) { mels[j] = data.noisy_mel(jobs[j].clip, jobs[j].spec, jobs[j].seed); });
  for (std::size_t j = 0; j < jobs.size(); ++j) out[jobs[j].clip].push_back(std::move(mels[j]));
  return out;
}

}  // namespace

TrainResult train(const RunConfig& config, const Dataset& data, const TrainOptions& options) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto train_idx = data.indices(Split::kTrain);
  const auto val_idx = data.indices(Split::kVal);
  const auto test_idx = data.indices(Split::kTest);
  if (train_idx.empty()) throw InputError("no training clips");
  if (config.kd.enabled && (is_teacher(config.model) || config.model == ModelKind::kFusionSelf ||
                            config.model == ModelKind::kFusionCross || config.model == ModelKind::kFusionBottleneck)) {
    throw ConfigError("config field 'kd.enabled': distillation needs a uffia, audio-baseline or video-baseline student");
  }

  TrainResult result;
  result.model = build_model(config);
  Classifier& model = *result.model;
  const auto [mean, sd] = audio_stats(data, train_idx);
  model.set_audio_stats(mean, sd);

  const auto noisy = noisy_copies(config, model, data, train_idx);

  TeacherTargets targets;
  if (config.kd.enabled) {
    targets.audio = teacher_logits(config.kd.audio_teacher, ModelKind::kAudioTeacher, data, train_idx);
    targets.video = teacher_logits(config.kd.video_teacher, ModelKind::kVideoTeacher, data, train_idx);
  }

  const ParamList params = model.params();
  Adam adam(params, AdamConfig{config.optim.lr, config.optim.beta1, config.optim.beta2, config.optim.epsilon});
  const InputPolicy policy = model.input_policy();
  const std::vector<Mode> eval_modes = model.eval_modes();
  const ClassifierPredictor predictor(model);
  Rng rng = Rng::stream(config.seed, 1);
  const auto batch = static_cast<std::size_t>(config.optim.batch);
  const Real weight = Real(1) / static_cast<Real>(batch);

  MetricsLog& log = result.log;
  Container best(kCheckpointTag);
  save_params(best, params);
  std::vector<std::size_t> order(train_idx.begin(), train_idx.end());

  for (std::int64_t epoch = 1; epoch <= config.optim.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double loss_sum = 0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < order.size(); b += batch) {
      const std::size_t end = std::min(order.size(), b + batch);
      for (std::size_t s = b; s < end; ++s) {
        const PreparedClip& clip = data.clips[order[s]];
        const Mode mode = model.training_mode(rng);
        MelFeature mel;
        FrameStack frames;
        if (mode != Mode::kVideo) {
          const auto& copies = noisy[order[s]];
          const MelFeature& source = !copies.empty() && rng.uniform() < config.augment.noise_prob
                                         ? copies[rng.below(copies.size())]
                                         : clip.mel;
          mel = config.augment.spec_augment ? spec_augment(source, config.augment.spec, rng) : source;
          if (policy.simpf_k < 1.0) mel = simpf_pool(mel, policy.simpf_k);
        }
        if (mode != Mode::kAudio) {
          frames = policy.frames == 0 || policy.frames >= clip.frames.count
                       ? all_frames(clip.frames)
                       : sample_frames(clip.frames, policy.frames, rng);
          if (config.augment.color_jitter > 0) frames = color_jitter(frames, config.augment.color_jitter, rng);
        }
        const ClipInput input =
            model.prepare(mode != Mode::kVideo ? &mel : nullptr, mode != Mode::kAudio ? &frames : nullptr);
        const Tensor logits = model.forward(input, mode);
        const int label[1] = {clip.label};
        const Tensor* target = nullptr;
        if (mode == Mode::kAudio && !targets.audio.empty() && targets.audio[order[s]].defined()) {
          target = &targets.audio[order[s]];
        } else if (mode == Mode::kVideo && !targets.video.empty() && targets.video[order[s]].defined()) {
          target = &targets.video[order[s]];
        }
        const Tensor loss =
            scale(target ? kd_loss(logits, *target, label, config.kd.loss) : cross_entropy(logits, label), weight);
        const double value = static_cast<double>(loss.item());
        if (!std::isfinite(value)) {
          throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch) + ", clip " +
                             clip.clip_id);
        }
        loss_sum += value * static_cast<double>(batch);
        correct += predict(logits) == clip.label ? 1 : 0;
        backward(loss);
      }
      adam.step();
    }
    const double train_loss = loss_sum / static_cast<double>(order.size());
    const double train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
    log.rows.push_back({epoch, "train", "mixed", train_loss, train_acc});
    log.epochs_run = epoch;

    std::vector<MetricRow> val_rows;
    double score = train_acc;
    if (!val_idx.empty()) {
      score = 0;
      for (Mode mode : eval_modes) {
        const EvalResult r = evaluate(predictor, data, val_idx, mode, {}, config.threads);
        val_rows.push_back({epoch, "val", to_string(mode), r.loss, r.accuracy()});
        score += r.accuracy();
      }
      score /= static_cast<double>(eval_modes.size());
      log.rows.insert(log.rows.end(), val_rows.begin(), val_rows.end());
    }
    if (options.progress) *options.progress << epoch_line(epoch, train_loss, train_acc, val_rows) << std::endl;
    if (score > log.best_score) {
      log.best_score = score;
      log.best_epoch = epoch;
      best = Container(kCheckpointTag);
      save_params(best, params);
    } else if (config.optim.patience > 0 && epoch - log.best_epoch >= config.optim.patience) {
      break;
    }
  }

  load_params(best, params);
  if (!test_idx.empty()) {
    for (Mode mode : eval_modes) {
      const EvalResult r = evaluate(predictor, data, test_idx, mode, {}, config.threads);
      log.rows.push_back({log.best_epoch, "test", to_string(mode), r.loss, r.accuracy()});
    }
  }
  log.params = count_params(params);
  const std::int64_t mel_frames = data.clips.front().mel.frames;
  const std::int64_t native = data.clips.front().frames.count;
  log.flops = count_flops(model, policy_input(model, mel_frames, native), eval_modes.front()).total;
  log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    write_metrics_csv(options.out_dir / "metrics.csv", log);
    save_checkpoint(options.out_dir / "checkpoint.bin", config, model, log.best_epoch);
    std::ofstream(options.out_dir / "run.json") << run_record(config, log).dump(2) << '\n';
  }
  return result;
}

json run_record(const RunConfig& config, const MetricsLog& log) {
  json test = json::object();
  for (const auto& r : log.rows) {
    if (r.split == "test") test[r.mode] = r.accuracy;
  }
  return json{
      {"config", to_json(config)},
      {"environment",
       {{"compiler", __VERSION__},
        {"cplusplus", __cplusplus},
        {"real_bits", 8 * sizeof(Real)},
        {"threads", config.threads},
        {"hardware_threads", std::thread::hardware_concurrency()}}},
      {"result",
       {{"best_epoch", log.best_epoch},
        {"best_val_score", log.best_score},
        {"epochs_run", log.epochs_run},
        {"test_accuracy", test},
        {"params", log.params},
        {"flops", log.flops},
        {"flop_convention", kFlopConvention},
        {"wall_seconds", log.wall_seconds}}},
  };
}

UFFIA_NAMESPACE_END
