// uffia: command-line entry point for synthesis, preprocessing, training,
// distillation, evaluation, noise sweeps and cost accounting.

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "uffia/bench/config.hpp"
#include "uffia/bench/evaluate.hpp"
#include "uffia/bench/flops.hpp"
#include "uffia/bench/train.hpp"
#include "uffia/dsp/wav.hpp"

namespace fs = std::filesystem;
using namespace uffia;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

std::optional<fs::path> data_root() {
  if (const char* root = std::getenv("UFFIA_DATA_ROOT"); root && *root) return fs::path(root);
  return std::nullopt;
}

// Relative dataset paths are taken from UFFIA_DATA_ROOT when it is set.
std::string under_root(const std::string& path) {
  const auto root = data_root();
  if (path.empty() || !root || fs::path(path).is_absolute()) return path;
  return (*root / path).string();
}

RunConfig resolve(const Common& common, std::vector<std::string> extra = {}) {
  std::vector<std::string> overrides = common.sets;
  overrides.insert(overrides.end(), extra.begin(), extra.end());
  if (common.seed) overrides.push_back("seed=" + std::to_string(*common.seed));
  if (common.threads) overrides.push_back("threads=" + std::to_string(*common.threads));
  std::optional<fs::path> path;
  if (!common.config.empty()) path = common.config;
  RunConfig config = load_run_config(path, overrides);
  config.data.manifest = under_root(config.data.manifest);
  config.data.cache = under_root(config.data.cache);
  return config;
}

fs::path out_dir(const Common& common) {
  if (common.out.empty()) throw ConfigError("--out is required");
  fs::create_directories(common.out);
  return common.out;
}

// Applies --set overrides to a checkpoint's echoed config.
RunConfig checkpoint_config(const RunConfig& stored, const Common& common) {
  nlohmann::json doc = to_json(stored);
  for (const auto& s : common.sets) apply_override(doc, s);
  if (common.seed) apply_override(doc, "seed=" + std::to_string(*common.seed));
  if (common.threads) apply_override(doc, "threads=" + std::to_string(*common.threads));
  RunConfig config = run_config_from_json(doc);
  config.data.manifest = under_root(config.data.manifest);
  config.data.cache = under_root(config.data.cache);
  return config;
}

std::vector<Mode> chosen_modes(const std::vector<std::string>& names, const Classifier& model) {
  if (names.empty()) return model.eval_modes();
  std::vector<Mode> modes;
  for (const auto& n : names) modes.push_back(parse_mode(n));
  return modes;
}

int run_synth(const Common& common, bool packed, bool canonical) {
  std::vector<std::string> extra;
  if (canonical) extra = {"data.frames=50", "data.frame_size=224", "arch.frame_size=224"};
  const RunConfig config = resolve(common, extra);
  const fs::path out = out_dir(common);
  SynthParams params;
  params.frames = config.data.frames;
  params.frame_size = config.data.frame_size;
  params.seed = config.data.seed;
  const SyntheticSource source(params, config.data.train, config.data.val, config.data.test);
  std::vector<ClipRecord> records;
  for (std::size_t i = 0; i < source.size(); ++i) {
    ClipRecord rec = source.load(i);
    const fs::path dir = out / class_name(rec.label);
    fs::create_directories(dir);
    rec.audio_path = dir / (rec.clip_id + ".wav");
    write_wav(rec.audio_path, rec.audio);
    if (packed) {
      rec.video_path = dir / (rec.clip_id + ".frames");
      save_packed_frames(rec.video_path, rec.frames);
    } else {
      rec.video_path = dir / rec.clip_id;
      for (std::int64_t f = 0; f < rec.frames.count; ++f) {
        std::ostringstream name;
        name << "frame_" << std::setw(3) << std::setfill('0') << f << ".png";
        write_png_frame(rec.video_path / name.str(), rec.frames, f);
      }
    }
    records.push_back(std::move(rec));
  }
  write_manifest(out / "manifest.csv", records);
  std::cout << "wrote " << records.size() << " clips and " << (out / "manifest.csv").string() << '\n';
  return 0;
}

int run_manifest(const Common& common, std::string root) {
  const RunConfig config = resolve(common);
  if (root.empty()) {
    const auto env = data_root();
    if (!env) throw ConfigError("no dataset root given and UFFIA_DATA_ROOT is unset");
    root = env->string();
  }
  auto records = scan_class_folders(root);
  make_splits(records, config.data.splits, config.data.seed);
  const fs::path path = out_dir(common) / "manifest.csv";
  write_manifest(path, records);
  const auto counts = split_counts(records);
  std::cout << "wrote " << path.string() << ": " << counts[0] << " train, " << counts[1] << " val, " << counts[2]
            << " test\n";
  return 0;
}

int run_preprocess(const Common& common) {
  const RunConfig config = resolve(common);
  if (config.data.source == "cache") throw ConfigError("config field 'data.source': preprocess needs raw data");
  const Dataset data = load_dataset(config, config.threads);
  const fs::path path = out_dir(common) / "features.bin";
  save_feature_cache(path, data);
  std::cout << "wrote " << path.string() << " (" << data.clips.size() << " clips)\n";
  return 0;
}

int run_train(const Common& common, bool distill) {
  const RunConfig config = resolve(common, distill ? std::vector<std::string>{"kd.enabled=true"} : std::vector<std::string>{});
  if (distill && config.kd.audio_teacher.empty() && config.kd.video_teacher.empty()) {
    throw ConfigError("config fields 'kd.audio_teacher'/'kd.video_teacher': distill needs at least one teacher");
  }
  const fs::path out = out_dir(common);
  const Dataset data = load_dataset(config, config.threads);
  const TrainResult result = train(config, data, TrainOptions{out, &std::cerr});
  std::cout << "best epoch " << result.log.best_epoch << '\n';
  for (const auto& r : result.log.rows) {
    if (r.split == "test") std::cout << "test " << r.mode << " accuracy " << r.accuracy << '\n';
  }
  std::cout << "wrote " << (out / "checkpoint.bin").string() << '\n';
  return 0;
}

int run_eval(const Common& common, const std::string& checkpoint, const std::vector<std::string>& mode_names,
             std::optional<double> snr, const std::string& split_name) {
  Checkpoint ck = load_checkpoint(checkpoint);
  const RunConfig config = checkpoint_config(ck.config, common);
  const Dataset data = load_dataset(config, config.threads);
  const auto indices = data.indices(parse_split(split_name));
  Corruption corruption{NoiseSpec{config.corruption.noise, snr.value_or(std::numeric_limits<double>::infinity())},
                        config.corruption.darkness, config.corruption.variance, config.seed};
  const ClassifierPredictor predictor(*ck.model);
  std::ostringstream csv;
  csv << "mode,split,snr_db,accuracy\n";
  for (Mode mode : chosen_modes(mode_names, *ck.model)) {
    const EvalResult r = evaluate(predictor, data, indices, mode, corruption, config.threads);
    std::cout << to_string(mode) << ' ' << split_name << " accuracy " << r.accuracy() << " (" << r.correct << '/'
              << r.total << ")\n";
    csv << to_string(mode) << ',' << split_name << ',' << corruption.noise.snr_db << ',' << r.accuracy() << '\n';
  }
  if (!common.out.empty()) std::ofstream(out_dir(common) / "eval.csv") << csv.str();
  return 0;
}

int run_sweep(const Common& common, const std::string& checkpoint, const std::vector<std::string>& mode_names) {
  Checkpoint ck = load_checkpoint(checkpoint);
  const RunConfig config = checkpoint_config(ck.config, common);
  const Dataset data = load_dataset(config, config.threads);
  const auto indices = data.indices(Split::kTest);
  const Corruption base{NoiseSpec{config.corruption.noise, 0.0}, config.corruption.darkness,
                        config.corruption.variance, config.seed};
  const auto modes = chosen_modes(mode_names, *ck.model);
  const auto rows = noise_sweep(ClassifierPredictor(*ck.model), data, indices, modes, config.corruption.snrs, base,
                                config.threads);
  const fs::path out = out_dir(common);
  write_sweep_csv(out / "sweep.csv", rows);
  std::ofstream(out / "run.json") << nlohmann::json{{"config", to_json(config)}, {"checkpoint", checkpoint}}.dump(2)
                                  << '\n';
  for (const auto& r : rows) std::cout << to_string(r.mode) << ' ' << r.snr_db << " dB " << r.result.accuracy() << '\n';
  return 0;
}

int run_flops(const Common& common, const std::string& checkpoint) {
  RunConfig config;
  std::unique_ptr<Classifier> model;
  if (checkpoint.empty()) {
    config = resolve(common);
    model = build_model(config);
  } else {
    Checkpoint ck = load_checkpoint(checkpoint);
    config = checkpoint_config(ck.config, common);
    model = std::move(ck.model);
  }
  MelConfig mel;
  const auto mel_frames = static_cast<std::int64_t>(std::ceil(2.0 * mel.frame_rate));
  std::ostringstream csv;
  csv << "# " << kFlopConvention << '\n' << "model,mode,params,flops\n";
  std::cout << "# FLOP convention: " << kFlopConvention << '\n';
  const auto params = count_params(model->params());
  for (Mode mode : model->eval_modes()) {
    const auto input = policy_input(*model, mel_frames, config.data.frames);
    const auto flops = count_flops(*model, input, mode).total;
    std::cout << to_string(config.model) << ' ' << to_string(mode) << " params " << params << " flops " << flops
              << '\n';
    csv << to_string(config.model) << ',' << to_string(mode) << ',' << params << ',' << flops << '\n';
  }
  if (!common.out.empty()) std::ofstream(out_dir(common) / "flops.csv") << csv.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"U-FFIA fish feeding intensity toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--config", common.config, "JSON run config (or a run.json record)");
  app.add_option("--set", common.sets, "Override KEY=VALUE (dotted path; repeatable)")->take_all();
  app.add_option("--out", common.out, "Output directory");
  app.add_option("--seed", common.seed, "Run seed");
  app.add_option("--threads", common.threads, "Worker threads (1 = deterministic verification mode)")
      ->check(CLI::PositiveNumber);

  bool packed = false, canonical = false;
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset (WAV + frames + manifest.csv)");
  synth->add_flag("--packed", packed, "Store frames as one packed file per clip instead of PNGs");
  synth->add_flag("--canonical", canonical, "50 frames at 224x224");

  std::string root;
  auto* manifest = app.add_subcommand("manifest", "Scan <root>/<Class>/ folders into a split manifest");
  manifest->add_option("root", root, "Dataset root (default: UFFIA_DATA_ROOT)");

  auto* preprocess = app.add_subcommand("preprocess", "Compute log-mel features and frames into a cache");
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  auto* distill = app.add_subcommand("distill", "Train a student with knowledge distillation");

  std::string checkpoint, split = "test";
  std::vector<std::string> modes;
  std::optional<double> snr;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--mode", modes, "A, V or AV (repeatable; default: every mode of the model)");
  eval->add_option("--snr", snr, "Mix audio noise at this SNR in dB");
  eval->add_option("--split", split, "train, val or test");

  auto* sweep = app.add_subcommand("sweep", "Accuracy over the configured SNR levels");
  sweep->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  sweep->add_option("--mode", modes, "A, V or AV (repeatable)");

  auto* flops = app.add_subcommand("flops", "Parameter and FLOP counts at canonical clip shapes");
  flops->add_option("--checkpoint", checkpoint, "Checkpoint file (default: build from the config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*synth) return run_synth(common, packed, canonical);
    if (*manifest) return run_manifest(common, root);
    if (*preprocess) return run_preprocess(common);
    if (*train_cmd) return run_train(common, false);
    if (*distill) return run_train(common, true);
    if (*eval) return run_eval(common, checkpoint, modes, snr, split);
    if (*sweep) return run_sweep(common, checkpoint, modes);
    if (*flops) return run_flops(common, checkpoint);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
