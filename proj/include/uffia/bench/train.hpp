#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "uffia/bench/config.hpp"
#include "uffia/bench/evaluate.hpp"
#include "uffia/data/dataset.hpp"
#include "uffia/model/classifier.hpp"

UFFIA_NAMESPACE_BEGIN

struct MetricRow {
  std::int64_t epoch = 0;
  /// "train", "val" or "test".
  std::string split;
  /// A, V, AV, or "mixed" for training rows.
  std::string mode;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct MetricsLog {
  std::vector<MetricRow> rows;
  /// 1-based epoch whose weights were kept.
  std::int64_t best_epoch = 0;
  /// Mean validation accuracy over the evaluated modes at best_epoch.
  double best_score = -1.0;
  std::int64_t epochs_run = 0;
  double wall_seconds = 0.0;
  std::int64_t params = 0;
  std::int64_t flops = 0;

  /// Test accuracy in `mode`; throws InputError if it was not evaluated.
  double test_accuracy(Mode mode) const;
};

/// Header `epoch,split,mode,loss,accuracy`.
void write_metrics_csv(const std::filesystem::path& path, const MetricsLog& log);

/// The data a config describes: synthetic set, manifest (split if the rows carry none) or feature cache.
Dataset load_dataset(const RunConfig& config, int threads = 1);

/// Fresh model for `config`, initialised from `config.seed`.
std::unique_ptr<Classifier> build_model(const RunConfig& config);

struct Checkpoint {
  RunConfig config;
  std::unique_ptr<Classifier> model;
  std::int64_t best_epoch = 0;
};

void save_checkpoint(const std::filesystem::path& path, const RunConfig& config, const Classifier& model,
                     std::int64_t best_epoch);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct TrainOptions {
  /// When set, metrics.csv, checkpoint.bin and run.json are written here.
  std::filesystem::path out_dir;
  /// Per-epoch progress lines, if non-null.
  std::ostream* progress = nullptr;
};

struct TrainResult {
  std::unique_ptr<Classifier> model;
  MetricsLog log;
};

/// Seeded training run: per-epoch shuffled mini-batches, validation in every
/// evaluation mode, best epoch (mean validation accuracy, ties to the earlier)
/// restored and evaluated on the test split. With `kd.enabled`, audio-only and
/// video-only samples are distilled from the configured teachers. A non-finite
/// loss aborts with NumericError.
TrainResult train(const RunConfig& config, const Dataset& data, const TrainOptions& options = {});

/// `run.json` content: the full config plus an environment fingerprint and the outcome.
nlohmann::json run_record(const RunConfig& config, const MetricsLog& log);

UFFIA_NAMESPACE_END
