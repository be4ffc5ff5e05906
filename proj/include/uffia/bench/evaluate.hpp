#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "uffia/data/dataset.hpp"
#include "uffia/model/classifier.hpp"

UFFIA_NAMESPACE_BEGIN

/// What a predictor sees of one clip.
struct EvalItem {
  std::size_t index = 0;
  const MelFeature* mel = nullptr;
  const FrameStack* frames = nullptr;
  Mode mode = Mode::kAudioVisual;
};

class Predictor {
 public:
  virtual ~Predictor() = default;
  /// Four class scores; the argmax is the prediction.
  virtual std::array<double, kNumClasses> scores(const EvalItem& item) const = 0;
  /// Frames per clip to hand over (0 = all native frames).
  virtual std::int64_t frames() const { return 0; }
};

/// Runs a classifier without gradients, applying its own input policy (SimPF, frame count).
class ClassifierPredictor : public Predictor {
 public:
  explicit ClassifierPredictor(const Classifier& model) : model_(model) {}
  std::array<double, kNumClasses> scores(const EvalItem& item) const override;
  std::int64_t frames() const override { return model_.input_policy().frames; }

 private:
  const Classifier& model_;
};

struct Corruption {
  NoiseSpec noise;
  double darkness = 1.0;
  double variance = 0.0;
  /// Seeds noise mixing and pixel noise, one stream per clip.
  std::uint64_t seed = 0;
};

struct EvalResult {
  std::size_t correct = 0;
  std::size_t total = 0;
  /// Mean cross-entropy of the scores (infinite for one-hot stubs that miss).
  double loss = 0.0;
  double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

/// Frames handed to a predictor at evaluation: evenly spaced, so the choice
/// depends only on the clip.
FrameStack eval_frames(const NativeFrames& clip, std::int64_t count);

/// Accuracy of `predictor` over `indices` of `data` in `mode`. Audio noise is
/// mixed before the frontend and visual corruption applied to the chosen
/// frames; both are seeded per clip. Empty `indices` raise InputError.
EvalResult evaluate(const Predictor& predictor, const Dataset& data, std::span<const std::size_t> indices, Mode mode,
                    const Corruption& corruption = {}, int threads = 1);

struct SweepRow {
  Mode mode;
  double snr_db;
  EvalResult result;
};

/// One evaluate per (mode, SNR); noisy features are computed once per SNR and shared by the modes.
std::vector<SweepRow> noise_sweep(const Predictor& predictor, const Dataset& data, std::span<const std::size_t> indices,
                                  std::span<const Mode> modes, std::span<const double> snrs, const Corruption& base,
                                  int threads = 1);

/// Header `mode,snr_db,accuracy`, one row per sweep entry.
void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepRow> rows);

UFFIA_NAMESPACE_END
