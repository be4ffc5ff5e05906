#include "uffia/bench/evaluate.hpp"

#include <cmath>
#include <fstream>

#include "parallel.hpp"
#include "uffia/dsp/features.hpp"

UFFIA_NAMESPACE_BEGIN

namespace {

double cross_entropy(const std::array<double, kNumClasses>& s, int label) {
  double top = s[0];
  for (double v : s) top = std::max(top, v);
  double z = 0;
  for (double v : s) z += std::exp(v - top);
  return std::log(z) + top - s[static_cast<std::size_t>(label)];
}

int argmax(const std::array<double, kNumClasses>& s) {
  std::vector<Real> r(s.begin(), s.end());
  return predict(r);
}

struct Outcome {
  bool correct = false;
  double loss = 0;
};

Outcome score_item(const Predictor& predictor, const Dataset& data, std::size_t index, const MelFeature* mel,
                   Mode mode, const Corruption& corruption) {
  const PreparedClip& clip = data.clips[index];
  // Both modalities are always handed over; the mode alone decides what is used.
  const std::int64_t want = predictor.frames();
  FrameStack frames = eval_frames(clip.frames, want == 0 ? clip.frames.count : want);
  if (corruption.darkness != 1.0 || corruption.variance != 0.0) {
    Rng rng = Rng::stream(corruption.seed ^ 0x76697375616cULL, index);
    frames = corrupt_frames(frames, corruption.darkness, corruption.variance, rng);
  }
  const EvalItem item{index, mel, &frames, mode};
  const auto s = predictor.scores(item);
  return {argmax(s) == clip.label, cross_entropy(s, clip.label)};
}

EvalResult tally(const std::vector<Outcome>& outcomes) {
  EvalResult r;
  r.total = outcomes.size();
  for (const auto& o : outcomes) {
    r.correct += o.correct ? 1 : 0;
    r.loss += o.loss;
  }
  r.loss /= static_cast<double>(r.total);
  return r;
}

std::vector<MelFeature> noisy_features(const Dataset& data, std::span<const std::size_t> indices,
                                       const Corruption& corruption, int threads) {
  std::vector<MelFeature> mels(indices.size());
  parallel_for(indices.size(), threads,
               [&](std::size_t i) { mels[i] = data.noisy_mel(indices[i], corruption.noise, corruption.seed); });
  return mels;
}

void check_indices(const Dataset& data, std::span<const std::size_t> indices) {
  if (indices.empty()) throw InputError("evaluation needs at least one clip");
  for (auto i : indices) {
    if (i >= data.clips.size()) throw InputError("clip index " + std::to_string(i) + " out of range");
  }
}

}  // namespace

std::array<double, kNumClasses> ClassifierPredictor::scores(const EvalItem& item) const {
  const InputPolicy policy = model_.input_policy();
  MelFeature pooled;
  const MelFeature* mel = item.mel;
  if (mel && policy.simpf_k < 1.0) {
    pooled = simpf_pool(*mel, policy.simpf_k);
    mel = &pooled;
  }
  NoGradGuard no_grad;
  const Tensor logits = model_.forward(model_.prepare(mel, item.frames), item.mode);
  std::array<double, kNumClasses> out{};
  const auto v = logits.values();
  if (v.size() != out.size()) throw ShapeError("classifier returned " + std::to_string(v.size()) + " scores");
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i];
  return out;
}

FrameStack eval_frames(const NativeFrames& clip, std::int64_t count) {
  return count >= clip.count ? all_frames(clip) : strided_frames(clip, count);
}

EvalResult evaluate(const Predictor& predictor, const Dataset& data, std::span<const std::size_t> indices, Mode mode,
                    const Corruption& corruption, int threads) {
  check_indices(data, indices);
  const bool noisy = std::isfinite(corruption.noise.snr_db);
  std::vector<MelFeature> mels;
  if (noisy) mels = noisy_features(data, indices, corruption, threads);
  std::vector<Outcome> outcomes(indices.size());
  parallel_for(indices.size(), threads, [&](std::size_t i) {
    const MelFeature* mel = noisy ? &mels[i] : &data.clips[indices[i]].mel;
    outcomes[i] = score_item(predictor, data, indices[i], mel, mode, corruption);
  });
  return tally(outcomes);
}

std::vector<SweepRow> noise_sweep(const Predictor& predictor, const Dataset& data, std::span<const std::size_t> indices,
                                  std::span<const Mode> modes, std::span<const double> snrs, const Corruption& base,
                                  int threads) {
  check_indices(data, indices);
  std::vector<SweepRow> rows;
  for (double snr : snrs) {
    Corruption c = base;
    c.noise.snr_db = snr;
    const auto mels = noisy_features(data, indices, c, threads);
    for (Mode mode : modes) {
      std::vector<Outcome> outcomes(indices.size());
      parallel_for(indices.size(), threads, [&](std::size_t i) {
        outcomes[i] = score_item(predictor, data, indices[i], &mels[i], mode, c);
      });
      rows.push_back({mode, snr, tally(outcomes)});
    }
  }
  return rows;
}

void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepRow> rows) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "mode,snr_db,accuracy\n";
  out.precision(17);
  for (const auto& r : rows) out << to_string(r.mode) << ',' << r.snr_db << ',' << r.result.accuracy() << '\n';
}

UFFIA_NAMESPACE_END
