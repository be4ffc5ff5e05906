#include "uffia/distill/kd.hpp"

#include <cmath>

UFFIA_NAMESPACE_BEGIN

void KdConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("kd lambda must lie in [0, 1]");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("kd temperature must be positive");
}

Tensor kd_loss(const Tensor& student_logits, const Tensor& teacher_logits, std::span<const int> labels,
               const KdConfig& config) {
  config.validate();
  if (student_logits.shape() != teacher_logits.shape()) throw ShapeError("kd_loss: student/teacher logit shapes differ");
  const Tensor target = scale(teacher_logits.detach(), static_cast<Real>(1.0 / config.tau));
  const Tensor log_student = log_softmax(student_logits, 1);
  const Tensor log_target = log_softmax(target, 1);
  const Tensor divergence =
      config.teacher_first ? sum(mul(softmax(target, 1), sub(log_target, log_student)))
                           : sum(mul(softmax(student_logits, 1), sub(log_student, log_target)));
  const Real batch = static_cast<Real>(student_logits.dim(0));
  const Tensor ce = cross_entropy(student_logits, labels);
  return add(scale(ce, static_cast<Real>(config.lambda)),
             scale(divergence, static_cast<Real>((1.0 - config.lambda)) / batch));
}

namespace {

ConvBlock make_conv(std::int64_t out, std::int64_t in, const Shape& kernel, Rng& rng) {
  std::int64_t fan_in = in;
  for (auto k : kernel) fan_in *= k;
  Shape shape{out, in};
  shape.insert(shape.end(), kernel.begin(), kernel.end());
  const Real bound = static_cast<Real>(std::sqrt(6.0 / static_cast<double>(fan_in)));
  return ConvBlock{uniform_param(shape, bound, rng), constant_param({out}, Real(0))};
}

/// [C x ...] -> [1 x 2C]: global mean then global max per channel.
Tensor global_pool(const Tensor& x) {
  const std::int64_t channels = x.dim(0);
  const Tensor flat = reshape(x, {channels, x.numel() / channels});
  return reshape(concat({reduce_mean(flat, 1), reduce_max(flat, 1)}, 0), {1, 2 * channels});
}

void collect_block(const ConvBlock& block, ParamList& list, const std::string& prefix) {
  list.add(prefix + ".weight", block.weight);
  list.add(prefix + ".bias", block.bias);
}

}  // namespace

AudioTeacher::AudioTeacher(const TeacherConfig& config, const ArchConfig& arch, Rng& rng) : arch_(arch) {
  if (config.audio_channels.empty()) throw ConfigError("audio teacher needs at least one conv block");
  std::int64_t in = 1;
  for (auto out : config.audio_channels) {
    blocks_.push_back(make_conv(out, in, {3, 3}, rng));
    in = out;
  }
  head_ = Mlp::create(2 * in, config.hidden, kNumClasses, rng);
  input_stats_ = meta_mode() ? Tensor::meta({2}) : Tensor::from_values({2}, {0, 1});
}

void AudioTeacher::set_audio_stats(double mean, double stddev) {
  if (!(stddev > 0)) throw ConfigError("audio input standard deviation must be positive");
  auto v = input_stats_.mutable_values();
  v[0] = static_cast<Real>(mean);
  v[1] = static_cast<Real>(stddev);
}

ClipInput AudioTeacher::prepare(const MelFeature* mel, const FrameStack*) const {
  if (!mel) throw InputError("audio teacher needs a log-mel feature");
  if (mel->compression != 1.0) throw ContractError("audio teacher requires the uncompressed log-mel");
  return make_clip_input(mel, nullptr, arch_.patch);
}

Tensor AudioTeacher::forward(const ClipInput& input, Mode mode) const {
  if (mode != Mode::kAudio) throw ContractError("audio teacher only runs in A mode");
  if (!input.has_audio()) throw ContractError("audio teacher needs audio");
  if (input.mel_compression != 1.0) throw ContractError("audio teacher requires the uncompressed log-mel");
  Tensor x = input.mel;
  if (!x.is_meta()) {
    const auto stats = input_stats_.values();
    std::vector<Real> values(x.values().begin(), x.values().end());
    for (auto& v : values) v = (v - stats[0]) / stats[1];
    x = Tensor::from_values(x.shape(), std::move(values));
  }
  x = reshape(x, {1, x.dim(0), x.dim(1)});
  for (const auto& block : blocks_) {
    x = relu(conv2d(x, block.weight, block.bias, Padding::kZero));
    if (x.dim(1) >= 2 && x.dim(2) >= 2) x = avg_pool2d(x, 2, 2);
  }
  return head_(global_pool(x));
}

ParamList AudioTeacher::params() const {
  ParamList list;
  for (std::size_t i = 0; i < blocks_.size(); ++i) collect_block(blocks_[i], list, "conv" + std::to_string(i));
  head_.collect(list, "head.");
  list.add("input_stats", input_stats_);
  return list;
}

VideoTeacher::VideoTeacher(const TeacherConfig& config, const ArchConfig& arch, Rng& rng)
    : arch_(arch), input_pool_(config.video_input_pool) {
  if (config.video_channels.empty()) throw ConfigError("video teacher needs at least one conv block");
  if (input_pool_ < 1) throw ConfigError("video teacher input pooling must be positive");
  std::int64_t in = 3;
  for (auto out : config.video_channels) {
    Block block{make_conv(out, in, {1, 3, 3}, rng), make_conv(out, out, {3, 1, 1}, rng)};
    blocks_.push_back(std::move(block));
    in = out;
  }
  head_ = Mlp::create(2 * in, config.hidden, kNumClasses, rng);
}

Tensor frames_to_volume(const FrameStack& frames) {
  const std::int64_t f_count = frames.count();
  const std::int64_t plane = frames.height * frames.width;
  std::vector<Real> out(static_cast<std::size_t>(3 * f_count * plane));
  for (std::int64_t f = 0; f < f_count; ++f) {
    for (std::int64_t c = 0; c < 3; ++c) {
      const Real* src = frames.values.data() + (f * 3 + c) * plane;
      std::copy(src, src + plane, out.begin() + (c * f_count + f) * plane);
    }
  }
  return Tensor::from_values({3, f_count, frames.height, frames.width}, std::move(out));
}

ClipInput VideoTeacher::prepare(const MelFeature*, const FrameStack* frames) const {
  if (!frames) throw InputError("video teacher needs frames");
  if (!frames->is_complete()) throw ContractError("video teacher requires every native frame");
  ClipInput input;
  input.volume = frames_to_volume(*frames);
  input.full_frames = true;
  return input;
}

Tensor VideoTeacher::forward(const ClipInput& input, Mode mode) const {
  if (mode != Mode::kVideo) throw ContractError("video teacher only runs in V mode");
  if (!input.volume.defined() || !input.full_frames) throw ContractError("video teacher requires every native frame");
  Tensor x = input.volume;
  if (input_pool_ > 1) x = avg_pool3d(x, 1, input_pool_, input_pool_);
  for (const auto& block : blocks_) {
    x = relu(conv3d(x, block.spatial.weight, block.spatial.bias, Padding::kZero));
    x = relu(conv3d(x, block.temporal.weight, block.temporal.bias, Padding::kZero));
    if (x.dim(2) >= 2 && x.dim(3) >= 2) x = avg_pool3d(x, 1, 2, 2);
  }
  return head_(global_pool(x));
}

ParamList VideoTeacher::params() const {
  ParamList list;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    collect_block(blocks_[i].spatial, list, "block" + std::to_string(i) + ".spatial");
    collect_block(blocks_[i].temporal, list, "block" + std::to_string(i) + ".temporal");
  }
  head_.collect(list, "head.");
  return list;
}

std::unique_ptr<Classifier> make_teacher(ModelKind kind, const TeacherConfig& config, const ArchConfig& arch, Rng& rng) {
  if (kind == ModelKind::kAudioTeacher) return std::make_unique<AudioTeacher>(config, arch, rng);
  if (kind == ModelKind::kVideoTeacher) return std::make_unique<VideoTeacher>(config, arch, rng);
  throw ConfigError(to_string(kind) + " is not a teacher");
}

Mode teacher_mode(ModelKind kind) {
  if (kind == ModelKind::kAudioTeacher) return Mode::kAudio;
  if (kind == ModelKind::kVideoTeacher) return Mode::kVideo;
  throw ConfigError(to_string(kind) + " is not a teacher");
}

double distill_step(const Classifier& student, Mode mode, const Classifier& teacher,
                    std::span<const DistillExample> batch, const KdConfig& config, Adam& adam) {
  config.validate();
  if (mode == Mode::kAudioVisual) throw ConfigError("distillation trains the A or V mode only");
  if (teacher_mode(teacher.kind()) != mode) {
    throw ConfigError(to_string(teacher.kind()) + " cannot teach mode " + to_string(mode));
  }
  if (batch.empty()) throw InputError("empty distillation batch");
  const Real weight = Real(1) / static_cast<Real>(batch.size());
  double total = 0;
  for (const auto& ex : batch) {
    Tensor target;
    {
      NoGradGuard no_grad;
      target = teacher.forward(ex.teacher, mode);
    }
    const int label[1] = {ex.label};
    const Tensor loss = scale(kd_loss(student.forward(ex.student, mode), target, label, config), weight);
    total += static_cast<double>(loss.item());
    backward(loss);
  }
  adam.step();
  return total;
}

UFFIA_NAMESPACE_END
