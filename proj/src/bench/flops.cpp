#include "uffia/bench/flops.hpp"

#include <cmath>
#include <set>

UFFIA_NAMESPACE_BEGIN

namespace {

const std::map<std::string, std::int64_t>& per_element() {
  static const std::map<std::string, std::int64_t> table{
      {"add", 1},     {"sub", 1},         {"mul", 1},        {"scale", 1},       {"add_bias", 1},
      {"relu", 1},    {"sum", 1},         {"reduce_mean", 1}, {"reduce_max", 1},  {"avg_pool", 1},
      {"gelu", 5},    {"softmax", 5},     {"log_softmax", 5}, {"layer_norm", 5},  {"transpose", 0},
      {"reshape", 0}, {"slice", 0},       {"concat", 0},
  };
  return table;
}

}  // namespace

std::int64_t op_flops(const OpRecord& op) {
  const auto& d = op.dims;
  auto want = [&](std::size_t n) {
    if (d.size() != n) throw ShapeError("op '" + op.kind + "' traced with " + std::to_string(d.size()) + " dims");
  };
  if (auto it = per_element().find(op.kind); it != per_element().end()) {
    want(1);
    return it->second * d[0];
  }
  if (op.kind == "matmul") {
    want(3);
    return 2 * d[0] * d[1] * d[2];
  }
  if (op.kind == "conv") {
    want(3);
    return 2 * d[0] * d[1] * d[2];
  }
  if (op.kind == "attention") {
    // heads, queries, keys, head width: QK^T and AV are 2*h*n*m*dh each, softmax 5 per score.
    want(4);
    const std::int64_t scores = d[0] * d[1] * d[2];
    return 4 * scores * d[3] + 5 * scores;
  }
  if (op.kind == "cross_entropy") {
    // log-softmax over [B x C] plus the picked term per row.
    want(2);
    return 5 * d[0] * d[1] + d[0];
  }
  if (op.kind == "window_max_mean") {
    // every step visited once for the max and once for the mean
    want(2);
    return 2 * d[0] * d[1];
  }
  throw UnsupportedError("no FLOP formula for op '" + op.kind + "'");
}

FlopReport count_flops(std::span<const OpRecord> ops) {
  FlopReport report;
  std::set<std::string> unknown;
  for (const auto& op : ops) {
    try {
      const auto f = op_flops(op);
      report.total += f;
      report.by_kind[op.kind] += f;
    } catch (const UnsupportedError&) {
      unknown.insert(op.kind);
    }
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& k : unknown) list += (list.empty() ? "" : ", ") + k;
    throw UnsupportedError("no FLOP formula for ops: " + list);
  }
  return report;
}

FlopReport count_flops(const Classifier& model, const ClipInput& input, Mode mode) {
  MetaModeGuard meta;
  NoGradGuard no_grad;
  OpTraceScope trace;
  model.forward(input, mode);
  return count_flops(trace.records());
}

ClipInput policy_input(const Classifier& model, std::int64_t mel_frames, std::int64_t native_frames) {
  const ArchConfig& arch = model.arch();
  const InputPolicy policy = model.input_policy();
  const std::int64_t frames = policy.frames == 0 ? native_frames : std::min(policy.frames, native_frames);
  const auto kept = static_cast<std::int64_t>(std::floor(policy.simpf_k * static_cast<double>(mel_frames)));
  ClipInput input = make_meta_input(kept, arch.mel_bins, frames, arch.frame_size, arch.patch);
  input.mel_compression = policy.simpf_k;
  input.full_frames = frames == native_frames;
  if (input.full_frames) input.volume = Tensor::meta({3, frames, arch.frame_size, arch.frame_size});
  return input;
}

std::int64_t count_params(const ParamList& params) { return params.trainable_count(); }

UFFIA_NAMESPACE_END
