#pragma once

#include <map>
#include <span>
#include <string>

#include "uffia/model/classifier.hpp"

UFFIA_NAMESPACE_BEGIN

/// Counting convention, printed in every report that carries a FLOP figure.
inline constexpr const char* kFlopConvention =
    "1 multiply-accumulate = 2 FLOPs; attention = QKV/output projections + QK^T + AV, softmax 5/element; "
    "softmax, log-softmax, layer norm, GELU 5/element; other elementwise ops and pooling 1/input element; "
    "reshape/slice/concat/transpose 0";

/// FLOPs of one traced primitive. Unknown kinds raise UnsupportedError.
std::int64_t op_flops(const OpRecord& op);

struct FlopReport {
  std::int64_t total = 0;
  std::map<std::string, std::int64_t> by_kind;
};

/// Sums a trace. Every unknown kind is listed in the UnsupportedError message.
FlopReport count_flops(std::span<const OpRecord> ops);
/// Shape-only forward of `model` on `input` (which may be a meta input) in `mode`.
FlopReport count_flops(const Classifier& model, const ClipInput& input, Mode mode);

/// Meta input shaped as `model` would receive a clip of `mel_frames` x `arch.mel_bins`
/// features and `native_frames` frames, after its input policy.
ClipInput policy_input(const Classifier& model, std::int64_t mel_frames, std::int64_t native_frames);

/// Number of trainable scalars.
std::int64_t count_params(const ParamList& params);

UFFIA_NAMESPACE_END
