#include "uffia/model/config.hpp"

#include <cmath>

UFFIA_NAMESPACE_BEGIN

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::kAudio: return "A";
    case Mode::kVideo: return "V";
    case Mode::kAudioVisual: return "AV";
  }
  return "?";
}

Mode parse_mode(const std::string& name) {
  if (name == "A" || name == "audio") return Mode::kAudio;
  if (name == "V" || name == "video") return Mode::kVideo;
  if (name == "AV" || name == "audio-visual") return Mode::kAudioVisual;
  throw ConfigError("unknown mode '" + name + "' (expected A, V or AV)");
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kUffia: return "uffia";
    case ModelKind::kFusionSelf: return "fusion-self";
    case ModelKind::kFusionCross: return "fusion-cross";
    case ModelKind::kFusionBottleneck: return "fusion-bottleneck";
    case ModelKind::kAudioBaseline: return "audio-baseline";
    case ModelKind::kVideoBaseline: return "video-baseline";
    case ModelKind::kAudioTeacher: return "audio-teacher";
    case ModelKind::kVideoTeacher: return "video-teacher";
  }
  return "?";
}

ModelKind parse_model_kind(const std::string& name) {
  for (auto kind : {ModelKind::kUffia, ModelKind::kFusionSelf, ModelKind::kFusionCross, ModelKind::kFusionBottleneck,
                    ModelKind::kAudioBaseline, ModelKind::kVideoBaseline, ModelKind::kAudioTeacher,
                    ModelKind::kVideoTeacher}) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError("unknown model kind '" + name + "'");
}

void DropoutConfig::validate() const {
  for (double p : {p_av, p_a, p_v}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("modality dropout probabilities must lie in [0, 1]");
  }
  if (std::abs(p_av + p_a + p_v - 1.0) > 1e-9) throw ConfigError("modality dropout probabilities must sum to 1");
}

UFFIA_NAMESPACE_END
