#include "uffia/bench/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

UFFIA_NAMESPACE_BEGIN

using nlohmann::json;

namespace {

/// Reads fields of one JSON object, tracking which keys were consumed.
class Reader {
 public:
  Reader(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ConfigError("config field '" + label() + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!doc_.contains(key)) return;
    try {
      out = doc_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config field '" + field(key) + "' has the wrong type (" + doc_.at(key).dump() + ")");
    }
  }

  template <typename F>
  void object(const char* key, F&& read) {
    seen_.insert(key);
    if (!doc_.contains(key)) return;
    Reader sub(doc_.at(key), field(key));
    read(sub);
    sub.finish();
  }

  void finish() const {
    for (const auto& item : doc_.items()) {
      if (!seen_.count(item.key())) throw ConfigError("unknown config field '" + field(item.key()) + "'");
    }
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string label() const { return path_.empty() ? "<root>" : path_; }

  const json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

void RunConfig::validate() const {
  require(profile == "desk" || profile == "paper", "config field 'profile' must be desk or paper");
  require(threads >= 1, "config field 'threads' must be at least 1");
  require(simpf_k > 0 && simpf_k <= 1, "config field 'simpf_k' must lie in (0, 1]");
  require(arch.dim >= 1 && arch.heads >= 1 && arch.dim % arch.heads == 0, "config field 'arch.dim' must be a multiple of 'arch.heads'");
  require(arch.layers >= 0 && arch.ffn >= 1, "config fields 'arch.layers'/'arch.ffn' out of range");
  require(!arch.conv_channels.empty(), "config field 'arch.conv_channels' must not be empty");
  require(arch.audio_tokens >= 1, "config field 'arch.audio_tokens' must be at least 1");
  require(arch.patch >= 1 && arch.frame_size % arch.patch == 0, "config field 'arch.patch' must divide 'arch.frame_size'");
  require(arch.frame_size == data.frame_size, "config fields 'arch.frame_size' and 'data.frame_size' must agree");
  require(arch.frames >= 1 && arch.frames <= data.frames, "config field 'arch.frames' must lie in [1, data.frames]");
  require(arch.bottleneck >= 1, "config field 'arch.bottleneck' must be at least 1");
  try {
    dropout.validate();
    kd.loss.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config field 'dropout'/'kd': ") + e.what());
  }
  require(optim.lr > 0, "config field 'optim.lr' must be positive");
  require(optim.batch >= 1, "config field 'optim.batch' must be at least 1");
  require(optim.epochs >= 1, "config field 'optim.epochs' must be at least 1");
  require(optim.patience >= 0, "config field 'optim.patience' must be non-negative");
  require(corruption.darkness > 0 && corruption.darkness <= 1, "config field 'corruption.darkness' must lie in (0, 1]");
  require(corruption.variance >= 0 && corruption.variance <= 0.2, "config field 'corruption.variance' must lie in [0, 0.2]");
  require(augment.color_jitter >= 0, "config field 'augment.color_jitter' must be non-negative");
  require(augment.noise_prob >= 0 && augment.noise_prob <= 1, "config field 'augment.noise_prob' must lie in [0, 1]");
  require(augment.noise_copies >= 1, "config field 'augment.noise_copies' must be at least 1");
  require(augment.noise_snr_min <= augment.noise_snr_max,
          "config fields 'augment.noise_snr_min'/'augment.noise_snr_max' must be ordered");
  require(data.source == "synthetic" || data.source == "manifest" || data.source == "cache",
          "config field 'data.source' must be synthetic, manifest or cache");
  require(data.source != "manifest" || !data.manifest.empty(), "config field 'data.manifest' is required for manifest data");
  require(data.source != "cache" || !data.cache.empty(), "config field 'data.cache' is required for cached data");
  require(std::abs(data.splits[0] + data.splits[1] + data.splits[2] - 1.0) <= 1e-9, "config field 'data.splits' must sum to 1");
  require(data.frames >= 1 && data.frame_size >= 8, "config fields 'data.frames'/'data.frame_size' out of range");
}

RunConfig profile_defaults(const std::string& profile) {
  RunConfig c;
  c.profile = profile;
  if (profile == "desk") return c;
  if (profile != "paper") throw ConfigError("unknown profile '" + profile + "' (expected desk or paper)");
  c.arch.dim = 768;
  c.arch.heads = 8;
  c.arch.layers = 6;
  c.arch.ffn = 1024;
  c.arch.conv_channels = {64, 128, 256, 512};
  c.arch.patch = 16;
  c.arch.frames = 4;
  c.arch.frame_size = 224;
  c.optim.lr = 1e-4;
  c.optim.epochs = 200;
  c.data.frames = 50;
  c.data.frame_size = 224;
  return c;
}

json to_json(const RunConfig& c) {
  const auto& s = c.augment.spec;
  return json{
      {"profile", c.profile},
      {"model", to_string(c.model)},
      {"seed", c.seed},
      {"threads", c.threads},
      {"simpf_k", c.simpf_k},
      {"arch",
       {{"dim", c.arch.dim},
        {"heads", c.arch.heads},
        {"layers", c.arch.layers},
        {"ffn", c.arch.ffn},
        {"conv_channels", c.arch.conv_channels},
        {"audio_tokens", c.arch.audio_tokens},
        {"patch", c.arch.patch},
        {"frames", c.arch.frames},
        {"frame_size", c.arch.frame_size},
        {"mel_bins", c.arch.mel_bins},
        {"bottleneck", c.arch.bottleneck}}},
      {"teacher",
       {{"audio_channels", c.teacher.audio_channels},
        {"video_channels", c.teacher.video_channels},
        {"hidden", c.teacher.hidden},
        {"video_input_pool", c.teacher.video_input_pool}}},
      {"dropout", {{"p_av", c.dropout.p_av}, {"p_a", c.dropout.p_a}, {"p_v", c.dropout.p_v}}},
      {"kd",
       {{"enabled", c.kd.enabled},
        {"lambda", c.kd.loss.lambda},
        {"tau", c.kd.loss.tau},
        {"teacher_first", c.kd.loss.teacher_first},
        {"audio_teacher", c.kd.audio_teacher},
        {"video_teacher", c.kd.video_teacher}}},
      {"optim",
       {{"lr", c.optim.lr},
        {"batch", c.optim.batch},
        {"epochs", c.optim.epochs},
        {"patience", c.optim.patience},
        {"beta1", c.optim.beta1},
        {"beta2", c.optim.beta2},
        {"epsilon", c.optim.epsilon}}},
      {"augment",
       {{"spec_augment", c.augment.spec_augment},
        {"time_masks", s.time_masks},
        {"freq_masks", s.freq_masks},
        {"max_time_width", s.max_time_width},
        {"max_freq_width", s.max_freq_width},
        {"color_jitter", c.augment.color_jitter},
        {"noise_prob", c.augment.noise_prob},
        {"noise_copies", c.augment.noise_copies},
        {"noise_snr_min", c.augment.noise_snr_min},
        {"noise_snr_max", c.augment.noise_snr_max}}},
      {"corruption",
       {{"noise", to_string(c.corruption.noise)},
        {"snrs", c.corruption.snrs},
        {"darkness", c.corruption.darkness},
        {"variance", c.corruption.variance}}},
      {"data",
       {{"source", c.data.source},
        {"manifest", c.data.manifest},
        {"cache", c.data.cache},
        {"train", c.data.train},
        {"val", c.data.val},
        {"test", c.data.test},
        {"frames", c.data.frames},
        {"frame_size", c.data.frame_size},
        {"splits", c.data.splits},
        {"seed", c.data.seed}}},
  };
}

RunConfig run_config_from_json(const json& doc) {
  std::string profile = "desk";
  if (doc.is_object() && doc.contains("profile")) {
    if (!doc.at("profile").is_string()) throw ConfigError("config field 'profile' has the wrong type");
    profile = doc.at("profile").get<std::string>();
  }
  RunConfig c = profile_defaults(profile);
  Reader root(doc, "");
  root.get("profile", c.profile);
  std::string model = to_string(c.model);
  root.get("model", model);
  try {
    c.model = parse_model_kind(model);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config field 'model': ") + e.what());
  }
  root.get("seed", c.seed);
  root.get("threads", c.threads);
  root.get("simpf_k", c.simpf_k);
  root.object("arch", [&](Reader& r) {
    r.get("dim", c.arch.dim);
    r.get("heads", c.arch.heads);
    r.get("layers", c.arch.layers);
    r.get("ffn", c.arch.ffn);
    r.get("conv_channels", c.arch.conv_channels);
    r.get("audio_tokens", c.arch.audio_tokens);
    r.get("patch", c.arch.patch);
    r.get("frames", c.arch.frames);
    r.get("frame_size", c.arch.frame_size);
    r.get("mel_bins", c.arch.mel_bins);
    r.get("bottleneck", c.arch.bottleneck);
  });
  root.object("teacher", [&](Reader& r) {
    r.get("audio_channels", c.teacher.audio_channels);
    r.get("video_channels", c.teacher.video_channels);
    r.get("hidden", c.teacher.hidden);
    r.get("video_input_pool", c.teacher.video_input_pool);
  });
  root.object("dropout", [&](Reader& r) {
    r.get("p_av", c.dropout.p_av);
    r.get("p_a", c.dropout.p_a);
    r.get("p_v", c.dropout.p_v);
  });
  root.object("kd", [&](Reader& r) {
    r.get("enabled", c.kd.enabled);
    r.get("lambda", c.kd.loss.lambda);
    r.get("tau", c.kd.loss.tau);
    r.get("teacher_first", c.kd.loss.teacher_first);
    r.get("audio_teacher", c.kd.audio_teacher);
    r.get("video_teacher", c.kd.video_teacher);
  });
  root.object("optim", [&](Reader& r) {
    r.get("lr", c.optim.lr);
    r.get("batch", c.optim.batch);
    r.get("epochs", c.optim.epochs);
    r.get("patience", c.optim.patience);
    r.get("beta1", c.optim.beta1);
    r.get("beta2", c.optim.beta2);
    r.get("epsilon", c.optim.epsilon);
  });
  root.object("augment", [&](Reader& r) {
    r.get("spec_augment", c.augment.spec_augment);
    r.get("time_masks", c.augment.spec.time_masks);
    r.get("freq_masks", c.augment.spec.freq_masks);
    r.get("max_time_width", c.augment.spec.max_time_width);
    r.get("max_freq_width", c.augment.spec.max_freq_width);
    r.get("color_jitter", c.augment.color_jitter);
    r.get("noise_prob", c.augment.noise_prob);
    r.get("noise_copies", c.augment.noise_copies);
    r.get("noise_snr_min", c.augment.noise_snr_min);
    r.get("noise_snr_max", c.augment.noise_snr_max);
  });
  root.object("corruption", [&](Reader& r) {
    std::string noise = to_string(c.corruption.noise);
    r.get("noise", noise);
    try {
      c.corruption.noise = parse_noise_kind(noise);
    } catch (const Error& e) {
      throw ConfigError(std::string("config field 'corruption.noise': ") + e.what());
    }
    r.get("snrs", c.corruption.snrs);
    r.get("darkness", c.corruption.darkness);
    r.get("variance", c.corruption.variance);
  });
  root.object("data", [&](Reader& r) {
    r.get("source", c.data.source);
    r.get("manifest", c.data.manifest);
    r.get("cache", c.data.cache);
    r.get("train", c.data.train);
    r.get("val", c.data.val);
    r.get("test", c.data.test);
    r.get("frames", c.data.frames);
    r.get("frame_size", c.data.frame_size);
    r.get("splits", c.data.splits);
    r.get("seed", c.data.seed);
  });
  root.finish();
  c.validate();
  return c;
}

namespace {

// A bare key that is not a top-level field names the unique section field of that name.
std::string qualify(const std::string& key) {
  if (key.find('.') != std::string::npos) return key;
  static const json schema = to_json(RunConfig{});
  if (schema.contains(key)) return key;
  std::string found;
  for (const auto& section : schema.items()) {
    if (!section.value().is_object() || !section.value().contains(key)) continue;
    if (!found.empty()) throw ConfigError("override key '" + key + "' is ambiguous (" + found + " or " + section.key() + ")");
    found = section.key();
  }
  if (found.empty()) throw ConfigError("unknown config field '" + key + "'");
  return found + "." + key;
}

}  // namespace

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not KEY=VALUE");
  const std::string key = qualify(assignment.substr(0, eq));
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (!node->is_object()) throw ConfigError("override key '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& path, const std::vector<std::string>& overrides) {
  json doc = json::object();
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot read config " + path->string());
    doc = json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw ConfigError("config " + path->string() + " is not a JSON object");
    // A run record echoes its config under "config".
    if (doc.contains("config") && doc.contains("environment")) doc = json(doc.at("config"));
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return run_config_from_json(doc);
}

UFFIA_NAMESPACE_END
