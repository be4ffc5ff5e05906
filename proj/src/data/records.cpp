#include "uffia/data/records.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "uffia/dsp/wav.hpp"

UFFIA_NAMESPACE_BEGIN

namespace fs = std::filesystem;

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

/// Minimal CSV row split with double-quote support.
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(trim(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  cells.push_back(trim(cell));
  return cells;
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace

const char* class_name(int label) {
  if (label < 0 || label >= static_cast<int>(kClassNames.size())) throw IndexError("class label out of range");
  return kClassNames[static_cast<std::size_t>(label)];
}

int parse_class(const std::string& name) {
  for (std::size_t i = 0; i < kClassNames.size(); ++i) {
    if (lower(name) == lower(kClassNames[i])) return static_cast<int>(i);
  }
  throw ParseError("unknown class label '" + name + "'");
}

std::string to_string(Split split) {
  switch (split) {
    case Split::kUnassigned: return "";
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "";
}

Split parse_split(const std::string& name) {
  const std::string s = lower(name);
  if (s.empty()) return Split::kUnassigned;
  if (s == "train") return Split::kTrain;
  if (s == "val" || s == "validation") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw ParseError("unknown split '" + name + "'");
}

std::vector<ClipRecord> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open manifest " + path.string());
  const fs::path base = path.parent_path();
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ":1: missing header");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_csv(line);
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column[lower(header[i])] = i;
  for (const char* required : {"clip_id", "audio_path", "video_path", "label", "split"}) {
    if (!column.count(required)) throw ParseError(path.string() + ":1: missing column '" + required + "'");
  }
  std::vector<ClipRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    if (cells.size() != header.size()) {
      throw ParseError(where + "expected " + std::to_string(header.size()) + " cells, found " +
                       std::to_string(cells.size()));
    }
    auto get = [&](const char* name) { return cells[column[name]]; };
    ClipRecord rec;
    rec.clip_id = get("clip_id");
    if (rec.clip_id.empty()) throw ParseError(where + "empty clip_id");
    try {
      rec.label = parse_class(get("label"));
      rec.split = parse_split(get("split"));
    } catch (const ParseError& e) {
      throw ParseError(where + e.what());
    }
    rec.audio_path = base / get("audio_path");
    rec.video_path = base / get("video_path");
    if (get("audio_path").empty() || !fs::exists(rec.audio_path)) {
      throw ParseError(where + "audio path '" + get("audio_path") + "' does not exist");
    }
    if (get("video_path").empty() || !fs::exists(rec.video_path)) {
      throw ParseError(where + "video path '" + get("video_path") + "' does not exist");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void write_manifest(const fs::path& path, const std::vector<ClipRecord>& records) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  std::ofstream out(path);
  if (!out) throw InputError("cannot write manifest " + path.string());
  auto rel = [&](const fs::path& p) {
    std::error_code ec;
    const auto r = fs::relative(p, base, ec);
    return (ec || r.empty() ? p : r).generic_string();
  };
  out << "clip_id,audio_path,video_path,label,split\n";
  for (const auto& r : records) {
    out << csv_cell(r.clip_id) << ',' << csv_cell(rel(r.audio_path)) << ',' << csv_cell(rel(r.video_path)) << ','
        << class_name(r.label) << ',' << to_string(r.split) << '\n';
  }
}

std::vector<ClipRecord> scan_class_folders(const fs::path& root) {
  if (!fs::is_directory(root)) throw InputError("not a directory: " + root.string());
  std::vector<ClipRecord> records;
  for (std::size_t label = 0; label < kClassNames.size(); ++label) {
    const fs::path dir = root / kClassNames[label];
    if (!fs::is_directory(dir)) continue;
    std::vector<fs::path> wavs;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && lower(entry.path().extension().string()) == ".wav") wavs.push_back(entry.path());
    }
    std::sort(wavs.begin(), wavs.end());
    for (const auto& wav : wavs) {
      fs::path frames = wav;
      frames.replace_extension();
      if (!fs::is_directory(frames)) throw InputError("no frame directory for " + wav.string());
      ClipRecord rec;
      rec.clip_id = std::string(kClassNames[label]) + "/" + frames.filename().string();
      rec.label = static_cast<int>(label);
      rec.audio_path = wav;
      rec.video_path = frames;
      records.push_back(std::move(rec));
    }
  }
  return records;
}

void load_media(ClipRecord& record, std::int64_t frame_size) {
  record.audio = read_wav(record.audio_path);
  if (fs::is_regular_file(record.video_path)) {
    record.frames = load_packed_frames(record.video_path, frame_size);
    return;
  }
  std::vector<fs::path> pngs;
  for (const auto& entry : fs::directory_iterator(record.video_path)) {
    if (entry.is_regular_file() && lower(entry.path().extension().string()) == ".png") pngs.push_back(entry.path());
  }
  std::sort(pngs.begin(), pngs.end());
  if (pngs.empty()) throw InputError("no PNG frames in " + record.video_path.string());
  NativeFrames frames{static_cast<std::int64_t>(pngs.size()), frame_size, frame_size, {}};
  frames.pixels.reserve(pngs.size() * static_cast<std::size_t>(frames.frame_size()));
  for (const auto& png : pngs) read_png_frame(png, frame_size, frame_size, frames.pixels);
  record.frames = std::move(frames);
}

void make_splits(std::vector<ClipRecord>& records, const std::array<double, 3>& fractions, std::uint64_t seed) {
  for (double f : fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("split fractions must lie in [0, 1]");
  }
  if (std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
  std::array<std::vector<std::size_t>, 4> by_class;
  for (std::size_t i = 0; i < records.size(); ++i) by_class.at(static_cast<std::size_t>(records[i].label)).push_back(i);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    Rng rng = Rng::stream(seed, c);
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    const auto n = static_cast<double>(idx.size());
    const auto n_train = static_cast<std::size_t>(std::llround(fractions[0] * n));
    const auto n_val = std::min(idx.size() - n_train, static_cast<std::size_t>(std::llround(fractions[1] * n)));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      records[idx[i]].split = i < n_train ? Split::kTrain : i < n_train + n_val ? Split::kVal : Split::kTest;
    }
  }
}

std::array<std::size_t, 4> split_counts(const std::vector<ClipRecord>& records) {
  std::array<std::size_t, 4> counts{0, 0, 0, 0};
  for (const auto& r : records) {
    switch (r.split) {
      case Split::kTrain: ++counts[0]; break;
      case Split::kVal: ++counts[1]; break;
      case Split::kTest: ++counts[2]; break;
      case Split::kUnassigned: ++counts[3]; break;
    }
  }
  return counts;
}

UFFIA_NAMESPACE_END
