#include "uffia/numerics/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>

UFFIA_NAMESPACE_BEGIN

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'U', 'F', 'F', 'I', 'A', 'B', 'I', 'N'};

template <typename T>
std::vector<std::uint8_t> to_bytes(std::span<const T> values) {
  std::vector<std::uint8_t> bytes(values.size_bytes());
  if (!bytes.empty()) std::memcpy(bytes.data(), values.data(), bytes.size());
  return bytes;
}

std::size_t dtype_size(const std::string& dtype) {
  if (dtype == "f32") return 4;
  if (dtype == "f64") return 8;
  if (dtype == "u8") return 1;
  throw ParseError("unknown dtype '" + dtype + "'");
}

}  // namespace

void Container::add_f32(const std::string& name, const Shape& shape, std::span<const float> values) {
  if (static_cast<std::int64_t>(values.size()) != numel(shape)) throw ShapeError("container entry size mismatch: " + name);
  entries_.push_back({name, shape, "f32", to_bytes(values)});
}

void Container::add_f64(const std::string& name, const Shape& shape, std::span<const double> values) {
  if (static_cast<std::int64_t>(values.size()) != numel(shape)) throw ShapeError("container entry size mismatch: " + name);
  entries_.push_back({name, shape, "f64", to_bytes(values)});
}

void Container::add_u8(const std::string& name, const Shape& shape, std::span<const std::uint8_t> values) {
  if (static_cast<std::int64_t>(values.size()) != numel(shape)) throw ShapeError("container entry size mismatch: " + name);
  entries_.push_back({name, shape, "u8", to_bytes(values)});
}

void Container::add_real(const std::string& name, const Shape& shape, std::span<const Real> values) {
#if defined(UFFIA_SINGLE_PRECISION)
  add_f32(name, shape, values);
#else
  add_f64(name, shape, values);
#endif
}

bool Container::contains(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return true;
  }
  return false;
}

const ContainerEntry& Container::entry(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e;
  }
  throw ParseError("container has no entry '" + name + "'");
}

std::vector<Real> Container::real_values(const std::string& name) const {
  const auto& e = entry(name);
  const std::size_t n = static_cast<std::size_t>(numel(e.shape));
  std::vector<Real> out(n);
  if (e.dtype == "f32") {
    std::vector<float> tmp(n);
    std::memcpy(tmp.data(), e.bytes.data(), n * sizeof(float));
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<Real>(tmp[i]);
  } else if (e.dtype == "f64") {
    std::vector<double> tmp(n);
    std::memcpy(tmp.data(), e.bytes.data(), n * sizeof(double));
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<Real>(tmp[i]);
  } else {
    throw ParseError("entry '" + name + "' is not floating point");
  }
  return out;
}

std::vector<std::uint8_t> Container::u8_values(const std::string& name) const {
  const auto& e = entry(name);
  if (e.dtype != "u8") throw ParseError("entry '" + name + "' is not u8");
  return e.bytes;
}

void Container::save(const std::filesystem::path& path) const {
  nlohmann::json header;
  header["format"] = "uffia-container";
  header["version"] = kVersion;
  header["tag"] = tag_;
  header["meta"] = meta_;
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& e : entries_) {
    header["tensors"].push_back(
        {{"name", e.name}, {"shape", e.shape}, {"dtype", e.dtype}, {"offset", offset}, {"nbytes", e.bytes.size()}});
    offset += e.bytes.size();
  }
  const std::string text = header.dump();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  const std::uint64_t length = text.size();
  out.write(kMagic, sizeof(kMagic));
  out.write(reinterpret_cast<const char*>(&length), sizeof(length));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& e : entries_) out.write(reinterpret_cast<const char*>(e.bytes.data()), static_cast<std::streamsize>(e.bytes.size()));
  if (!out) throw InputError("short write to " + path.string());
}

Container Container::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  char magic[8];
  std::uint64_t length = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&length), sizeof(length));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw ParseError(path.string() + ": not a container file");
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) throw ParseError(path.string() + ": truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": bad header: " + e.what());
  }
  if (!header.contains("version")) throw ParseError(path.string() + ": header lacks a version");
  if (header["version"].get<int>() != kVersion) throw ParseError(path.string() + ": unsupported container version");

  Container c(header.value("tag", std::string{}));
  c.meta_ = header.value("meta", nlohmann::json::object());
  for (const auto& t : header.at("tensors")) {
    ContainerEntry e;
    e.name = t.at("name").get<std::string>();
    e.shape = t.at("shape").get<Shape>();
    e.dtype = t.at("dtype").get<std::string>();
    const auto nbytes = t.at("nbytes").get<std::uint64_t>();
    if (nbytes != static_cast<std::uint64_t>(numel(e.shape)) * dtype_size(e.dtype)) {
      throw ParseError(path.string() + ": entry '" + e.name + "' has inconsistent size");
    }
    e.bytes.resize(nbytes);
    in.read(reinterpret_cast<char*>(e.bytes.data()), static_cast<std::streamsize>(nbytes));
    if (!in) throw ParseError(path.string() + ": truncated payload");
    c.entries_.push_back(std::move(e));
  }
  return c;
}

void save_params(Container& container, const ParamList& params) {
  for (const auto& p : params.entries()) container.add_real(p.name, p.tensor.shape(), p.tensor.values());
}

void load_params(const Container& container, const ParamList& params) {
  for (const auto& p : params.entries()) {
    const auto& e = container.entry(p.name);
    if (e.shape != p.tensor.shape()) {
      throw ParseError("checkpoint entry '" + p.name + "' has shape " + shape_to_string(e.shape) + ", model expects " +
                       shape_to_string(p.tensor.shape()));
    }
    const auto values = container.real_values(p.name);
    Tensor t = p.tensor;
    std::copy(values.begin(), values.end(), t.mutable_values().begin());
  }
}

UFFIA_NAMESPACE_END
