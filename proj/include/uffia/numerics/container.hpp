#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "uffia/numerics/nn.hpp"

UFFIA_NAMESPACE_BEGIN

/// One named array inside a Container. Payload bytes are little-endian.
struct ContainerEntry {
  std::string name;
  Shape shape;
  std::string dtype;  // "f32", "f64" or "u8"
  std::vector<std::uint8_t> bytes;
};

/// Binary file: 8-byte magic, u64 header length, JSON header, raw payload.
///
/// Used for checkpoints, cached mel features and packed frame tensors; the
/// `tag` distinguishes them.
class Container {
 public:
  static constexpr int kVersion = 1;

  explicit Container(std::string tag = "checkpoint") : tag_(std::move(tag)) {}

  const std::string& tag() const { return tag_; }
  nlohmann::json& meta() { return meta_; }
  const nlohmann::json& meta() const { return meta_; }

  void add_f32(const std::string& name, const Shape& shape, std::span<const float> values);
  void add_f64(const std::string& name, const Shape& shape, std::span<const double> values);
  void add_u8(const std::string& name, const Shape& shape, std::span<const std::uint8_t> values);
  /// Stores in the native precision of this build.
  void add_real(const std::string& name, const Shape& shape, std::span<const Real> values);

  bool contains(const std::string& name) const;
  const ContainerEntry& entry(const std::string& name) const;
  const std::vector<ContainerEntry>& entries() const { return entries_; }
  /// Reads a float entry converted to Real.
  std::vector<Real> real_values(const std::string& name) const;
  std::vector<std::uint8_t> u8_values(const std::string& name) const;

  void save(const std::filesystem::path& path) const;
  static Container load(const std::filesystem::path& path);

 private:
  std::string tag_;
  nlohmann::json meta_ = nlohmann::json::object();
  std::vector<ContainerEntry> entries_;
};

/// Writes every tensor in `params` under its name.
void save_params(Container& container, const ParamList& params);
/// Copies stored values into the matching tensors. Missing names or shape
/// mismatches raise ParseError.
void load_params(const Container& container, const ParamList& params);

UFFIA_NAMESPACE_END
