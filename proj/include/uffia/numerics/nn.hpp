#pragma once

#include <string>
#include <vector>

#include "uffia/numerics/ops.hpp"
#include "uffia/numerics/rng.hpp"

UFFIA_NAMESPACE_BEGIN

struct NamedParam {
  std::string name;
  Tensor tensor;
};

/// Flat, ordered view of a model's tensors. Order defines checkpoint layout.
class ParamList {
 public:
  void add(std::string name, const Tensor& tensor) { entries_.push_back({std::move(name), tensor}); }
  void append(const ParamList& other, const std::string& prefix);

  const std::vector<NamedParam>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  /// Total extent of tensors that require gradients.
  std::int64_t trainable_count() const;
  void zero_grad();
  const Tensor& find(const std::string& name) const;

 private:
  std::vector<NamedParam> entries_;
};

// Parameter factories. Under MetaModeGuard they return shape-only tensors and
// leave `rng` untouched.
Tensor uniform_param(const Shape& shape, Real bound, Rng& rng);
Tensor normal_param(const Shape& shape, Real stddev, Rng& rng);
Tensor constant_param(const Shape& shape, Real value);
/// Glorot-uniform for a [fan_in x fan_out] weight.
Tensor xavier_param(std::int64_t fan_in, std::int64_t fan_out, Rng& rng);

struct Linear {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]

  static Linear create(std::int64_t in, std::int64_t out, Rng& rng);
  Tensor operator()(const Tensor& x) const { return add_bias(matmul(x, weight), bias); }
  std::int64_t in_features() const { return weight.dim(0); }
  std::int64_t out_features() const { return weight.dim(1); }
  void collect(ParamList& list, const std::string& prefix) const;
};

struct LayerNorm {
  Tensor gain;
  Tensor bias;

  static LayerNorm create(std::int64_t dim);
  Tensor operator()(const Tensor& x) const { return layer_norm(x, gain, bias); }
  void collect(ParamList& list, const std::string& prefix) const;
};

/// Two linear layers with a ReLU in between.
struct Mlp {
  Linear hidden;
  Linear output;

  static Mlp create(std::int64_t in, std::int64_t hidden, std::int64_t out, Rng& rng);
  Tensor operator()(const Tensor& x) const { return output(relu(hidden(x))); }
  void collect(ParamList& list, const std::string& prefix) const;
};

/// Marks every tensor in `list` as frozen (no gradient, excluded from counts).
void freeze(const ParamList& list);

UFFIA_NAMESPACE_END
