#include "uffia/numerics/nn.hpp"

#include <cmath>

UFFIA_NAMESPACE_BEGIN

void ParamList::append(const ParamList& other, const std::string& prefix) {
  for (const auto& p : other.entries_) entries_.push_back({prefix + p.name, p.tensor});
}

std::int64_t ParamList::trainable_count() const {
  std::int64_t total = 0;
  for (const auto& p : entries_) {
    if (p.tensor.requires_grad()) total += p.tensor.numel();
  }
  return total;
}

void ParamList::zero_grad() {
  for (auto& p : entries_) p.tensor.zero_grad();
}

const Tensor& ParamList::find(const std::string& name) const {
  for (const auto& p : entries_) {
    if (p.name == name) return p.tensor;
  }
  throw IndexError("no parameter named '" + name + "'");
}

namespace {

template <typename Draw>
Tensor make_param(const Shape& shape, Draw&& draw) {
  if (meta_mode()) return Tensor::meta(shape, true);
  std::vector<Real> values(static_cast<std::size_t>(numel(shape)));
  for (auto& v : values) v = static_cast<Real>(draw());
  return Tensor::parameter(shape, std::move(values));
}

}  // namespace

Tensor uniform_param(const Shape& shape, Real bound, Rng& rng) {
  return make_param(shape, [&] { return rng.uniform(-bound, bound); });
}

Tensor normal_param(const Shape& shape, Real stddev, Rng& rng) {
  return make_param(shape, [&] { return rng.normal(0.0, stddev); });
}

Tensor constant_param(const Shape& shape, Real value) {
  return make_param(shape, [&] { return value; });
}

Tensor xavier_param(std::int64_t fan_in, std::int64_t fan_out, Rng& rng) {
  const Real bound = static_cast<Real>(std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)));
  return uniform_param({fan_in, fan_out}, bound, rng);
}

Linear Linear::create(std::int64_t in, std::int64_t out, Rng& rng) {
  return Linear{xavier_param(in, out, rng), constant_param({out}, Real(0))};
}

void Linear::collect(ParamList& list, const std::string& prefix) const {
  list.add(prefix + "weight", weight);
  list.add(prefix + "bias", bias);
}

LayerNorm LayerNorm::create(std::int64_t dim) {
  return LayerNorm{constant_param({dim}, Real(1)), constant_param({dim}, Real(0))};
}

void LayerNorm::collect(ParamList& list, const std::string& prefix) const {
  list.add(prefix + "gain", gain);
  list.add(prefix + "bias", bias);
}

Mlp Mlp::create(std::int64_t in, std::int64_t hidden, std::int64_t out, Rng& rng) {
  Linear first = Linear::create(in, hidden, rng);
  Linear second = Linear::create(hidden, out, rng);
  return Mlp{std::move(first), std::move(second)};
}

void Mlp::collect(ParamList& list, const std::string& prefix) const {
  hidden.collect(list, prefix + "hidden.");
  output.collect(list, prefix + "output.");
}

void freeze(const ParamList& list) {
  for (const auto& p : list.entries()) {
    Tensor t = p.tensor;
    t.set_requires_grad(false);
  }
}

UFFIA_NAMESPACE_END
