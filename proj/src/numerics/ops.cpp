#include "uffia/numerics/ops.hpp"

// Route every product through the packed GEMM kernels: the small-size
// coefficient-based path vectorises reductions from the first aligned
// element, so its summation order (and last bits) would follow heap addresses.
#define EIGEN_GEMM_TO_COEFFBASED_THRESHOLD 1
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

UFFIA_NAMESPACE_BEGIN

namespace {

using MatR = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;
using StridedMap = Eigen::Map<MatR, 0, Eigen::OuterStride<>>;
using CStridedMap = Eigen::Map<const MatR, 0, Eigen::OuterStride<>>;

using detail::make_result;
using detail::meta_result;

CMapR cmap(const std::vector<Real>& v, std::int64_t rows, std::int64_t cols) {
  return CMapR(v.data(), rows, cols);
}
MapR map(std::vector<Real>& v, std::int64_t rows, std::int64_t cols) { return MapR(v.data(), rows, cols); }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
}

int normalize_axis(int axis, int rank, const char* op) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw IndexError(std::string(op) + ": axis out of range");
  return axis;
}

struct AxisSplit {
  std::int64_t outer = 1;
  std::int64_t n = 1;
  std::int64_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, int axis) {
  AxisSplit s;
  for (int i = 0; i < axis; ++i) s.outer *= shape[static_cast<std::size_t>(i)];
  s.n = shape[static_cast<std::size_t>(axis)];
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Shape drop_axis(const Shape& shape, int axis) {
  Shape out;
  for (int i = 0; i < static_cast<int>(shape.size()); ++i) {
    if (i != axis) out.push_back(shape[static_cast<std::size_t>(i)]);
  }
  if (out.empty()) out.push_back(1);
  return out;
}

bool wants(const TensorNode& self, std::size_t parent) { return self.parents[parent]->requires_grad; }
std::vector<Real>& pgrad(TensorNode& self, std::size_t parent) { return self.parents[parent]->grad_buffer(); }
const std::vector<Real>& pvalue(const TensorNode& self, std::size_t parent) {
  return self.parents[parent]->value;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  record_op("add", {a.numel()});
  if (detail::any_meta({&a, &b})) return meta_result(a.shape(), {a, b});
  std::vector<Real> out(a.values().begin(), a.values().end());
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (!wants(self, p)) continue;
      auto& g = pgrad(self, p);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  record_op("sub", {a.numel()});
  if (detail::any_meta({&a, &b})) return meta_result(a.shape(), {a, b});
  std::vector<Real> out(a.values().begin(), a.values().end());
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
    if (wants(self, 0)) {
      auto& g = pgrad(self, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants(self, 1)) {
      auto& g = pgrad(self, 1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  record_op("mul", {a.numel()});
  if (detail::any_meta({&a, &b})) return meta_result(a.shape(), {a, b});
  std::vector<Real> out(a.values().begin(), a.values().end());
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
    const auto& av = pvalue(self, 0);
    const auto& bv = pvalue(self, 1);
    if (wants(self, 0)) {
      auto& g = pgrad(self, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bv[i];
    }
    if (wants(self, 1)) {
      auto& g = pgrad(self, 1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, Real factor) {
  record_op("scale", {a.numel()});
  if (a.is_meta()) return meta_result(a.shape(), {a});
  std::vector<Real> out(a.values().begin(), a.values().end());
  for (auto& v : out) v *= factor;
  return make_result(a.shape(), std::move(out), {a}, [factor](TensorNode& self) {
    auto& g = pgrad(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (bias.rank() != 1 || bias.dim(0) != x.dim(-1)) {
    throw ShapeError("add_bias: bias " + shape_to_string(bias.shape()) + " does not match trailing axis of " +
                     shape_to_string(x.shape()));
  }
  record_op("add_bias", {x.numel()});
  if (detail::any_meta({&x, &bias})) return meta_result(x.shape(), {x, bias});
  const std::int64_t n = bias.dim(0);
  std::vector<Real> out(x.values().begin(), x.values().end());
  const auto bv = bias.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i % static_cast<std::size_t>(n)];
  return make_result(x.shape(), std::move(out), {x, bias}, [n](TensorNode& self) {
    if (wants(self, 0)) {
      auto& g = pgrad(self, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants(self, 1)) {
      auto& g = pgrad(self, 1);
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % static_cast<std::size_t>(n)] += self.grad[i];
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_to_string(a.shape()) + " and " +
                     shape_to_string(b.shape()));
  }
  const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  record_op("matmul", {m, k, n});
  if (detail::any_meta({&a, &b})) return meta_result({m, n}, {a, b});
  std::vector<Real> out(static_cast<std::size_t>(m * n));
  map(out, m, n).noalias() = cmap(a.node()->value, m, k) * cmap(b.node()->value, k, n);
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n](TensorNode& self) {
    auto dout = cmap(self.grad, m, n);
    if (wants(self, 0)) map(pgrad(self, 0), m, k).noalias() += dout * cmap(pvalue(self, 1), k, n).transpose();
    if (wants(self, 1)) map(pgrad(self, 1), k, n).noalias() += cmap(pvalue(self, 0), m, k).transpose() * dout;
  });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose expects a matrix");
  const std::int64_t m = a.dim(0), n = a.dim(1);
  record_op("transpose", {a.numel()});
  if (a.is_meta()) return meta_result({n, m}, {a});
  std::vector<Real> out(static_cast<std::size_t>(m * n));
  map(out, n, m) = cmap(a.node()->value, m, n).transpose();
  return make_result({n, m}, std::move(out), {a}, [m, n](TensorNode& self) {
    map(pgrad(self, 0), m, n) += cmap(self.grad, n, m).transpose();
  });
}

Tensor reshape(const Tensor& a, const Shape& shape) {
  if (numel(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + shape_to_string(a.shape()) + " as " + shape_to_string(shape));
  }
  record_op("reshape", {a.numel()});
  if (a.is_meta()) return meta_result(shape, {a});
  std::vector<Real> out(a.values().begin(), a.values().end());
  return make_result(shape, std::move(out), {a}, [](TensorNode& self) {
    auto& g = pgrad(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor relu(const Tensor& x) {
  record_op("relu", {x.numel()});
  if (x.is_meta()) return meta_result(x.shape(), {x});
  std::vector<Real> out(x.values().begin(), x.values().end());
  for (auto& v : out) v = v > Real(0) ? v : Real(0);
  return make_result(x.shape(), std::move(out), {x}, [](TensorNode& self) {
    const auto& xv = pvalue(self, 0);
    auto& g = pgrad(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (xv[i] > Real(0)) g[i] += self.grad[i];
    }
  });
}

Tensor gelu(const Tensor& x) {
  record_op("gelu", {x.numel()});
  if (x.is_meta()) return meta_result(x.shape(), {x});
  constexpr Real kInvSqrt2 = Real(0.70710678118654752440);
  std::vector<Real> out(x.values().begin(), x.values().end());
  for (auto& v : out) v = Real(0.5) * v * (Real(1) + std::erf(v * kInvSqrt2));
  return make_result(x.shape(), std::move(out), {x}, [](TensorNode& self) {
    constexpr Real kInvSqrt2 = Real(0.70710678118654752440);
    const Real kInvSqrt2Pi = Real(1.0 / std::sqrt(2.0 * std::numbers::pi));
    const auto& xv = pvalue(self, 0);
    auto& g = pgrad(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Real v = xv[i];
      const Real cdf = Real(0.5) * (Real(1) + std::erf(v * kInvSqrt2));
      const Real pdf = kInvSqrt2Pi * std::exp(Real(-0.5) * v * v);
      g[i] += self.grad[i] * (cdf + v * pdf);
    }
  });
}

namespace {

void check_finite(std::span<const Real> values, const char* op) {
  for (auto v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite input");
  }
}

}  // namespace

Tensor softmax(const Tensor& x, int axis) {
  axis = normalize_axis(axis, x.rank(), "softmax");
  record_op("softmax", {x.numel()});
  if (x.is_meta()) return meta_result(x.shape(), {x});
  check_finite(x.values(), "softmax");
  const AxisSplit s = split_axis(x.shape(), axis);
  const auto xv = x.values();
  std::vector<Real> out(xv.size());
  for (std::int64_t o = 0; o < s.outer; ++o) {
    for (std::int64_t in = 0; in < s.inner; ++in) {
      const std::int64_t base = o * s.n * s.inner + in;
      Real mx = -std::numeric_limits<Real>::infinity();
      for (std::int64_t j = 0; j < s.n; ++j) mx = std::max(mx, xv[base + j * s.inner]);
      Real total = 0;
      for (std::int64_t j = 0; j < s.n; ++j) {
        const Real e = std::exp(xv[base + j * s.inner] - mx);
        out[base + j * s.inner] = e;
        total += e;
      }
      for (std::int64_t j = 0; j < s.n; ++j) out[base + j * s.inner] /= total;
    }
  }
  return make_result(x.shape(), std::move(out), {x}, [s](TensorNode& self) {
    auto& g = pgrad(self, 0);
    const auto& y = self.value;
    for (std::int64_t o = 0; o < s.outer; ++o) {
      for (std::int64_t in = 0; in < s.inner; ++in) {
        const std::int64_t base = o * s.n * s.inner + in;
        Real dot = 0;
        for (std::int64_t j = 0; j < s.n; ++j) dot += self.grad[base + j * s.inner] * y[base + j * s.inner];
        for (std::int64_t j = 0; j < s.n; ++j) {
          const auto idx = base + j * s.inner;
          g[idx] += y[idx] * (self.grad[idx] - dot);
        }
      }
    }
  });
}

Tensor log_softmax(const Tensor& x, int axis) {
  axis = normalize_axis(axis, x.rank(), "log_softmax");
  record_op("log_softmax", {x.numel()});
  if (x.is_meta()) return meta_result(x.shape(), {x});
  check_finite(x.values(), "log_softmax");
  const AxisSplit s = split_axis(x.shape(), axis);
  const auto xv = x.values();
  std::vector<Real> out(xv.size());
  for (std::int64_t o = 0; o < s.outer; ++o) {
    for (std::int64_t in = 0; in < s.inner; ++in) {
      const std::int64_t base = o * s.n * s.inner + in;
      Real mx = -std::numeric_limits<Real>::infinity();
      for (std::int64_t j = 0; j < s.n; ++j) mx = std::max(mx, xv[base + j * s.inner]);
      Real total = 0;
      for (std::int64_t j = 0; j < s.n; ++j) total += std::exp(xv[base + j * s.inner] - mx);
      const Real lse = mx + std::log(total);
      for (std::int64_t j = 0; j < s.n; ++j) out[base + j * s.inner] = xv[base + j * s.inner] - lse;
    }
  }
  return make_result(x.shape(), std::move(out), {x}, [s](TensorNode& self) {
    auto& g = pgrad(self, 0);
    const auto& y = self.value;
    for (std::int64_t o = 0; o < s.outer; ++o) {
      for (std::int64_t in = 0; in < s.inner; ++in) {
        const std::int64_t base = o * s.n * s.inner + in;
        Real total = 0;
        for (std::int64_t j = 0; j < s.n; ++j) total += self.grad[base + j * s.inner];
        for (std::int64_t j = 0; j < s.n; ++j) {
          const auto idx = base + j * s.inner;
          g[idx] += self.grad[idx] - std::exp(y[idx]) * total;
        }
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, Real eps) {
  const std::int64_t d = x.dim(-1);
  if (d < 2) throw ShapeError("layer_norm needs a feature axis of at least 2");
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) throw ShapeError("layer_norm: gain/bias must be [d]");
  record_op("layer_norm", {x.numel()});
  if (detail::any_meta({&x, &gain, &bias})) return meta_result(x.shape(), {x, gain, bias});
  const std::int64_t rows = x.numel() / d;
  const auto xv = x.values();
  const auto gv = gain.values();
  const auto bv = bias.values();
  std::vector<Real> out(xv.size());
  auto normalized = std::make_shared<std::vector<Real>>(xv.size());
  auto inv_std = std::make_shared<std::vector<Real>>(static_cast<std::size_t>(rows));
  for (std::int64_t r = 0; r < rows; ++r) {
    const Real* row = xv.data() + r * d;
    Real mu = 0;
    for (std::int64_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<Real>(d);
    Real var = 0;
    for (std::int64_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<Real>(d);
    const Real istd = Real(1) / std::sqrt(var + eps);
    (*inv_std)[r] = istd;
    for (std::int64_t j = 0; j < d; ++j) {
      const Real nhat = (row[j] - mu) * istd;
      (*normalized)[r * d + j] = nhat;
      out[r * d + j] = nhat * gv[j] + bv[j];
    }
  }
  return make_result(x.shape(), std::move(out), {x, gain, bias}, [d, rows, normalized, inv_std](TensorNode& self) {
    const auto& gv = pvalue(self, 1);
    const auto& xhat = *normalized;
    if (wants(self, 0)) {
      auto& g = pgrad(self, 0);
      std::vector<Real> dxhat(static_cast<std::size_t>(d));
      for (std::int64_t r = 0; r < rows; ++r) {
        Real mean_d = 0, mean_dx = 0;
        for (std::int64_t j = 0; j < d; ++j) {
          dxhat[j] = self.grad[r * d + j] * gv[j];
          mean_d += dxhat[j];
          mean_dx += dxhat[j] * xhat[r * d + j];
        }
        mean_d /= static_cast<Real>(d);
        mean_dx /= static_cast<Real>(d);
        const Real istd = (*inv_std)[r];
        for (std::int64_t j = 0; j < d; ++j) {
          g[r * d + j] += istd * (dxhat[j] - mean_d - xhat[r * d + j] * mean_dx);
        }
      }
    }
    if (wants(self, 1)) {
      auto& g = pgrad(self, 1);
      for (std::int64_t i = 0; i < rows * d; ++i) g[i % d] += self.grad[i] * xhat[i];
    }
    if (wants(self, 2)) {
      auto& g = pgrad(self, 2);
      for (std::int64_t i = 0; i < rows * d; ++i) g[i % d] += self.grad[i];
    }
  });
}

Tensor sum(const Tensor& x) {
  record_op("sum", {x.numel()});
  if (x.is_meta()) return meta_result({1}, {x});
  Real total = 0;
  for (auto v : x.values()) total += v;
  return make_result({1}, {total}, {x}, [](TensorNode& self) {
    auto& g = pgrad(self, 0);
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), Real(1) / static_cast<Real>(x.numel())); }

Tensor reduce_mean(const Tensor& x, int axis) {
  axis = normalize_axis(axis, x.rank(), "reduce_mean");
  const Shape out_shape = drop_axis(x.shape(), axis);
  record_op("reduce_mean", {x.numel()});
  if (x.is_meta()) return meta_result(out_shape, {x});
  const AxisSplit s = split_axis(x.shape(), axis);
  const auto xv = x.values();
  std::vector<Real> out(static_cast<std::size_t>(s.outer * s.inner), Real(0));
  const Real inv = Real(1) / static_cast<Real>(s.n);
  for (std::int64_t o = 0; o < s.outer; ++o)
    for (std::int64_t j = 0; j < s.n; ++j)
      for (std::int64_t in = 0; in < s.inner; ++in) out[o * s.inner + in] += xv[(o * s.n + j) * s.inner + in];
  for (auto& v : out) v *= inv;
  return make_result(out_shape, std::move(out), {x}, [s, inv](TensorNode& self) {
    auto& g = pgrad(self, 0);
    for (std::int64_t o = 0; o < s.outer; ++o)
      for (std::int64_t j = 0; j < s.n; ++j)
        for (std::int64_t in = 0; in < s.inner; ++in) g[(o * s.n + j) * s.inner + in] += inv * self.grad[o * s.inner + in];
  });
}

Tensor reduce_max(const Tensor& x, int axis) {
  axis = normalize_axis(axis, x.rank(), "reduce_max");
  const Shape out_shape = drop_axis(x.shape(), axis);
  record_op("reduce_max", {x.numel()});
  if (x.is_meta()) return meta_result(out_shape, {x});
  const AxisSplit s = split_axis(x.shape(), axis);
  const auto xv = x.values();
  std::vector<Real> out(static_cast<std::size_t>(s.outer * s.inner));
  auto argmax = std::make_shared<std::vector<std::int64_t>>(out.size());
  for (std::int64_t o = 0; o < s.outer; ++o) {
    for (std::int64_t in = 0; in < s.inner; ++in) {
      std::int64_t best = (o * s.n) * s.inner + in;
      for (std::int64_t j = 1; j < s.n; ++j) {
        const std::int64_t idx = (o * s.n + j) * s.inner + in;
        if (xv[idx] > xv[best]) best = idx;
      }
      out[o * s.inner + in] = xv[best];
      (*argmax)[o * s.inner + in] = best;
    }
  }
  return make_result(out_shape, std::move(out), {x}, [argmax](TensorNode& self) {
    auto& g = pgrad(self, 0);
    for (std::size_t i = 0; i < argmax->size(); ++i) g[(*argmax)[i]] += self.grad[i];
  });
}

Tensor slice(const Tensor& x, int axis, std::int64_t begin, std::int64_t length) {
  axis = normalize_axis(axis, x.rank(), "slice");
  if (begin < 0 || length <= 0 || begin + length > x.dim(axis)) {
    throw IndexError("slice: range [" + std::to_string(begin) + ", " + std::to_string(begin + length) +
                     ") outside axis of extent " + std::to_string(x.dim(axis)));
  }
  Shape out_shape = x.shape();
  out_shape[static_cast<std::size_t>(axis)] = length;
  record_op("slice", {numel(out_shape)});
  if (x.is_meta()) return meta_result(out_shape, {x});
  const AxisSplit s = split_axis(x.shape(), axis);
  const auto xv = x.values();
  std::vector<Real> out(static_cast<std::size_t>(numel(out_shape)));
  for (std::int64_t o = 0; o < s.outer; ++o) {
    const Real* src = xv.data() + (o * s.n + begin) * s.inner;
    std::copy(src, src + length * s.inner, out.begin() + o * length * s.inner);
  }
  return make_result(out_shape, std::move(out), {x}, [s, begin, length](TensorNode& self) {
    auto& g = pgrad(self, 0);
    for (std::int64_t o = 0; o < s.outer; ++o) {
      Real* dst = g.data() + (o * s.n + begin) * s.inner;
      const Real* src = self.grad.data() + o * length * s.inner;
      for (std::int64_t i = 0; i < length * s.inner; ++i) dst[i] += src[i];
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  axis = normalize_axis(axis, parts[0].rank(), "concat");
  Shape out_shape = parts[0].shape();
  std::int64_t total = 0;
  bool meta = false;
  for (const auto& p : parts) {
    if (p.rank() != parts[0].rank()) throw ShapeError("concat: rank mismatch");
    for (int i = 0; i < p.rank(); ++i) {
      if (i != axis && p.dim(i) != out_shape[static_cast<std::size_t>(i)]) {
        throw ShapeError("concat: shape mismatch " + shape_to_string(p.shape()) + " vs " +
                         shape_to_string(parts[0].shape()));
      }
    }
    total += p.dim(axis);
    meta = meta || p.is_meta();
  }
  out_shape[static_cast<std::size_t>(axis)] = total;
  record_op("concat", {numel(out_shape)});
  if (meta) return meta_result(out_shape, parts);
  const AxisSplit s = split_axis(out_shape, axis);
  std::vector<Real> out(static_cast<std::size_t>(numel(out_shape)));
  std::vector<std::int64_t> extents;
  std::int64_t offset = 0;
  for (const auto& p : parts) {
    const std::int64_t len = p.dim(axis);
    const auto pv = p.values();
    for (std::int64_t o = 0; o < s.outer; ++o) {
      std::copy(pv.begin() + o * len * s.inner, pv.begin() + (o + 1) * len * s.inner,
                out.begin() + (o * s.n + offset) * s.inner);
    }
    extents.push_back(len);
    offset += len;
  }
  return make_result(out_shape, std::move(out), parts, [s, extents](TensorNode& self) {
    std::int64_t offset = 0;
    for (std::size_t p = 0; p < extents.size(); ++p) {
      const std::int64_t len = extents[p];
      if (wants(self, p)) {
        auto& g = pgrad(self, p);
        for (std::int64_t o = 0; o < s.outer; ++o) {
          const Real* src = self.grad.data() + (o * s.n + offset) * s.inner;
          Real* dst = g.data() + o * len * s.inner;
          for (std::int64_t i = 0; i < len * s.inner; ++i) dst[i] += src[i];
        }
      }
      offset += len;
    }
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw ShapeError("cross_entropy expects [B x C] logits");
  const std::int64_t batch = logits.dim(0), classes = logits.dim(1);
  if (static_cast<std::int64_t>(labels.size()) != batch) throw ShapeError("cross_entropy: label count mismatch");
  for (int label : labels) {
    if (label < 0 || label >= classes) {
      throw IndexError("cross_entropy: label " + std::to_string(label) + " outside [0, " + std::to_string(classes) + ")");
    }
  }
  record_op("cross_entropy", {batch, classes});
  if (logits.is_meta()) return meta_result({1}, {logits});
  check_finite(logits.values(), "cross_entropy");
  const auto lv = logits.values();
  auto probs = std::make_shared<std::vector<Real>>(lv.size());
  Real loss = 0;
  for (std::int64_t b = 0; b < batch; ++b) {
    const Real* row = lv.data() + b * classes;
    Real mx = *std::max_element(row, row + classes);
    Real total = 0;
    for (std::int64_t c = 0; c < classes; ++c) total += std::exp(row[c] - mx);
    const Real lse = mx + std::log(total);
    for (std::int64_t c = 0; c < classes; ++c) (*probs)[b * classes + c] = std::exp(row[c] - lse);
    loss += lse - row[labels[b]];
  }
  loss /= static_cast<Real>(batch);
  std::vector<int> label_copy(labels.begin(), labels.end());
  return make_result({1}, {loss}, {logits}, [probs, label_copy, batch, classes](TensorNode& self) {
    auto& g = pgrad(self, 0);
    const Real factor = self.grad[0] / static_cast<Real>(batch);
    for (std::int64_t b = 0; b < batch; ++b) {
      for (std::int64_t c = 0; c < classes; ++c) {
        const Real target = c == label_copy[b] ? Real(1) : Real(0);
        g[b * classes + c] += factor * ((*probs)[b * classes + c] - target);
      }
    }
  });
}

namespace {

struct ConvGeometry {
  std::int64_t cin, t, h, w;
  std::int64_t cout, kt, kh, kw;
  std::int64_t positions() const { return t * h * w; }
  std::int64_t patch() const { return cin * kt * kh * kw; }
};

// Visits every (column row, position, source index) triple of the im2col
// matrix; source is -1 where zero padding applies.
template <typename F>
void for_each_tap(const ConvGeometry& g, Padding padding, F&& visit) {
  const std::int64_t pt = g.kt / 2, ph = g.kh / 2, pw = g.kw / 2;
  std::int64_t row = 0;
  for (std::int64_t c = 0; c < g.cin; ++c) {
    for (std::int64_t dt = 0; dt < g.kt; ++dt) {
      for (std::int64_t dh = 0; dh < g.kh; ++dh) {
        for (std::int64_t dw = 0; dw < g.kw; ++dw, ++row) {
          std::int64_t pos = 0;
          for (std::int64_t t = 0; t < g.t; ++t) {
            std::int64_t st = t + dt - pt;
            bool t_out = st < 0 || st >= g.t;
            if (padding == Padding::kReplicate) st = std::clamp<std::int64_t>(st, 0, g.t - 1);
            for (std::int64_t y = 0; y < g.h; ++y) {
              std::int64_t sy = y + dh - ph;
              bool y_out = sy < 0 || sy >= g.h;
              if (padding == Padding::kReplicate) sy = std::clamp<std::int64_t>(sy, 0, g.h - 1);
              const std::int64_t base = ((c * g.t + st) * g.h + sy) * g.w;
              for (std::int64_t x = 0; x < g.w; ++x, ++pos) {
                std::int64_t sx = x + dw - pw;
                const bool x_out = sx < 0 || sx >= g.w;
                if (padding == Padding::kReplicate) {
                  sx = std::clamp<std::int64_t>(sx, 0, g.w - 1);
                  visit(row, pos, base + sx);
                } else {
                  visit(row, pos, (t_out || y_out || x_out) ? -1 : base + sx);
                }
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv3d(const Tensor& x, const Tensor& weight, const Tensor& bias, Padding padding) {
  if (x.rank() != 4 || weight.rank() != 5 || bias.rank() != 1) {
    throw ShapeError("conv3d expects x [C,T,H,W], weight [O,C,kt,kh,kw], bias [O]");
  }
  const ConvGeometry geo{x.dim(0), x.dim(1), x.dim(2), x.dim(3),
                         weight.dim(0), weight.dim(2), weight.dim(3), weight.dim(4)};
  if (weight.dim(1) != geo.cin || bias.dim(0) != geo.cout) throw ShapeError("conv3d: channel mismatch");
  if (geo.kt % 2 == 0 || geo.kh % 2 == 0 || geo.kw % 2 == 0) throw ShapeError("conv3d: kernel extents must be odd");
  const Shape out_shape{geo.cout, geo.t, geo.h, geo.w};
  record_op("conv", {geo.cout, geo.patch(), geo.positions()});
  if (detail::any_meta({&x, &weight, &bias})) return meta_result(out_shape, {x, weight, bias});

  const std::int64_t K = geo.patch(), P = geo.positions();
  auto cols = std::make_shared<std::vector<Real>>(static_cast<std::size_t>(K * P));
  const auto xv = x.values();
  for_each_tap(geo, padding, [&](std::int64_t row, std::int64_t pos, std::int64_t src) {
    (*cols)[row * P + pos] = src < 0 ? Real(0) : xv[src];
  });
  std::vector<Real> out(static_cast<std::size_t>(geo.cout * P));
  auto out_map = map(out, geo.cout, P);
  out_map.noalias() = cmap(weight.node()->value, geo.cout, K) * cmap(*cols, K, P);
  const auto bv = bias.values();
  for (std::int64_t o = 0; o < geo.cout; ++o) out_map.row(o).array() += bv[o];

  return make_result(out_shape, std::move(out), {x, weight, bias}, [geo, padding, cols](TensorNode& self) {
    const std::int64_t K = geo.patch(), P = geo.positions();
    auto dout = cmap(self.grad, geo.cout, P);
    if (wants(self, 1)) map(pgrad(self, 1), geo.cout, K).noalias() += dout * cmap(*cols, K, P).transpose();
    if (wants(self, 2)) {
      auto& g = pgrad(self, 2);
      const Real* d = self.grad.data();
      for (std::int64_t o = 0; o < geo.cout; ++o) {
        Real total = 0;
        for (std::int64_t p = 0; p < P; ++p) total += d[o * P + p];
        g[o] += total;
      }
    }
    if (wants(self, 0)) {
      std::vector<Real> dcols(static_cast<std::size_t>(K * P));
      map(dcols, K, P).noalias() = cmap(pvalue(self, 1), geo.cout, K).transpose() * dout;
      auto& g = pgrad(self, 0);
      for_each_tap(geo, padding, [&](std::int64_t row, std::int64_t pos, std::int64_t src) {
        if (src >= 0) g[src] += dcols[row * P + pos];
      });
    }
  });
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, Padding padding) {
  if (x.rank() != 3 || weight.rank() != 4) throw ShapeError("conv2d expects x [C,H,W], weight [O,C,kh,kw]");
  const Tensor x4 = reshape(x, {x.dim(0), 1, x.dim(1), x.dim(2)});
  const Tensor w5 = reshape(weight, {weight.dim(0), weight.dim(1), 1, weight.dim(2), weight.dim(3)});
  const Tensor y = conv3d(x4, w5, bias, padding);
  return reshape(y, {y.dim(0), y.dim(2), y.dim(3)});
}

Tensor avg_pool3d(const Tensor& x, std::int64_t kt, std::int64_t kh, std::int64_t kw) {
  if (x.rank() != 4) throw ShapeError("avg_pool3d expects [C,T,H,W]");
  if (kt < 1 || kh < 1 || kw < 1) throw ShapeError("avg_pool3d: kernel must be positive");
  const std::int64_t c = x.dim(0), t = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::int64_t ot = t / kt, oh = h / kh, ow = w / kw;
  if (ot < 1 || oh < 1 || ow < 1) throw ShapeError("avg_pool3d: kernel larger than input " + shape_to_string(x.shape()));
  const Shape out_shape{c, ot, oh, ow};
  record_op("avg_pool", {c * ot * oh * ow * kt * kh * kw});
  if (x.is_meta()) return meta_result(out_shape, {x});
  const auto xv = x.values();
  const Real inv = Real(1) / static_cast<Real>(kt * kh * kw);
  std::vector<Real> out(static_cast<std::size_t>(numel(out_shape)), Real(0));
  auto visit = [=](auto&& fn) {
    std::int64_t o_idx = 0;
    for (std::int64_t ci = 0; ci < c; ++ci)
      for (std::int64_t a = 0; a < ot; ++a)
        for (std::int64_t b = 0; b < oh; ++b)
          for (std::int64_t d = 0; d < ow; ++d, ++o_idx)
            for (std::int64_t i = 0; i < kt; ++i)
              for (std::int64_t j = 0; j < kh; ++j)
                for (std::int64_t k = 0; k < kw; ++k)
                  fn(o_idx, ((ci * t + a * kt + i) * h + b * kh + j) * w + d * kw + k);
  };
  visit([&](std::int64_t o, std::int64_t src) { out[o] += xv[src] * inv; });
  return make_result(out_shape, std::move(out), {x}, [visit, inv](TensorNode& self) {
    auto& g = pgrad(self, 0);
    visit([&](std::int64_t o, std::int64_t src) { g[src] += self.grad[o] * inv; });
  });
}

Tensor avg_pool2d(const Tensor& x, std::int64_t kh, std::int64_t kw) {
  if (x.rank() != 3) throw ShapeError("avg_pool2d expects [C,H,W]");
  const Tensor y = avg_pool3d(reshape(x, {x.dim(0), 1, x.dim(1), x.dim(2)}), 1, kh, kw);
  return reshape(y, {y.dim(0), y.dim(2), y.dim(3)});
}

Tensor window_max_mean(const Tensor& x, std::int64_t windows) {
  if (x.rank() != 2) throw ShapeError("window_max_mean expects [T x C]");
  const std::int64_t t = x.dim(0), c = x.dim(1);
  if (windows < 1 || windows > t) {
    throw ShapeError("window_max_mean: cannot split " + std::to_string(t) + " steps into " +
                     std::to_string(windows) + " windows");
  }
  record_op("window_max_mean", {t, c});
  if (x.is_meta()) return meta_result({windows, c}, {x});
  const auto xv = x.values();
  std::vector<Real> out(static_cast<std::size_t>(windows * c));
  auto argmax = std::make_shared<std::vector<std::int64_t>>(out.size());
  for (std::int64_t wi = 0; wi < windows; ++wi) {
    const std::int64_t lo = wi * t / windows, hi = (wi + 1) * t / windows;
    for (std::int64_t ch = 0; ch < c; ++ch) {
      Real total = 0;
      std::int64_t best = lo;
      for (std::int64_t s = lo; s < hi; ++s) {
        total += xv[s * c + ch];
        if (xv[s * c + ch] > xv[best * c + ch]) best = s;
      }
      out[wi * c + ch] = xv[best * c + ch] + total / static_cast<Real>(hi - lo);
      (*argmax)[wi * c + ch] = best;
    }
  }
  return make_result({windows, c}, std::move(out), {x}, [t, c, windows, argmax](TensorNode& self) {
    auto& g = pgrad(self, 0);
    for (std::int64_t wi = 0; wi < windows; ++wi) {
      const std::int64_t lo = wi * t / windows, hi = (wi + 1) * t / windows;
      const Real inv = Real(1) / static_cast<Real>(hi - lo);
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const Real gv = self.grad[wi * c + ch];
        g[(*argmax)[wi * c + ch] * c + ch] += gv;
        for (std::int64_t s = lo; s < hi; ++s) g[s * c + ch] += gv * inv;
      }
    }
  });
}

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads, Real scale_factor,
                            std::vector<Tensor>* weights_out) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) throw ShapeError("attention expects token matrices");
  const std::int64_t n = q.dim(0), m = k.dim(0), d = q.dim(1);
  if (k.dim(1) != d || v.dim(1) != d) throw ShapeError("attention: token dimensions differ");
  if (v.dim(0) != m) throw ShapeError("attention: key and value counts differ");
  if (heads < 1 || d % heads != 0) throw ShapeError("attention: dimension not divisible by head count");
  const std::int64_t dh = d / heads;
  record_op("attention", {heads, n, m, dh});
  if (detail::any_meta({&q, &k, &v})) return meta_result({n, d}, {q, k, v});

  auto probs = std::make_shared<std::vector<Real>>(static_cast<std::size_t>(heads * n * m));
  std::vector<Real> out(static_cast<std::size_t>(n * d));
  const Real* qp = q.values().data();
  const Real* kp = k.values().data();
  const Real* vp = v.values().data();
  for (int h = 0; h < heads; ++h) {
    CStridedMap qh(qp + h * dh, n, dh, Eigen::OuterStride<>(d));
    CStridedMap kh(kp + h * dh, m, dh, Eigen::OuterStride<>(d));
    CStridedMap vh(vp + h * dh, m, dh, Eigen::OuterStride<>(d));
    MapR a(probs->data() + h * n * m, n, m);
    a.noalias() = scale_factor * (qh * kh.transpose());
    // Scalar loops: Eigen's vectorised exp and sums depend on data alignment.
    for (std::int64_t i = 0; i < n; ++i) {
      Real* row = a.data() + i * m;
      const Real mx = *std::max_element(row, row + m);
      Real total = 0;
      for (std::int64_t j = 0; j < m; ++j) total += (row[j] = std::exp(row[j] - mx));
      for (std::int64_t j = 0; j < m; ++j) row[j] /= total;
    }
    StridedMap oh(out.data() + h * dh, n, dh, Eigen::OuterStride<>(d));
    oh.noalias() = a * vh;
    if (weights_out) {
      weights_out->push_back(Tensor::from_values({n, m}, std::vector<Real>(a.data(), a.data() + n * m)));
    }
  }
  return make_result({n, d}, std::move(out), {q, k, v}, [n, m, d, dh, heads, scale_factor, probs](TensorNode& self) {
    const Real* qp = pvalue(self, 0).data();
    const Real* kp = pvalue(self, 1).data();
    const Real* vp = pvalue(self, 2).data();
    Real* dq = wants(self, 0) ? pgrad(self, 0).data() : nullptr;
    Real* dk = wants(self, 1) ? pgrad(self, 1).data() : nullptr;
    Real* dv = wants(self, 2) ? pgrad(self, 2).data() : nullptr;
    MatR da(n, m), ds(n, m);
    for (int h = 0; h < heads; ++h) {
      CStridedMap qh(qp + h * dh, n, dh, Eigen::OuterStride<>(d));
      CStridedMap kh(kp + h * dh, m, dh, Eigen::OuterStride<>(d));
      CStridedMap vh(vp + h * dh, m, dh, Eigen::OuterStride<>(d));
      CStridedMap doh(self.grad.data() + h * dh, n, dh, Eigen::OuterStride<>(d));
      CMapR a(probs->data() + h * n * m, n, m);
      if (dv) StridedMap(dv + h * dh, m, dh, Eigen::OuterStride<>(d)).noalias() += a.transpose() * doh;
      if (!dq && !dk) continue;
      da.noalias() = doh * vh.transpose();
      for (std::int64_t i = 0; i < n; ++i) {
        const Real* ar = a.data() + i * m;
        const Real* dar = da.data() + i * m;
        Real* dsr = ds.data() + i * m;
        Real dot = 0;
        for (std::int64_t j = 0; j < m; ++j) dot += dar[j] * ar[j];
        for (std::int64_t j = 0; j < m; ++j) dsr[j] = ar[j] * (dar[j] - dot);
      }
      if (dq) StridedMap(dq + h * dh, n, dh, Eigen::OuterStride<>(d)).noalias() += scale_factor * (ds * kh);
      if (dk) StridedMap(dk + h * dh, m, dh, Eigen::OuterStride<>(d)).noalias() += scale_factor * (ds.transpose() * qh);
    }
  });
}

UFFIA_NAMESPACE_END
