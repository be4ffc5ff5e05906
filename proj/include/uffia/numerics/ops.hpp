#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "uffia/numerics/tensor.hpp"

UFFIA_NAMESPACE_BEGIN

// Differentiable primitives. Apart from add_bias (trailing-axis bias), no op
// broadcasts: operands of elementwise ops must have identical shapes.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Real factor);
/// x[..., n] + bias[n]
Tensor add_bias(const Tensor& x, const Tensor& bias);

/// a[m x k] * b[k x n]
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, const Shape& shape);

Tensor relu(const Tensor& x);
/// Exact (erf-based) GELU.
Tensor gelu(const Tensor& x);

/// Max-subtracted softmax along `axis`. NaN input raises NumericError.
Tensor softmax(const Tensor& x, int axis);
Tensor log_softmax(const Tensor& x, int axis);

/// Normalises over the last axis, then applies gain and bias (both [d]).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, Real eps = Real(1e-5));

/// Sum of all entries, returned as shape [1].
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Reductions that drop `axis`. A rank-1 input yields shape [1].
Tensor reduce_mean(const Tensor& x, int axis);
Tensor reduce_max(const Tensor& x, int axis);

Tensor slice(const Tensor& x, int axis, std::int64_t begin, std::int64_t length);
Tensor concat(const std::vector<Tensor>& parts, int axis);

/// Mean over the batch of -log softmax(logits)[label]; logits [B x C].
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

enum class Padding { kZero, kReplicate };

/// 'Same'-size stride-1 convolution over [Cin x T x H x W] with odd kernel extents.
/// weight: [Cout x Cin x kt x kh x kw], bias: [Cout].
Tensor conv3d(const Tensor& x, const Tensor& weight, const Tensor& bias, Padding padding);
/// conv3d on [Cin x H x W] with weight [Cout x Cin x kh x kw].
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, Padding padding);

/// Non-overlapping average pooling of [C x T x H x W]; trailing remainders are dropped.
Tensor avg_pool3d(const Tensor& x, std::int64_t kt, std::int64_t kh, std::int64_t kw);
Tensor avg_pool2d(const Tensor& x, std::int64_t kh, std::int64_t kw);

/// For x [T x C], splits time into `windows` contiguous bins (bin i covers
/// [floor(i*T/w), floor((i+1)*T/w))) and returns max + mean per bin: [w x C].
Tensor window_max_mean(const Tensor& x, std::int64_t windows);

/// Scaled dot-product attention over `heads` column groups.
/// q [n x d], k [m x d], v [m x d] -> [n x d]; head h uses columns [h*d/heads, (h+1)*d/heads).
/// If `weights_out` is given it receives one [n x m] attention matrix per head (values only).
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads, Real scale,
                            std::vector<Tensor>* weights_out = nullptr);

UFFIA_NAMESPACE_END
