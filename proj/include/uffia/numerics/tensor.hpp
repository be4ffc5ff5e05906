#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "uffia/core.hpp"

UFFIA_NAMESPACE_BEGIN

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

struct TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;
using BackwardFn = std::function<void(TensorNode&)>;

/// One vertex of the reverse-mode graph.
///
/// `grad` is empty until something accumulates into it. Leaf parameters get a
/// zero-filled buffer at construction so unreachable parameters read as zero.
struct TensorNode {
  Shape shape;
  std::vector<Real> value;
  std::vector<Real> grad;
  bool requires_grad = false;
  bool meta = false;
  std::vector<NodePtr> parents;
  BackwardFn backward_fn;

  std::vector<Real>& grad_buffer();
};

/// Dense row-major tensor handle. Copies share the underlying node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor zeros(const Shape& shape);
  static Tensor full(const Shape& shape, Real value);
  static Tensor from_values(const Shape& shape, std::vector<Real> values);
  /// Trainable leaf with a zero-initialised gradient buffer.
  static Tensor parameter(const Shape& shape, std::vector<Real> values);
  /// Shape-only tensor used for symbolic cost accounting.
  static Tensor meta(const Shape& shape, bool requires_grad = false);
  static Tensor scalar(Real value) { return from_values({1}, {value}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  std::int64_t dim(int axis) const;
  std::int64_t numel() const { return uffia::numel(node_->shape); }
  bool is_meta() const { return node_->meta; }

  std::span<const Real> values() const { return node_->value; }
  /// Direct write access; only meant for leaves (optimizer updates, test setup).
  std::span<Real> mutable_values() { return node_->value; }
  Real item() const;
  Real at(std::initializer_list<std::int64_t> index) const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag);
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const Real> grad() const { return node_->grad; }
  void zero_grad();

  /// Value copy detached from the graph.
  Tensor detach() const;

  TensorNode* node() const { return node_.get(); }
  const NodePtr& node_ptr() const { return node_; }

 private:
  NodePtr node_;
};

/// Reverse pass from a scalar loss; accumulates into every reachable leaf.
void backward(const Tensor& loss);

bool grad_enabled();
/// Disables graph recording in its scope (inference, frozen teachers).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool meta_mode();
/// While active, parameter factories produce shape-only tensors.
class MetaModeGuard {
 public:
  MetaModeGuard();
  ~MetaModeGuard();
  MetaModeGuard(const MetaModeGuard&) = delete;
  MetaModeGuard& operator=(const MetaModeGuard&) = delete;

 private:
  bool previous_;
};

/// Kind and size parameters of one executed primitive.
struct OpRecord {
  std::string kind;
  std::vector<std::int64_t> dims;
  bool operator==(const OpRecord&) const = default;
};

/// Appends to the innermost active OpTraceScope on this thread, if any.
void record_op(const char* kind, std::vector<std::int64_t> dims);

/// Collects an OpRecord for every primitive executed on this thread while alive.
class OpTraceScope {
 public:
  OpTraceScope();
  ~OpTraceScope();
  OpTraceScope(const OpTraceScope&) = delete;
  OpTraceScope& operator=(const OpTraceScope&) = delete;

  const std::vector<OpRecord>& records() const { return records_; }

 private:
  friend void record_op(const char* kind, std::vector<std::int64_t> dims);
  std::vector<OpRecord> records_;
  OpTraceScope* previous_;
};

namespace detail {

/// Builds an op result, wiring parents and backward only when gradients are needed.
Tensor make_result(Shape shape, std::vector<Real> values, std::vector<Tensor> parents,
                   BackwardFn backward_fn);
bool any_meta(std::initializer_list<const Tensor*> inputs);
bool any_requires_grad(const std::vector<Tensor>& inputs);
Tensor meta_result(Shape shape, const std::vector<Tensor>& parents);

}  // namespace detail

UFFIA_NAMESPACE_END
