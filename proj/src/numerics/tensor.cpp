#include "uffia/numerics/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

UFFIA_NAMESPACE_BEGIN

namespace {
thread_local bool g_grad_enabled = true;
thread_local bool g_meta_mode = false;
thread_local OpTraceScope* g_trace = nullptr;

void check_shape(const Shape& shape) {
  for (auto extent : shape) {
    if (extent <= 0) throw ShapeError("tensor extents must be positive, got " + shape_to_string(shape));
  }
}
}  // namespace

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::vector<Real>& TensorNode::grad_buffer() {
  if (grad.empty()) grad.assign(static_cast<std::size_t>(numel(shape)), Real(0));
  return grad;
}

Tensor Tensor::zeros(const Shape& shape) { return full(shape, Real(0)); }

Tensor Tensor::full(const Shape& shape, Real value) {
  check_shape(shape);
  auto node = std::make_shared<TensorNode>();
  node->shape = shape;
  node->value.assign(static_cast<std::size_t>(uffia::numel(shape)), value);
  return Tensor(std::move(node));
}

Tensor Tensor::from_values(const Shape& shape, std::vector<Real> values) {
  check_shape(shape);
  if (static_cast<std::int64_t>(values.size()) != uffia::numel(shape)) {
    throw ShapeError("value count " + std::to_string(values.size()) + " does not match shape " +
                     shape_to_string(shape));
  }
  auto node = std::make_shared<TensorNode>();
  node->shape = shape;
  node->value = std::move(values);
  return Tensor(std::move(node));
}

Tensor Tensor::parameter(const Shape& shape, std::vector<Real> values) {
  Tensor t = from_values(shape, std::move(values));
  t.set_requires_grad(true);
  return t;
}

Tensor Tensor::meta(const Shape& shape, bool requires_grad) {
  check_shape(shape);
  auto node = std::make_shared<TensorNode>();
  node->shape = shape;
  node->meta = true;
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

std::int64_t Tensor::dim(int axis) const {
  const int r = rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) throw IndexError("axis out of range for shape " + shape_to_string(shape()));
  return node_->shape[static_cast<std::size_t>(axis)];
}

Real Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on non-scalar tensor " + shape_to_string(shape()));
  return node_->value.at(0);
}

Real Tensor::at(std::initializer_list<std::int64_t> index) const {
  if (static_cast<int>(index.size()) != rank()) throw IndexError("index rank mismatch");
  std::int64_t flat = 0;
  int axis = 0;
  for (auto i : index) {
    const auto extent = node_->shape[static_cast<std::size_t>(axis++)];
    if (i < 0 || i >= extent) throw IndexError("index out of range");
    flat = flat * extent + i;
  }
  return node_->value.at(static_cast<std::size_t>(flat));
}

void Tensor::set_requires_grad(bool flag) {
  node_->requires_grad = flag;
  if (flag && !node_->meta) {
    node_->grad_buffer();
  } else if (!flag) {
    node_->grad.clear();
  }
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), Real(0));
}

Tensor Tensor::detach() const {
  if (is_meta()) return meta(shape());
  return from_values(shape(), node_->value);
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw ContractError("backward on undefined tensor");
  if (loss.numel() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " + shape_to_string(loss.shape()));
  }
  if (loss.is_meta()) return;
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> visited;
  std::vector<std::pair<TensorNode*, std::size_t>> stack;
  stack.emplace_back(loss.node(), 0);
  visited.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorNode* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->grad_buffer()[0] += Real(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool meta_mode() { return g_meta_mode; }

MetaModeGuard::MetaModeGuard() : previous_(g_meta_mode) { g_meta_mode = true; }
MetaModeGuard::~MetaModeGuard() { g_meta_mode = previous_; }

OpTraceScope::OpTraceScope() : previous_(g_trace) { g_trace = this; }
OpTraceScope::~OpTraceScope() { g_trace = previous_; }

void record_op(const char* kind, std::vector<std::int64_t> dims) {
  if (g_trace) g_trace->records_.push_back(OpRecord{kind, std::move(dims)});
}

namespace detail {

bool any_meta(std::initializer_list<const Tensor*> inputs) {
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->is_meta(); });
}

bool any_requires_grad(const std::vector<Tensor>& inputs) {
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
}

Tensor make_result(Shape shape, std::vector<Real> values, std::vector<Tensor> parents,
                   BackwardFn backward_fn) {
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  if (g_grad_enabled && any_requires_grad(parents)) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node_ptr());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

Tensor meta_result(Shape shape, const std::vector<Tensor>& parents) {
  return Tensor::meta(shape, g_grad_enabled && any_requires_grad(parents));
}

}  // namespace detail

UFFIA_NAMESPACE_END
