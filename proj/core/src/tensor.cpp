#include "gridreg/tensor.hpp"

#include <cmath>
#include <unordered_set>

namespace gridreg {

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  return full(std::move(shape), 0.0f, requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, float value, bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  for (int d : shape) require(d > 0, "tensor extents must be positive");
  impl->shape = std::move(shape);
  impl->data.assign(static_cast<size_t>(impl->size()), value);
  impl->is_param = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<float> data,
                         bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  for (int d : shape) require(d > 0, "tensor extents must be positive");
  impl->shape = std::move(shape);
  require(static_cast<std::int64_t>(data.size()) == impl->size(),
          "data length does not match shape");
  impl->data = std::move(data);
  impl->is_param = requires_grad;
  debug_check_finite(*impl, "from_data");
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(float value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

float Tensor::item() const {
  require(size() == 1, "item() requires a scalar tensor");
  return impl_->data[0];
}

Tensor Tensor::clone_data() const {
  return from_data(impl_->shape, impl_->data, false);
}

Tensor make_result(std::vector<int> shape, std::vector<float> data,
                   std::vector<Tensor> inputs,
                   std::function<void(TensorImpl&)> backward_fn) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  bool any_tracked = false;
  for (const auto& t : inputs)
    if (t.tracked()) any_tracked = true;
  if (any_tracked) {
    for (const auto& t : inputs) impl->parents.push_back(t.impl());
    impl->backward_fn = std::move(backward_fn);
  }
  debug_check_finite(*impl, "op result");
  return Tensor(std::move(impl));
}

void backward(Tensor root) {
  require(root.defined() && root.size() == 1, "backward root must be a scalar");
  TensorImpl* r = root.impl().get();
  require(!r->backward_done, "backward called twice without grad reset");

  // Iterative post-order DFS for a reverse topological order.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> seen;
  std::vector<std::pair<TensorImpl*, size_t>> stack;
  stack.push_back({r, 0});
  seen.insert(r);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorImpl* p = node->parents[next++].get();
      if (seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior grads start from zero; parameter leaves accumulate.
  for (TensorImpl* n : order) {
    if (!n->is_param)
      n->grad.assign(n->data.size(), 0.0f);
    else
      n->ensure_grad();
  }
  r->grad.assign(r->data.size(), 0.0f);
  r->grad[0] = 1.0f;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
  r->backward_done = true;

  // Free the tape.
  for (TensorImpl* n : order) {
    n->backward_fn = nullptr;
    n->parents.clear();
  }
}

std::int64_t spatial_size(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (size_t i = 1; i < shape.size(); ++i) n *= shape[i];
  return n;
}

std::vector<int> spatial_shape(const std::vector<int>& shape) {
  return std::vector<int>(shape.begin() + 1, shape.end());
}

void debug_check_finite(const TensorImpl& t, const char* where) {
#ifndef NDEBUG
  for (float v : t.data) {
    if (!std::isfinite(v))
      throw contract_error(std::string("non-finite value in ") + where);
  }
#else
  (void)t;
  (void)where;
#endif
}

}  // namespace gridreg
