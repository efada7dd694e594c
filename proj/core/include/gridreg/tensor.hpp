#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridreg {

// Thrown when an operation's preconditions are violated.
struct contract_error : std::logic_error {
  using std::logic_error::logic_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw contract_error(msg);
}

struct TensorImpl {
  std::vector<int> shape;
  std::vector<float> data;
  std::vector<float> grad;  // allocated on demand, same length as data
  bool is_param = false;    // leaf that accumulates gradients
  bool backward_done = false;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(TensorImpl&)> backward_fn;

  std::int64_t size() const {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
  }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0f);
  }
  bool tracked() const { return is_param || !parents.empty(); }
};

// Shared-ownership handle over an N-D float32 array. Copies alias the
// same storage; ops that see a tracked input record a backward closure.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, float value,
                     bool requires_grad = false);
  static Tensor from_data(std::vector<int> shape, std::vector<float> data,
                          bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int>& shape() const { return impl_->shape; }
  std::int64_t size() const { return impl_->size(); }
  int extent(int axis) const { return impl_->shape[axis]; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }

  float* data() { return impl_->data.data(); }
  const float* data() const { return impl_->data.data(); }
  float item() const;

  bool requires_grad() const { return impl_ && impl_->is_param; }
  bool tracked() const { return impl_ && impl_->tracked(); }
  // Gradient buffer, zero-filled on first access.
  float* grad() {
    impl_->ensure_grad();
    return impl_->grad.data();
  }
  const std::vector<float>& grad_vec() const { return impl_->grad; }
  void zero_grad() {
    if (impl_) {
      impl_->grad.assign(impl_->data.size(), 0.0f);
      impl_->backward_done = false;
    }
  }

  std::shared_ptr<TensorImpl>& impl() { return impl_; }
  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

  // Deep copy of values; the copy is an untracked leaf.
  Tensor clone_data() const;

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
  friend Tensor make_result(std::vector<int>, std::vector<float>,
                            std::vector<Tensor>,
                            std::function<void(TensorImpl&)>);
};

// Builds an op result: takes ownership of the data, wires the graph if
// any input is tracked, otherwise drops the closure.
Tensor make_result(std::vector<int> shape, std::vector<float> data,
                   std::vector<Tensor> inputs,
                   std::function<void(TensorImpl&)> backward_fn);

// Reverse-mode sweep from a scalar root. Frees the tape afterwards;
// calling it twice on the same root is a contract violation.
void backward(Tensor root);

// Number of voxels in the spatial part (all axes past the channel axis).
std::int64_t spatial_size(const std::vector<int>& shape);
std::vector<int> spatial_shape(const std::vector<int>& shape);

// Debug-mode finiteness scan; no-op in release builds.
void debug_check_finite(const TensorImpl& t, const char* where);

}  // namespace gridreg
