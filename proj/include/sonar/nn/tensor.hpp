#pragma once

#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace sonar::nn {

using Shape = std::vector<size_t>;

inline size_t shape_numel(const Shape& s) {
  size_t n = 1;
  for (size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

template <typename T>
struct TensorData {
  Shape shape;
  std::vector<T> v;
  std::vector<T> g;          // allocated (zeroed) only when needs_grad
  bool requires_grad = false;  // true only for leaves marked trainable
  bool needs_grad = false;     // leaf requires_grad, or depends on one

  void ensure_grad() {
    if (g.empty()) g.assign(v.size(), T(0));
  }
};

// Reverse-mode tape: forward ops append closures, backward runs them in
// exact reverse order. One tape per training context.
template <typename T>
class Tape {
 public:
  void record(std::function<void()> fn) { ops_.push_back(std::move(fn)); }
  size_t size() const { return ops_.size(); }
  void clear() { ops_.clear(); }

  void run_backward() {
    for (size_t i = ops_.size(); i-- > 0;) ops_[i]();
  }

 private:
  std::vector<std::function<void()>> ops_;
};

template <typename T>
inline Tape<T>*& active_tape() {
  thread_local Tape<T>* tape = nullptr;
  return tape;
}

// Scoped activation of a tape; no tape active means pure inference.
template <typename T>
class TapeGuard {
 public:
  explicit TapeGuard(Tape<T>& tape) : prev_(active_tape<T>()) {
    active_tape<T>() = &tape;
  }
  ~TapeGuard() { active_tape<T>() = prev_; }
  TapeGuard(const TapeGuard&) = delete;
  TapeGuard& operator=(const TapeGuard&) = delete;

 private:
  Tape<T>* prev_;
};

template <typename T>
class Tensor {
 public:
  Tensor() : d_(std::make_shared<TensorData<T>>()) {}

  static Tensor zeros(Shape shape) {
    Tensor t;
    t.d_->shape = std::move(shape);
    t.d_->v.assign(shape_numel(t.d_->shape), T(0));
    return t;
  }

  static Tensor from_values(Shape shape, std::vector<T> values) {
    if (shape_numel(shape) != values.size()) {
      throw std::invalid_argument("tensor values do not match shape " +
                                  shape_str(shape));
    }
    Tensor t;
    t.d_->shape = std::move(shape);
    t.d_->v = std::move(values);
    return t;
  }

  static Tensor scalar(T value) { return from_values({1}, {value}); }

  const Shape& shape() const { return d_->shape; }
  size_t numel() const { return d_->v.size(); }
  size_t dim(size_t i) const { return d_->shape.at(i); }
  size_t rank() const { return d_->shape.size(); }

  std::vector<T>& values() { return d_->v; }
  const std::vector<T>& values() const { return d_->v; }
  T item() const {
    if (d_->v.size() != 1) {
      throw std::logic_error("item() on tensor of shape " + shape_str(d_->shape));
    }
    return d_->v[0];
  }

  // Gradient buffer; empty when this tensor takes no part in backward.
  const std::vector<T>& grad() const { return d_->g; }
  void zero_grad() { std::fill(d_->g.begin(), d_->g.end(), T(0)); }

  Tensor& set_requires_grad(bool flag) {
    d_->requires_grad = flag;
    d_->needs_grad = flag;
    if (flag) d_->ensure_grad();
    return *this;
  }
  bool requires_grad() const { return d_->requires_grad; }
  bool needs_grad() const { return d_->needs_grad; }

  std::shared_ptr<TensorData<T>> data() const { return d_; }

 private:
  std::shared_ptr<TensorData<T>> d_;
};

// Marks op outputs that participate in backward, when a tape is recording.
template <typename T>
inline bool grad_active(std::initializer_list<const Tensor<T>*> inputs) {
  if (active_tape<T>() == nullptr) return false;
  for (const Tensor<T>* t : inputs) {
    if (t->needs_grad()) return true;
  }
  return false;
}

template <typename T>
inline void mark_output(Tensor<T>& out) {
  out.data()->needs_grad = true;
  out.data()->ensure_grad();
}

// Seeds d(loss)/d(loss) = 1 and runs the tape backwards.
template <typename T>
inline void backward(Tensor<T>& loss, Tape<T>& tape) {
  if (loss.numel() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got " +
                                shape_str(loss.shape()));
  }
  if (!loss.needs_grad()) {
    throw std::invalid_argument("backward: loss does not depend on any parameter");
  }
  loss.data()->ensure_grad();
  loss.data()->g[0] = T(1);
  tape.run_backward();
}

}  // namespace sonar::nn
