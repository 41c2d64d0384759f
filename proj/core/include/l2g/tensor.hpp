#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace l2g {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor;

namespace detail {

struct TensorImpl;

// One recorded operation. `backward` reads the output's data and gradient and
// accumulates into the gradients of `inputs` that require them.
struct Node {
  std::string name;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::function<void(const TensorImpl& out)> backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  // Empty until something accumulates into it; stays empty when
  // requires_grad is false.
  std::vector<double> grad;
  bool requires_grad = false;
  std::shared_ptr<Node> grad_fn;

  std::vector<double>& ensure_grad();
};

}  // namespace detail

// Dense row-major array of doubles with optional gradient tracking.
//
// Copies share storage: a Tensor is a handle, and parameter sharing between
// networks is expressed by holding the same handle twice.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<const double> data() const;
  // Direct write access; only valid for tensors that are not part of a
  // recorded graph (parameters between steps, fresh inputs).
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t i) const { return data()[i]; }

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Copy of the values with no graph history and no gradient tracking.
  Tensor detach() const;
  // Deep copy keeping requires_grad (for parameters).
  Tensor clone() const;

  // Reverse-mode differentiation from a scalar. Each recorded node is visited
  // exactly once; gradients accumulate into every tensor with requires_grad.
  void backward() const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  // Used by op implementations.
  static Tensor make_result(Shape shape, std::vector<double> values,
                            std::string name,
                            std::vector<Tensor> inputs,
                            std::function<void(const detail::TensorImpl&)> bw);
  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl)
      : impl_(std::move(impl)) {}

  std::shared_ptr<detail::TensorImpl> impl_;
};

// Gradient recording switch for the current thread (on by default).
bool grad_enabled();

// Disables graph recording in its scope on this thread; ops still compute
// values and check them for non-finite entries.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Throws NumericError naming `op` if any value is NaN or infinite.
void check_finite(std::span<const double> values, const std::string& op);

}  // namespace l2g
