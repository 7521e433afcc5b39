#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hoic {

using Shape = std::vector<int>;

std::int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// Reads the node's own value and grad and accumulates into its parents.
using BackwardFn = std::function<void(const Node& self)>;

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  BackwardFn backward;

  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

/// Dense row-major double tensor with reverse-mode autodiff.
///
/// Copies share the underlying node. Operations in ops.hpp build a graph
/// when any input requires a gradient and grad mode is enabled.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(detail::NodePtr node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int rank() const { return static_cast<int>(shape().size()); }
  int dim(int axis) const;
  std::int64_t size() const;

  std::span<const double> data() const;
  // Writable view of the values. Only meaningful on leaves (parameters,
  // inputs); mutating an interior node does not invalidate its graph.
  std::span<double> mutable_data();
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  bool has_grad() const;

  double item() const;
  double at(std::initializer_list<int> index) const;

  bool requires_grad() const;
  void set_requires_grad(bool value);

  /// Back-propagates from a single-element tensor.
  void backward() const;
  void zero_grad() const;

  /// Same values, no graph history.
  Tensor detach() const;
  Tensor clone() const;

  const detail::NodePtr& node() const { return node_; }

 private:
  detail::NodePtr node_;
};

/// Disables graph construction on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

namespace detail {

// Creates an op result. The backward closure is dropped when no input needs
// a gradient or grad mode is off.
Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                   BackwardFn backward);

}  // namespace detail

}  // namespace hoic
