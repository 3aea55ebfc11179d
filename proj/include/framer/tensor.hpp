#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "framer/rng.hpp"

namespace framer {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Thread-local switch: while disabled, newly created tensors record no
// parents and no backward closures (inference mode).
class GradMode {
 public:
  static bool enabled();
  static void set_enabled(bool on);
};

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// One record of the computation tape. Nodes are created in topological
// order (parents strictly before consumers, enforced by the monotonically
// increasing sequence id) and visited exactly once on backward.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated on first touch
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  const char* op = "leaf";
  bool requires_grad = false;
  std::uint64_t seq = 0;

  Node();
  std::vector<double>& grad_buf();
};

// Dense row-major array participating in reverse-mode differentiation.
// Value semantics: copying a Tensor shares the underlying node. Values are
// immutable after creation except grad accumulation and leaf updates via
// data_mut() (used by optimizers between steps).
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0,
                      bool requires_grad = false);

  // Graph-facing constructor used by ops. Drops parents/backward when grads
  // are globally disabled or no parent requires them.
  static Tensor make(Shape shape, std::vector<double> values, const char* op,
                     std::vector<Tensor> parents,
                     std::function<void(Node&)> backward);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->value.size(); }
  std::size_t rank() const { return node_->shape.size(); }

  std::span<const double> values() const { return node_->value; }
  double value() const;  // scalar tensors only
  double at(std::size_t i) const { return node_->value[i]; }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on);

  std::span<const double> grad() const { return node_->grad_buf(); }
  std::span<double> grad_mut() { return node_->grad_buf(); }
  void zero_grad();

  // Mutable access to leaf data (parameter updates). Calling this on a
  // non-leaf node would invalidate recorded values, so it is rejected.
  std::span<double> data_mut();

  // Constant copy of the values, severed from the graph.
  Tensor detach() const;

  // Reverse pass from a scalar. Seeds d(self)/d(self) = 1 and accumulates
  // into grad of every reachable node that requires gradients.
  void backward() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}
  std::shared_ptr<Node> node_;
};

}  // namespace framer
