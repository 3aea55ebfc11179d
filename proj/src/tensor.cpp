#include "framer/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace framer {

namespace {
thread_local bool g_grad_enabled = true;
thread_local std::uint64_t g_seq = 0;
}  // namespace

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

bool GradMode::enabled() { return g_grad_enabled; }
void GradMode::set_enabled(bool on) { g_grad_enabled = on; }

NoGradGuard::NoGradGuard() : prev_(GradMode::enabled()) {
  GradMode::set_enabled(false);
}
NoGradGuard::~NoGradGuard() { GradMode::set_enabled(prev_); }

Node::Node() : seq(++g_seq) {}

std::vector<double>& Node::grad_buf() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return from(std::move(shape), {}, requires_grad);
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
  std::vector<double> vals(shape_numel(shape), v);
  return from(std::move(shape), std::move(vals), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  if (values.empty()) values.assign(n, 0.0);
  if (values.size() != n) {
    throw std::invalid_argument("Tensor::from: " + std::to_string(values.size()) +
                                " values for shape " + shape_str(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from({1}, {v}, requires_grad);
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev, bool requires_grad) {
  std::vector<double> vals(shape_numel(shape));
  for (double& v : vals) v = stddev * rng.normal();
  return from(std::move(shape), std::move(vals), requires_grad);
}

Tensor Tensor::make(Shape shape, std::vector<double> values, const char* op,
                    std::vector<Tensor> parents,
                    std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->op = op;
  bool track = GradMode::enabled();
  if (track) {
    bool any = false;
    for (const Tensor& p : parents) any = any || p.requires_grad();
    track = any;
  }
  if (track) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (Tensor& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

double Tensor::value() const {
  if (numel() != 1) {
    throw std::invalid_argument("Tensor::value: tensor " + shape_str(shape()) +
                                " is not a scalar");
  }
  return node_->value[0];
}

Tensor& Tensor::set_requires_grad(bool on) {
  if (on && !node_->parents.empty()) {
    throw std::invalid_argument("set_requires_grad: only valid on leaves");
  }
  node_->requires_grad = on;
  return *this;
}

void Tensor::zero_grad() {
  auto& g = node_->grad_buf();
  std::fill(g.begin(), g.end(), 0.0);
}

std::span<double> Tensor::data_mut() {
  if (!node_->parents.empty()) {
    throw std::invalid_argument("data_mut: only leaf tensors may be mutated");
  }
  return node_->value;
}

Tensor Tensor::detach() const {
  auto node = std::make_shared<Node>();
  node->shape = node_->shape;
  node->value = node_->value;
  node->op = "detach";
  return Tensor(std::move(node));
}

void Tensor::backward() const {
  if (numel() != 1) {
    throw std::invalid_argument("backward: root must be scalar, got " +
                                shape_str(shape()));
  }
  if (!node_->requires_grad) return;

  // Collect the reachable differentiable subgraph, then replay in reverse
  // creation order. Creation order is a valid topological order because ops
  // construct parents before children.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{node_.get()};
  seen.insert(node_.get());
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) {
        stack.push_back(p.get());
      }
    }
  }
  std::sort(order.begin(), order.end(),
            [](const Node* a, const Node* b) { return a->seq > b->seq; });

  node_->grad_buf()[0] += 1.0;
  for (Node* n : order) {
    if (n->backward) n->backward(*n);
  }
}

}  // namespace framer
