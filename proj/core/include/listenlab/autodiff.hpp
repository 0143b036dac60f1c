#pragma once

#include <algorithm>
#include <atomic>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "listenlab/tensor.hpp"

namespace listenlab {

inline uint64_t next_node_id() {
  static std::atomic<uint64_t> counter{0};
  return ++counter;
}

namespace detail {
inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode_flag(); }

// Disables tape construction for the current thread while alive.
// Evaluation runs under this guard, so read-only model sharing is safe.
class NoGradGuard {
 public:
  NoGradGuard() : prev_(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
  ~NoGradGuard() { detail::grad_mode_flag() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// One tape entry: forward value, accumulated gradient, parents, and the
// backward rule. Node ids are creation-ordered, which is also a valid
// topological order of the (acyclic) tape.
template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // allocated lazily on first accumulation
  bool requires_grad = false;
  uint64_t id = 0;
  std::vector<std::shared_ptr<Node<T>>> parents;
  std::function<void(Node<T>&)> backprop;

  void ensure_grad() {
    if (grad.numel() == 0) grad = Tensor<T>::zeros(value.shape());
  }
};

template <typename T>
class Var {
 public:
  Var() = default;

  explicit Var(Tensor<T> value, bool requires_grad = false) {
    node_ = std::make_shared<Node<T>>();
    node_->value = std::move(value);
    node_->requires_grad = requires_grad && grad_enabled();
    node_->id = next_node_id();
  }

  explicit Var(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

  bool defined() const { return node_ != nullptr; }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  Tensor<T>& grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad() {
    if (node_->grad.numel() != 0) std::fill(node_->grad.data().begin(), node_->grad.data().end(), T(0));
  }
  bool requires_grad() const { return node_->requires_grad; }
  const Shape& shape() const { return node_->value.shape(); }
  int64_t numel() const { return node_->value.numel(); }

  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

template <typename T>
Var<T> make_op(Tensor<T> value, const std::vector<Var<T>>& inputs,
               std::function<void(Node<T>&)> backprop) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->id = next_node_id();
  bool need = grad_enabled();
  if (need) {
    need = false;
    for (const auto& in : inputs)
      if (in.requires_grad()) need = true;
  }
  if (need) {
    n->requires_grad = true;
    n->parents.reserve(inputs.size());
    for (const auto& in : inputs) n->parents.push_back(in.node());
    n->backprop = std::move(backprop);
  }
  return Var<T>(n);
}

// Reverse pass over the tape reachable from `loss`, in reverse creation
// order. Gradients accumulate into every requires_grad leaf.
template <typename T>
void backward(const Var<T>& loss) {
  if (loss.value().numel() != 1)
    throw ValidationError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  if (!loss.requires_grad()) return;

  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<Node<T>*> stack{loss.node().get()};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    Node<T>* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (auto& p : n->parents) {
      if (p->requires_grad && !seen.count(p.get())) {
        seen.insert(p.get());
        stack.push_back(p.get());
      }
    }
  }
  std::sort(order.begin(), order.end(), [](Node<T>* a, Node<T>* b) { return a->id > b->id; });

  loss.node()->ensure_grad();
  loss.node()->grad[0] += T(1);
  for (Node<T>* n : order)
    if (n->backprop) n->backprop(*n);
}

}  // namespace listenlab
