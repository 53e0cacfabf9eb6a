#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <unordered_set>
#include <utility>
#include <vector>

namespace holoforge {

struct Shape {
  std::size_t n = 0, c = 0, h = 0, w = 0;

  constexpr std::size_t size() const { return n * c * h * w; }
  constexpr std::size_t plane() const { return h * w; }
  constexpr bool operator==(const Shape&) const = default;

  std::string str() const {
    std::ostringstream os;
    os << n << "x" << c << "x" << h << "x" << w;
    return os.str();
  }
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <class T>
class Tensor;

namespace detail {

template <class T>
struct Node;

// One recorded operation. Owned by the node it produced; holds strong
// references to its inputs so the graph stays alive until the output dies.
template <class T>
struct TapeEntry {
  std::uint64_t seq = 0;
  std::string op;
  std::vector<std::shared_ptr<Node<T>>> inputs;
  Node<T>* output = nullptr;
  std::function<void(const std::vector<T>& grad_out)> backward;
};

template <class T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  std::shared_ptr<TapeEntry<T>> creator;

  // Allocates the gradient buffer on first use.
  std::vector<T>& grad_buffer() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    return grad;
  }
};

inline std::atomic<std::uint64_t>& sequence_counter() {
  static std::atomic<std::uint64_t> counter{0};
  return counter;
}

inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

// Disables operation recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
  ~NoGradGuard() { detail::grad_mode_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

inline bool grad_enabled() { return detail::grad_mode_flag(); }

// 4-D (n, c, h, w) row-major array with optional gradient. Copies share the
// underlying storage; values produced by ops are treated as immutable.
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0), bool requires_grad = false)
      : node_(std::make_shared<detail::Node<T>>()) {
    node_->shape = shape;
    node_->value.assign(shape.size(), fill);
    node_->requires_grad = requires_grad;
  }

  static Tensor from_data(Shape shape, std::vector<T> values, bool requires_grad = false) {
    if (values.size() != shape.size()) {
      throw ShapeError("tensor data length " + std::to_string(values.size()) +
                       " does not match shape " + shape.str());
    }
    Tensor t;
    t.node_ = std::make_shared<detail::Node<T>>();
    t.node_->shape = shape;
    t.node_->value = std::move(values);
    t.node_->requires_grad = requires_grad;
    return t;
  }

  static Tensor scalar(T v, bool requires_grad = false) {
    return Tensor(Shape{1, 1, 1, 1}, v, requires_grad);
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->value.size(); }

  std::span<const T> data() const { return node_->value; }
  // Direct write access; intended for leaves (parameter init, optimizer).
  std::span<T> mutable_data() { return node_->value; }

  T at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    const Shape& s = node_->shape;
    return node_->value[((n * s.c + c) * s.h + h) * s.w + w];
  }

  T item() const {
    if (size() != 1) throw ShapeError("item() on tensor of shape " + shape().str());
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }

  bool has_grad() const { return node_->grad.size() == node_->value.size() && !node_->value.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return node_->grad_buffer(); }
  void zero_grad() { node_->grad.clear(); }

  bool is_leaf() const { return !node_->creator; }

  // Fresh leaf holding a copy of the values, detached from any graph.
  Tensor detach() const { return from_data(shape(), node_->value, false); }

  Tensor clone() const { return from_data(shape(), node_->value, requires_grad()); }

  const std::shared_ptr<detail::Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node<T>> node_;
};

namespace detail {

// Attaches a backward rule to `out`. No-op unless some input requires grad
// and recording is enabled.
template <class T>
void record(Tensor<T>& out, std::string op, std::type_identity_t<std::vector<Tensor<T>>> inputs,
            std::type_identity_t<std::function<void(const std::vector<T>&)>> backward) {
  bool needed = grad_enabled() &&
                std::any_of(inputs.begin(), inputs.end(), [](const Tensor<T>& t) { return t.requires_grad(); });
  if (!needed) return;
  auto entry = std::make_shared<TapeEntry<T>>();
  entry->seq = sequence_counter().fetch_add(1, std::memory_order_relaxed);
  entry->op = std::move(op);
  for (auto& t : inputs) entry->inputs.push_back(t.node());
  entry->output = out.node().get();
  entry->backward = std::move(backward);
  out.node()->requires_grad = true;
  out.node()->creator = std::move(entry);
}

}  // namespace detail

// Reverse-mode sweep from a scalar loss. Intermediate gradients are reset on
// each call; leaf gradients accumulate until zero_grad().
template <class T>
void backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ShapeError("backward requires a scalar loss, got shape " +
                     (loss.defined() ? loss.shape().str() : std::string("<undefined>")));
  }
  auto root = loss.node();
  if (!root->requires_grad) throw std::logic_error("backward: loss does not depend on any tensor requiring grad");

  std::vector<detail::TapeEntry<T>*> entries;
  std::unordered_set<const detail::TapeEntry<T>*> seen;
  std::vector<detail::Node<T>*> stack{root.get()};
  while (!stack.empty()) {
    auto* node = stack.back();
    stack.pop_back();
    auto* entry = node->creator.get();
    if (!entry || !seen.insert(entry).second) continue;
    entries.push_back(entry);
    for (auto& in : entry->inputs)
      if (in->requires_grad) stack.push_back(in.get());
  }
  std::sort(entries.begin(), entries.end(), [](auto* a, auto* b) { return a->seq > b->seq; });

  for (auto* e : entries) e->output->grad.assign(e->output->value.size(), T(0));
  if (root->creator) {
    root->grad[0] = T(1);
  } else {
    root->grad_buffer()[0] += T(1);
    return;
  }
  for (auto* e : entries) e->backward(e->output->grad);
}

}  // namespace holoforge
