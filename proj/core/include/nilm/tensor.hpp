#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nilm {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {

// One vertex of the autodiff graph. Forward ops allocate a node per result;
// `backward` reads `grad` and accumulates into the grads of `inputs`.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  bool leaf = true;
  std::string_view op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  void ensure_grad();
};

}  // namespace detail

/// Dense row-major tensor of doubles with an optional gradient slot.
///
/// Copies are shallow: two Tensor handles may refer to the same storage, which
/// is how parameters are shared between a model and the graph that uses them.
/// Values are treated as immutable once an op has consumed them; only leaf
/// tensors (parameters, inputs) should be written through `mutable_data`.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
  static Tensor ones(Shape shape) { return Tensor(std::move(shape), 1.0); }

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t flat_index) const;
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool is_leaf() const;
  std::string_view op_name() const;

  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Fresh leaf holding a copy of the values; no gradient history.
  Tensor detach() const;

  /// Reverse-mode sweep from this scalar; accumulates into leaf grads and
  /// releases the interior of the graph.
  void backward() const;

  // Plumbing for op implementations.
  const std::shared_ptr<detail::Node>& node() const { return node_; }
  static Tensor from_node(std::shared_ptr<detail::Node> node);

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Topologically ordered view of the graph under a root tensor.
class Graph {
 public:
  struct Record {
    std::string_view op;
    std::vector<std::size_t> inputs;  // indices into records()
    std::size_t id;
  };

  /// Collects every node reachable from `root` that participates in
  /// differentiation. Inputs precede consumers in the resulting order.
  static Graph collect(const Tensor& root);

  const std::vector<Record>& records() const { return records_; }
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(root)/d(root) = 1 and runs each node's backward exactly once in
  /// reverse topological order, then releases interior nodes.
  void backward();

 private:
  std::vector<std::shared_ptr<detail::Node>> nodes_;
  std::vector<Record> records_;
  bool consumed_ = false;
};

/// Thread-local switch for graph recording. Disabled inside NoGradGuard.
class GradMode {
 public:
  static bool enabled();
  static void set_enabled(bool enabled);
};

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace nilm
