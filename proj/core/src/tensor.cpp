#include "nilm/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "nilm/errors.hpp"

namespace nilm {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << " x ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace detail {

void Node::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
}

}  // namespace detail

namespace {

void validate_shape(const Shape& shape) {
  if (shape.empty()) return;  // rank-0 scalar
  for (std::size_t extent : shape) {
    if (extent == 0)
      throw DimensionError("tensor extents must be positive, got " +
                           shape_to_string(shape));
  }
}

thread_local bool grad_mode_enabled = true;

}  // namespace

Tensor::Tensor(Shape shape, double fill, bool requires_grad) {
  validate_shape(shape);
  node_ = std::make_shared<detail::Node>();
  node_->value.assign(shape_size(shape), fill);
  node_->shape = std::move(shape);
  node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  validate_shape(shape);
  if (shape_size(shape) != values.size())
    throw DimensionError("shape " + shape_to_string(shape) + " needs " +
                         std::to_string(shape_size(shape)) + " values, got " +
                         std::to_string(values.size()));
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{}, std::vector<double>{value}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  Shape shape{values.size()};
  return Tensor(std::move(shape), std::move(values), requires_grad);
}

Tensor Tensor::from_node(std::shared_ptr<detail::Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

static const detail::Node& checked(const std::shared_ptr<detail::Node>& node) {
  if (!node) throw UsageError("use of an undefined tensor");
  return *node;
}

const Shape& Tensor::shape() const { return checked(node_).shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size())
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                         shape_to_string(s));
  return s[axis];
}

std::size_t Tensor::size() const { return checked(node_).value.size(); }

std::span<const double> Tensor::data() const { return checked(node_).value; }

std::span<double> Tensor::mutable_data() {
  checked(node_);
  return node_->value;
}

double Tensor::item() const {
  if (size() != 1)
    throw UsageError("item() on tensor of shape " + shape_to_string(shape()));
  return node_->value[0];
}

double Tensor::operator[](std::size_t flat_index) const {
  return checked(node_).value.at(flat_index);
}

double Tensor::at(std::size_t row, std::size_t col) const {
  if (rank() != 2) throw DimensionError("at(row, col) requires a rank-2 tensor");
  if (row >= node_->shape[0] || col >= node_->shape[1])
    throw DimensionError("index out of range");
  return node_->value[row * node_->shape[1] + col];
}

bool Tensor::requires_grad() const { return checked(node_).requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  checked(node_);
  if (!node_->leaf) throw UsageError("requires_grad can only be set on leaves");
  node_->requires_grad = flag;
}

bool Tensor::is_leaf() const { return checked(node_).leaf; }

std::string_view Tensor::op_name() const { return checked(node_).op; }

bool Tensor::has_grad() const {
  const auto& n = checked(node_);
  return !n.grad.empty();
}

std::span<const double> Tensor::grad() const { return checked(node_).grad; }

std::span<double> Tensor::mutable_grad() {
  checked(node_);
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  checked(node_);
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  const auto& n = checked(node_);
  return Tensor(n.shape, n.value, false);
}

void Tensor::backward() const {
  checked(node_);
  if (size() != 1)
    throw UsageError("backward() needs a scalar loss, got shape " +
                     shape_to_string(shape()));
  Graph graph = Graph::collect(*this);
  graph.backward();
}

Graph Graph::collect(const Tensor& root) {
  Graph graph;
  const auto& root_node = root.node();
  if (!root_node) throw UsageError("cannot collect the graph of an undefined tensor");
  if (!root_node->requires_grad) return graph;

  // Iterative post-order DFS; the graph can be deep (one node per layer op).
  std::unordered_map<const detail::Node*, std::size_t> index;
  std::unordered_set<const detail::Node*> visited{root_node.get()};
  std::vector<std::pair<std::shared_ptr<detail::Node>, std::size_t>> stack;
  stack.emplace_back(root_node, 0);

  while (!stack.empty()) {
    auto& [node, next_input] = stack.back();
    if (next_input < node->inputs.size()) {
      std::shared_ptr<detail::Node> child = node->inputs[next_input++];
      if (!child->requires_grad || !visited.insert(child.get()).second) continue;
      stack.emplace_back(std::move(child), 0);
      continue;
    }
    index[node.get()] = graph.nodes_.size();
    graph.nodes_.push_back(std::move(node));
    stack.pop_back();
  }

  graph.records_.reserve(graph.nodes_.size());
  for (std::size_t i = 0; i < graph.nodes_.size(); ++i) {
    Record rec{graph.nodes_[i]->op, {}, i};
    for (const auto& in : graph.nodes_[i]->inputs) {
      auto it = index.find(in.get());
      if (it != index.end()) rec.inputs.push_back(it->second);
    }
    graph.records_.push_back(std::move(rec));
  }
  return graph;
}

void Graph::backward() {
  if (consumed_) throw UsageError("graph already consumed by a backward pass");
  consumed_ = true;
  if (nodes_.empty()) return;
  auto& root = *nodes_.back();
  root.ensure_grad();
  std::fill(root.grad.begin(), root.grad.end(), 0.0);
  root.grad[0] = 1.0;

  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    detail::Node& node = **it;
    if (node.leaf) continue;
    if (node.backward && !node.grad.empty()) node.backward(node);
  }
  for (auto& node : nodes_) {
    if (node->leaf) continue;
    node->inputs.clear();
    node->backward = nullptr;
    node->grad.clear();
    node->grad.shrink_to_fit();
  }
}

bool GradMode::enabled() { return grad_mode_enabled; }
void GradMode::set_enabled(bool enabled) { grad_mode_enabled = enabled; }

NoGradGuard::NoGradGuard() : previous_(GradMode::enabled()) {
  GradMode::set_enabled(false);
}
NoGradGuard::~NoGradGuard() { GradMode::set_enabled(previous_); }

}  // namespace nilm
