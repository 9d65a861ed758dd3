#pragma once

// Reverse-mode automatic differentiation over dense row-major tensors of
// doubles. A Tensor is a shared handle to a graph node; operations record
// their inputs so that backward() can propagate gradients to every leaf.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sap::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward_fn;
  const char* op = "leaf";

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->data.size(); }
  // Leading / trailing extents of a rank-1 or rank-2 tensor.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> data() { return node_->data; }
  std::span<const double> data() const { return node_->data; }
  std::span<double> grad();
  std::span<const double> grad() const { return node_->grad; }

  double item() const;
  double operator[](std::size_t i) const { return node_->data[i]; }

  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return !node_->backward_fn; }
  void zero_grad();

  explicit operator bool() const { return static_cast<bool>(node_); }
  const std::shared_ptr<Node>& node() const { return node_; }

  // Deep copy of data into a fresh leaf.
  Tensor detach_copy(bool requires_grad = false) const;

 private:
  std::shared_ptr<Node> node_;
};

// Runs the reverse pass from a scalar. Returns the number of graph nodes
// visited (each at most once).
std::size_t backward(const Tensor& loss);

void zero_grad(std::span<Tensor> params);

// -- operations --------------------------------------------------------------

// x [n,k] * w[m,k]^T + b[m] -> [n,m]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
// a [n,k] * b [k,m] -> [n,m]
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor square(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Columns [begin, end) of a rank-2 tensor.
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);

// out[i] = w[units[i]] . h[rows[i]] + b[units[i]]; a linear layer evaluated
// only at the requested (row, output unit) pairs.
Tensor gather_linear(const Tensor& h, const Tensor& w, const Tensor& b,
                     std::span<const std::uint32_t> rows,
                     std::span<const std::uint32_t> units);

// out[s] = sum of x[i] with segment[i] == s.
Tensor segment_sum(const Tensor& x, std::span<const std::uint32_t> segment,
                   std::size_t segments);

// out[s] = max of x[i] with segment[i] == s; every segment must be non-empty.
Tensor segment_max(const Tensor& x, std::span<const std::uint32_t> segment,
                   std::size_t segments);

// sum_i weight[i] * |x[i]|
Tensor weighted_abs_sum(const Tensor& x, std::span<const double> weight);

// Same data under a new shape of equal size.
Tensor reshape(const Tensor& x, Shape shape);

// out[i] = flat(x)[index[i]]
Tensor gather(const Tensor& x, std::span<const std::uint32_t> index);

// Mean over rows of -log softmax(logits[i])[labels[i]]; logits [n,C].
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::uint32_t> labels);

// Mean binary cross-entropy of sigmoid(x) against targets in [0,1].
Tensor bce_with_logits(const Tensor& x, std::span<const double> targets);

}  // namespace sap::ad
