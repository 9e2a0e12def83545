#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tpo {

// Dense 64-bit float array with reverse-mode autodiff. A Tensor is a cheap
// handle onto a shared node; ops build an acyclic graph and backward()
// propagates gradients in reverse topological order.
//
// Values participating in a live graph must not be mutated in place; the
// trainer only touches leaf data() between steps, after the step's graph has
// been dropped.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static Tensor from(std::vector<std::size_t> shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double v);
  // 1-D constant from a plain vector.
  static Tensor vector(std::vector<double> values);

  bool defined() const { return node_ != nullptr; }
  const std::vector<std::size_t>& shape() const;
  std::size_t numel() const;
  std::size_t rank() const { return shape().size(); }
  bool requires_grad() const;

  const std::vector<double>& values() const;
  std::vector<double>& data();  // mutable leaf access (optimizer updates)
  const std::vector<double>& grad() const;

  double item() const;  // single-element tensors only
  double at(std::size_t i) const;
  double at(std::size_t i, std::size_t j) const;

  void zero_grad();  // this node only
  // Zero gradients of every node reachable from this one.
  void zero_grad_graph();

  struct Node;
  Node* node() const { return node_.get(); }

 private:
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}
  std::shared_ptr<Node> node_;

  friend Tensor make_node(std::vector<std::size_t> shape, std::vector<double> values,
                          std::vector<Tensor> parents,
                          std::function<void(Node&)> backward);
};

// While a guard is alive, ops compute values only: the result carries no
// parents and no gradient. Used for the corrupted-image and reference passes.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};
bool grad_enabled();

// Elementwise binary ops broadcast with trailing-dimension alignment: shapes
// are right-aligned and each pair of dims must match or one must be 1 (or
// absent). Anything else throws std::invalid_argument naming both shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);  // throws on non-positive input
Tensor sigmoid(const Tensor& a);
// Numerically stable ln sigma(x); backward multiplies by sigma(-x).
Tensor log_sigmoid(const Tensor& a);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);

enum class OpKind { kAdd, kSubtract, kMultiply, kNegate, kExponential, kNaturalLog, kSigmoid };
Tensor elementwise(OpKind kind, const Tensor& a);                   // unary kinds
Tensor elementwise(OpKind kind, const Tensor& a, const Tensor& b);  // binary kinds

Tensor matmul(const Tensor& a, const Tensor& b);  // [m x k] * [k x n]
Tensor transpose(const Tensor& a);                // 2-D

// Stable log-softmax over the last axis.
Tensor log_softmax(const Tensor& x);

// output[t] = x[t, indices[t]]; backward scatters to the selected entries.
Tensor gather_last(const Tensor& x, std::span<const int> indices);

// rows of table selected by ids: [ids.size() x table.cols].
Tensor take_rows(const Tensor& table, std::span<const int> ids);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor concat_last(const Tensor& a, const Tensor& b);  // 2-D, equal rows

enum class Reduce { kSum, kMean };
Tensor reduce(Reduce kind, const Tensor& x);                    // all elements -> scalar
Tensor reduce(Reduce kind, const Tensor& x, std::size_t axis);  // along one axis
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Reverse-mode sweep from a scalar root; accumulates into .grad of every
// reachable node with requires_grad. Repeated calls accumulate.
void backward(const Tensor& root);

std::string shape_str(const std::vector<std::size_t>& shape);

}  // namespace tpo
