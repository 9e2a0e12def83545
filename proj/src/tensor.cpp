#include "tpo/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace tpo {

struct Tensor::Node {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<Tensor> parents;
  std::function<void(Node&)> backward_fn;
};

namespace {

thread_local int g_no_grad_depth = 0;

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

}  // namespace

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }
bool grad_enabled() { return g_no_grad_depth == 0; }

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor make_node(std::vector<std::size_t> shape, std::vector<double> values,
                 std::vector<Tensor> parents, std::function<void(Tensor::Node&)> backward) {
  auto n = std::make_shared<Tensor::Node>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  n->grad.assign(n->values.size(), 0.0);
  if (grad_enabled()) {
    for (const Tensor& p : parents) {
      if (p.requires_grad()) {
        n->requires_grad = true;
        break;
      }
    }
    if (n->requires_grad) {
      n->parents = std::move(parents);
      n->backward_fn = std::move(backward);
    }
  }
  return Tensor(std::move(n));
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->values.assign(shape_numel(n->shape), 0.0);
  n->grad.assign(n->values.size(), 0.0);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> values,
                    bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw std::invalid_argument("tensor shape " + shape_str(shape) + " expects " +
                                std::to_string(shape_numel(shape)) + " values, got " +
                                std::to_string(values.size()));
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  n->grad.assign(n->values.size(), 0.0);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

Tensor Tensor::vector(std::vector<double> values) {
  std::size_t n = values.size();
  return from({n}, std::move(values));
}

const std::vector<std::size_t>& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::numel() const { return node_->values.size(); }
bool Tensor::requires_grad() const { return node_->requires_grad; }
const std::vector<double>& Tensor::values() const { return node_->values; }
std::vector<double>& Tensor::data() { return node_->values; }
const std::vector<double>& Tensor::grad() const { return node_->grad; }

double Tensor::item() const {
  if (numel() != 1) {
    throw std::invalid_argument("item() requires a single-element tensor, shape is " +
                                shape_str(shape()));
  }
  return node_->values[0];
}

double Tensor::at(std::size_t i) const { return node_->values.at(i); }

double Tensor::at(std::size_t i, std::size_t j) const {
  const auto& s = node_->shape;
  if (s.size() != 2) throw std::invalid_argument("at(i,j) requires a 2-D tensor");
  return node_->values.at(i * s[1] + j);
}

void Tensor::zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

void Tensor::zero_grad_graph() {
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{node_.get()};
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    std::fill(n->grad.begin(), n->grad.end(), 0.0);
    for (const Tensor& p : n->parents) stack.push_back(p.node());
  }
}

// ---------------------------------------------------------------------------
// broadcasting helpers

namespace {

struct Broadcast {
  std::vector<std::size_t> shape;    // result shape
  std::vector<std::size_t> stride_a; // element strides into a (0 on broadcast dims)
  std::vector<std::size_t> stride_b;
};

Broadcast broadcast_shapes(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Broadcast bc;
  bc.shape.resize(rank);
  std::vector<std::size_t> da(rank, 1), db(rank, 1);
  for (std::size_t i = 0; i < a.size(); ++i) da[rank - a.size() + i] = a[i];
  for (std::size_t i = 0; i < b.size(); ++i) db[rank - b.size() + i] = b[i];
  for (std::size_t i = 0; i < rank; ++i) {
    if (da[i] == db[i] || da[i] == 1 || db[i] == 1) {
      bc.shape[i] = std::max(da[i], db[i]);
    } else {
      throw std::invalid_argument("shapes " + shape_str(a) + " and " + shape_str(b) +
                                  " are not broadcastable");
    }
  }
  bc.stride_a.assign(rank, 0);
  bc.stride_b.assign(rank, 0);
  std::size_t sa = 1, sb = 1;
  for (std::size_t i = rank; i-- > 0;) {
    bc.stride_a[i] = (da[i] == 1) ? 0 : sa;
    bc.stride_b[i] = (db[i] == 1) ? 0 : sb;
    sa *= da[i];
    sb *= db[i];
  }
  return bc;
}

// Apply fn(out_index, a_index, b_index) over the broadcast result space.
template <typename F>
void for_each_broadcast(const Broadcast& bc, F&& fn) {
  const std::size_t rank = bc.shape.size();
  const std::size_t total = shape_numel(bc.shape);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t out = 0; out < total; ++out) {
    fn(out, ia, ib);
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      ia += bc.stride_a[d];
      ib += bc.stride_b[d];
      if (idx[d] < bc.shape[d]) break;
      ia -= bc.stride_a[d] * bc.shape[d];
      ib -= bc.stride_b[d] * bc.shape[d];
      idx[d] = 0;
    }
  }
}

Tensor binary_op(const Tensor& a, const Tensor& b, double (*fwd)(double, double),
                 void (*bwd)(double go, double av, double bv, double& ga, double& gb)) {
  Broadcast bc = broadcast_shapes(a.shape(), b.shape());
  std::vector<double> out(shape_numel(bc.shape));
  const auto& av = a.values();
  const auto& bv = b.values();
  for_each_broadcast(bc, [&](std::size_t o, std::size_t ia, std::size_t ib) {
    out[o] = fwd(av[ia], bv[ib]);
  });
  return make_node(bc.shape, std::move(out), {a, b}, [a, b, bc, bwd](Tensor::Node& n) {
    auto* na = a.node();
    auto* nb = b.node();
    for_each_broadcast(bc, [&](std::size_t o, std::size_t ia, std::size_t ib) {
      double ga = 0, gb = 0;
      bwd(n.grad[o], na->values[ia], nb->values[ib], ga, gb);
      if (na->requires_grad) na->grad[ia] += ga;
      if (nb->requires_grad) nb->grad[ib] += gb;
    });
  });
}

Tensor unary_op(const Tensor& a, double (*fwd)(double), double (*dfdx_from_out)(double x, double y)) {
  std::vector<double> out(a.numel());
  const auto& av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i]);
  return make_node(a.shape(), std::move(out), {a}, [a, dfdx_from_out](Tensor::Node& n) {
    auto* na = a.node();
    if (!na->requires_grad) return;
    for (std::size_t i = 0; i < n.values.size(); ++i) {
      na->grad[i] += n.grad[i] * dfdx_from_out(na->values[i], n.values[i]);
    }
  });
}

double stable_sigmoid(double x) {
  if (x >= 0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// elementwise ops

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, [](double x, double y) { return x + y; },
      [](double go, double, double, double& ga, double& gb) {
        ga = go;
        gb = go;
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, [](double x, double y) { return x - y; },
      [](double go, double, double, double& ga, double& gb) {
        ga = go;
        gb = -go;
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, [](double x, double y) { return x * y; },
      [](double go, double x, double y, double& ga, double& gb) {
        ga = go * y;
        gb = go * x;
      });
}

Tensor neg(const Tensor& a) {
  return unary_op(a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor exp(const Tensor& a) {
  return unary_op(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  for (double v : a.values()) {
    if (!(v > 0.0)) {
      throw std::invalid_argument("log requires strictly positive input, got " +
                                  std::to_string(v));
    }
  }
  return unary_op(a, [](double x) { return std::log(x); },
                  [](double x, double) { return 1.0 / x; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor log_sigmoid(const Tensor& a) {
  // ln sigma(x) = -softplus(-x), computed without overflow.
  return unary_op(
      a,
      [](double x) {
        if (x >= 0) return -std::log1p(std::exp(-x));
        return x - std::log1p(std::exp(x));
      },
      [](double x, double) { return stable_sigmoid(-x); });
}

Tensor add_scalar(const Tensor& a, double s) { return add(a, Tensor::scalar(s)); }
Tensor mul_scalar(const Tensor& a, double s) { return mul(a, Tensor::scalar(s)); }

Tensor elementwise(OpKind kind, const Tensor& a) {
  switch (kind) {
    case OpKind::kNegate: return neg(a);
    case OpKind::kExponential: return exp(a);
    case OpKind::kNaturalLog: return log(a);
    case OpKind::kSigmoid: return sigmoid(a);
    default: throw std::invalid_argument("elementwise: op kind requires two inputs");
  }
}

Tensor elementwise(OpKind kind, const Tensor& a, const Tensor& b) {
  switch (kind) {
    case OpKind::kAdd: return add(a, b);
    case OpKind::kSubtract: return sub(a, b);
    case OpKind::kMultiply: return mul(a, b);
    default: throw std::invalid_argument("elementwise: op kind requires one input");
  }
}

// ---------------------------------------------------------------------------
// linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw std::invalid_argument("matmul requires 2-D tensors, got " + shape_str(a.shape()) +
                                " and " + shape_str(b.shape()));
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1];
  const std::size_t k2 = b.shape()[0], n = b.shape()[1];
  if (k != k2) {
    throw std::invalid_argument("matmul inner dimensions differ: " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double x = av[i * k + p];
      if (x == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += x * bv[p * n + j];
    }
  }
  return make_node({m, n}, std::move(out), {a, b}, [a, b, m, k, n](Tensor::Node& node) {
    auto* na = a.node();
    auto* nb = b.node();
    // dL/da = dL/dc . b^T ; dL/db = a^T . dL/dc
    if (na->requires_grad) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j)
            acc += node.grad[i * n + j] * nb->values[p * n + j];
          na->grad[i * k + p] += acc;
        }
    }
    if (nb->requires_grad) {
      for (std::size_t p = 0; p < k; ++p)
        for (std::size_t j = 0; j < n; ++j) {
          double acc = 0.0;
          for (std::size_t i = 0; i < m; ++i)
            acc += na->values[i * k + p] * node.grad[i * n + j];
          nb->grad[p * n + j] += acc;
        }
    }
  });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw std::invalid_argument("transpose requires a 2-D tensor");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  std::vector<double> out(m * n);
  const auto& av = a.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  return make_node({n, m}, std::move(out), {a}, [a, m, n](Tensor::Node& node) {
    auto* na = a.node();
    if (!na->requires_grad) return;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) na->grad[i * n + j] += node.grad[j * m + i];
  });
}

// ---------------------------------------------------------------------------
// softmax / gather / structure ops

Tensor log_softmax(const Tensor& x) {
  if (x.rank() < 1) throw std::invalid_argument("log_softmax requires rank >= 1");
  const std::size_t v = x.shape().back();
  const std::size_t rows = x.numel() / v;
  std::vector<double> out(x.numel());
  const auto& xv = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * v;
    double mx = row[0];
    for (std::size_t j = 1; j < v; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < v; ++j) denom += std::exp(row[j] - mx);
    const double lse = mx + std::log(denom);
    for (std::size_t j = 0; j < v; ++j) out[r * v + j] = row[j] - lse;
  }
  return make_node(x.shape(), std::move(out), {x}, [x, rows, v](Tensor::Node& node) {
    auto* nx = x.node();
    if (!nx->requires_grad) return;
    // d/dx_j = g_j - softmax_j * sum(g)
    for (std::size_t r = 0; r < rows; ++r) {
      double gsum = 0.0;
      for (std::size_t j = 0; j < v; ++j) gsum += node.grad[r * v + j];
      for (std::size_t j = 0; j < v; ++j) {
        const double sm = std::exp(node.values[r * v + j]);
        nx->grad[r * v + j] += node.grad[r * v + j] - sm * gsum;
      }
    }
  });
}

Tensor gather_last(const Tensor& x, std::span<const int> indices) {
  if (x.rank() != 2) throw std::invalid_argument("gather_last requires a [T x V] tensor");
  const std::size_t t = x.shape()[0], v = x.shape()[1];
  if (indices.size() != t) {
    throw std::invalid_argument("gather_last: " + std::to_string(indices.size()) +
                                " indices for " + std::to_string(t) + " rows");
  }
  std::vector<double> out(t);
  std::vector<int> idx(indices.begin(), indices.end());
  const auto& xv = x.values();
  for (std::size_t i = 0; i < t; ++i) {
    if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= v) {
      throw std::invalid_argument("gather_last: index " + std::to_string(idx[i]) +
                                  " out of range for vocabulary " + std::to_string(v));
    }
    out[i] = xv[i * v + idx[i]];
  }
  return make_node({t}, std::move(out), {x}, [x, idx = std::move(idx), v](Tensor::Node& node) {
    auto* nx = x.node();
    if (!nx->requires_grad) return;
    for (std::size_t i = 0; i < idx.size(); ++i)
      nx->grad[i * v + idx[i]] += node.grad[i];
  });
}

Tensor take_rows(const Tensor& table, std::span<const int> ids) {
  if (table.rank() != 2) throw std::invalid_argument("take_rows requires a 2-D table");
  const std::size_t rows = table.shape()[0], cols = table.shape()[1];
  std::vector<int> idx(ids.begin(), ids.end());
  std::vector<double> out(idx.size() * cols);
  const auto& tv = table.values();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= rows) {
      throw std::invalid_argument("take_rows: row " + std::to_string(idx[i]) +
                                  " out of range for table with " + std::to_string(rows) +
                                  " rows");
    }
    std::copy_n(tv.data() + static_cast<std::size_t>(idx[i]) * cols, cols, out.data() + i * cols);
  }
  const std::size_t n_rows = idx.size();
  return make_node({n_rows, cols}, std::move(out), {table},
                   [table, idx = std::move(idx), cols](Tensor::Node& node) {
                     auto* nt = table.node();
                     if (!nt->requires_grad) return;
                     for (std::size_t i = 0; i < idx.size(); ++i)
                       for (std::size_t j = 0; j < cols; ++j)
                         nt->grad[static_cast<std::size_t>(idx[i]) * cols + j] +=
                             node.grad[i * cols + j];
                   });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  if (x.rank() != 2) throw std::invalid_argument("slice_rows requires a 2-D tensor");
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  if (begin > end || end > rows) {
    throw std::invalid_argument("slice_rows: range [" + std::to_string(begin) + ", " +
                                std::to_string(end) + ") invalid for " + std::to_string(rows) +
                                " rows");
  }
  const std::size_t n = end - begin;
  std::vector<double> out(n * cols);
  std::copy_n(x.values().data() + begin * cols, n * cols, out.data());
  return make_node({n, cols}, std::move(out), {x}, [x, begin, cols](Tensor::Node& node) {
    auto* nx = x.node();
    if (!nx->requires_grad) return;
    for (std::size_t i = 0; i < node.values.size(); ++i)
      nx->grad[begin * cols + i] += node.grad[i];
  });
}

Tensor concat_last(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[0] != b.shape()[0]) {
    throw std::invalid_argument("concat_last requires 2-D tensors with equal rows, got " +
                                shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::size_t rows = a.shape()[0], ca = a.shape()[1], cb = b.shape()[1];
  std::vector<double> out(rows * (ca + cb));
  for (std::size_t i = 0; i < rows; ++i) {
    std::copy_n(a.values().data() + i * ca, ca, out.data() + i * (ca + cb));
    std::copy_n(b.values().data() + i * cb, cb, out.data() + i * (ca + cb) + ca);
  }
  return make_node({rows, ca + cb}, std::move(out), {a, b},
                   [a, b, rows, ca, cb](Tensor::Node& node) {
                     auto* na = a.node();
                     auto* nb = b.node();
                     for (std::size_t i = 0; i < rows; ++i) {
                       if (na->requires_grad)
                         for (std::size_t j = 0; j < ca; ++j)
                           na->grad[i * ca + j] += node.grad[i * (ca + cb) + j];
                       if (nb->requires_grad)
                         for (std::size_t j = 0; j < cb; ++j)
                           nb->grad[i * cb + j] += node.grad[i * (ca + cb) + ca + j];
                     }
                   });
}

// ---------------------------------------------------------------------------
// reductions

Tensor reduce(Reduce kind, const Tensor& x) {
  const std::size_t n = x.numel();
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  const double scale = (kind == Reduce::kMean) ? 1.0 / static_cast<double>(n) : 1.0;
  return make_node({1}, {acc * scale}, {x}, [x, scale](Tensor::Node& node) {
    auto* nx = x.node();
    if (!nx->requires_grad) return;
    for (double& g : nx->grad) g += node.grad[0] * scale;
  });
}

Tensor reduce(Reduce kind, const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) throw std::invalid_argument("reduce: axis out of range");
  const auto& s = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t n = s[axis];
  const double scale = (kind == Reduce::kMean) ? 1.0 / static_cast<double>(n) : 1.0;
  std::vector<std::size_t> out_shape;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != axis) out_shape.push_back(s[i]);
  if (out_shape.empty()) out_shape.push_back(1);
  std::vector<double> out(outer * inner, 0.0);
  const auto& xv = x.values();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t i = 0; i < inner; ++i)
        out[o * inner + i] += xv[(o * n + a) * inner + i];
  for (double& v : out) v *= scale;
  return make_node(out_shape, std::move(out), {x},
                   [x, outer, inner, n, scale](Tensor::Node& node) {
                     auto* nx = x.node();
                     if (!nx->requires_grad) return;
                     for (std::size_t o = 0; o < outer; ++o)
                       for (std::size_t a = 0; a < n; ++a)
                         for (std::size_t i = 0; i < inner; ++i)
                           nx->grad[(o * n + a) * inner + i] +=
                               node.grad[o * inner + i] * scale;
                   });
}

Tensor sum(const Tensor& x) { return reduce(Reduce::kSum, x); }
Tensor mean(const Tensor& x) { return reduce(Reduce::kMean, x); }

// ---------------------------------------------------------------------------
// backward

void backward(const Tensor& root) {
  if (root.numel() != 1) {
    throw std::invalid_argument("backward requires a scalar root, shape is " +
                                shape_str(root.shape()));
  }
  // Iterative post-order DFS for reverse topological order.
  std::vector<Tensor::Node*> order;
  std::unordered_set<Tensor::Node*> visited;
  struct Frame {
    Tensor::Node* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  if (visited.insert(root.node()).second) stack.push_back({root.node(), 0});
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      Tensor::Node* p = f.node->parents[f.next_parent++].node();
      if (visited.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }
  root.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn && (*it)->requires_grad) (*it)->backward_fn(**it);
  }
}

}  // namespace tpo
