#include "sap/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "sap/error.hpp"

namespace sap::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

std::shared_ptr<Node> make_node(Shape shape, const char* op,
                                std::vector<std::shared_ptr<Node>> parents) {
  auto n = std::make_shared<Node>();
  n->data.assign(shape_size(shape), 0.0);
  n->shape = std::move(shape);
  n->op = op;
  for (const auto& p : parents) n->requires_grad = n->requires_grad || p->requires_grad;
  if (n->requires_grad) n->parents = std::move(parents);
  return n;
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a rank-2 tensor, got shape " +
                         shape_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

// Elementwise binary op with a local derivative rule.
template <typename F, typename DA, typename DB>
Tensor elementwise2(const Tensor& a, const Tensor& b, const char* op, F f, DA da, DB db) {
  require_same_shape(a, b, op);
  auto n = make_node(a.shape(), op, {a.node(), b.node()});
  const auto& ad = a.node()->data;
  const auto& bd = b.node()->data;
  for (std::size_t i = 0; i < n->data.size(); ++i) n->data[i] = f(ad[i], bd[i]);
  if (n->requires_grad) {
    n->backward_fn = [da, db](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      if (pa.requires_grad) {
        pa.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
          pa.grad[i] += self.grad[i] * da(pa.data[i], pb.data[i]);
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
          pb.grad[i] += self.grad[i] * db(pa.data[i], pb.data[i]);
      }
    };
  }
  return Tensor(n);
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->data.assign(shape_size(shape), 0.0);
  n->shape = std::move(shape);
  n->requires_grad = requires_grad;
  return Tensor(n);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_size(shape) != values.size()) {
    throw DimensionError("Tensor::from: shape " + shape_string(shape) + " needs " +
                         std::to_string(shape_size(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(n);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

std::size_t Tensor::rows() const { return node_->shape.empty() ? 1 : node_->shape[0]; }

std::size_t Tensor::cols() const {
  return node_->shape.size() < 2 ? 1 : node_->shape[1];
}

std::span<double> Tensor::grad() {
  node_->ensure_grad();
  return node_->grad;
}

double Tensor::item() const {
  if (size() != 1) {
    throw ContractError("item() on a tensor of shape " + shape_string(shape()));
  }
  return node_->data[0];
}

void Tensor::zero_grad() { node_->grad.assign(node_->data.size(), 0.0); }

Tensor Tensor::detach_copy(bool requires_grad) const {
  return from(node_->shape, node_->data, requires_grad);
}

void zero_grad(std::span<Tensor> params) {
  for (auto& p : params) p.zero_grad();
}

std::size_t backward(const Tensor& loss) {
  if (!loss || loss.size() != 1) {
    throw ContractError("backward() requires a scalar loss, got shape " +
                        (loss ? shape_string(loss.shape()) : std::string("<empty>")));
  }
  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  Node* root = loss.node().get();
  if (!root->requires_grad) return 0;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) {
      n->ensure_grad();
      n->backward_fn(*n);
    }
  }
  return order.size();
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_rank2(x, "linear");
  require_rank2(w, "linear");
  const std::size_t n = x.rows(), k = x.cols(), m = w.rows();
  if (w.cols() != k) {
    throw DimensionError("linear: input width " + std::to_string(k) +
                         " does not match weight width " + std::to_string(w.cols()));
  }
  if (b.size() != m) {
    throw DimensionError("linear: bias length " + std::to_string(b.size()) +
                         " does not match output width " + std::to_string(m));
  }
  auto out = make_node({n, m}, "linear", {x.node(), w.node(), b.node()});
  MapMat y(out->data.data(), n, m);
  CMapMat xm(x.data().data(), n, k);
  CMapMat wm(w.data().data(), m, k);
  y.noalias() = xm * wm.transpose();
  Eigen::Map<const Eigen::RowVectorXd> bv(b.data().data(), m);
  y.rowwise() += bv;
  if (out->requires_grad) {
    out->backward_fn = [n, k, m](Node& self) {
      Node& px = *self.parents[0];
      Node& pw = *self.parents[1];
      Node& pb = *self.parents[2];
      CMapMat dy(self.grad.data(), n, m);
      if (px.requires_grad) {
        px.ensure_grad();
        MapMat dx(px.grad.data(), n, k);
        dx.noalias() += dy * CMapMat(pw.data.data(), m, k);
      }
      if (pw.requires_grad) {
        pw.ensure_grad();
        MapMat dw(pw.grad.data(), m, k);
        dw.noalias() += dy.transpose() * CMapMat(px.data.data(), n, k);
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        Eigen::Map<Eigen::RowVectorXd> db(pb.grad.data(), m);
        db += dy.colwise().sum();
      }
    };
  }
  return Tensor(out);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dimensions " + std::to_string(k) + " and " +
                         std::to_string(b.rows()) + " differ");
  }
  auto out = make_node({n, m}, "matmul", {a.node(), b.node()});
  MapMat(out->data.data(), n, m).noalias() =
      CMapMat(a.data().data(), n, k) * CMapMat(b.data().data(), k, m);
  if (out->requires_grad) {
    out->backward_fn = [n, k, m](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      CMapMat dy(self.grad.data(), n, m);
      if (pa.requires_grad) {
        pa.ensure_grad();
        MapMat(pa.grad.data(), n, k).noalias() += dy * CMapMat(pb.data.data(), k, m).transpose();
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        MapMat(pb.grad.data(), k, m).noalias() += CMapMat(pa.data.data(), n, k).transpose() * dy;
      }
    };
  }
  return Tensor(out);
}

Tensor relu(const Tensor& x) {
  auto out = make_node(x.shape(), "relu", {x.node()});
  const auto& xd = x.node()->data;
  for (std::size_t i = 0; i < xd.size(); ++i) out->data[i] = xd[i] > 0.0 ? xd[i] : 0.0;
  if (out->requires_grad) {
    out->backward_fn = [](Node& self) {
      Node& p = *self.parents[0];
      p.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        if (p.data[i] > 0.0) p.grad[i] += self.grad[i];
    };
  }
  return Tensor(out);
}

Tensor sigmoid(const Tensor& x) {
  auto out = make_node(x.shape(), "sigmoid", {x.node()});
  const auto& xd = x.node()->data;
  for (std::size_t i = 0; i < xd.size(); ++i) out->data[i] = 1.0 / (1.0 + std::exp(-xd[i]));
  if (out->requires_grad) {
    out->backward_fn = [](Node& self) {
      Node& p = *self.parents[0];
      p.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        const double s = self.data[i];
        p.grad[i] += self.grad[i] * s * (1.0 - s);
      }
    };
  }
  return Tensor(out);
}

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise2(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return elementwise2(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return elementwise2(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double c) {
  auto out = make_node(a.shape(), "scale", {a.node()});
  const auto& ad = a.node()->data;
  for (std::size_t i = 0; i < ad.size(); ++i) out->data[i] = c * ad[i];
  if (out->requires_grad) {
    out->backward_fn = [c](Node& self) {
      Node& p = *self.parents[0];
      p.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += c * self.grad[i];
    };
  }
  return Tensor(out);
}

Tensor square(const Tensor& x) {
  auto out = make_node(x.shape(), "square", {x.node()});
  const auto& xd = x.node()->data;
  for (std::size_t i = 0; i < xd.size(); ++i) out->data[i] = xd[i] * xd[i];
  if (out->requires_grad) {
    out->backward_fn = [](Node& self) {
      Node& p = *self.parents[0];
      p.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        p.grad[i] += 2.0 * p.data[i] * self.grad[i];
    };
  }
  return Tensor(out);
}

Tensor sum(const Tensor& x) {
  auto out = make_node({1}, "sum", {x.node()});
  double s = 0.0;
  for (double v : x.data()) s += v;
  out->data[0] = s;
  if (out->requires_grad) {
    out->backward_fn = [](Node& self) {
      Node& p = *self.parents[0];
      p.ensure_grad();
      for (double& g : p.grad) g += self.grad[0];
    };
  }
  return Tensor(out);
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw DimensionError("mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank2(x, "slice_cols");
  const std::size_t n = x.rows(), m = x.cols();
  if (begin > end || end > m) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") outside width " + std::to_string(m));
  }
  const std::size_t w = end - begin;
  auto out = make_node({n, w}, "slice_cols", {x.node()});
  const auto& xd = x.node()->data;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < w; ++j) out->data[i * w + j] = xd[i * m + begin + j];
  if (out->requires_grad) {
    out->backward_fn = [n, m, w, begin](Node& self) {
      Node& p = *self.parents[0];
      p.ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < w; ++j) p.grad[i * m + begin + j] += self.grad[i * w + j];
    };
  }
  return Tensor(out);
}

Tensor gather_linear(const Tensor& h, const Tensor& w, const Tensor& b,
                     std::span<const std::uint32_t> rows,
                     std::span<const std::uint32_t> units) {
  require_rank2(h, "gather_linear");
  require_rank2(w, "gather_linear");
  if (rows.size() != units.size()) {
    throw DimensionError("gather_linear: rows and units differ in length");
  }
  const std::size_t n = h.rows(), k = h.cols(), m = w.rows();
  if (w.cols() != k || b.size() != m) {
    throw DimensionError("gather_linear: weight " + shape_string(w.shape()) +
                         " incompatible with hidden width " + std::to_string(k));
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= n || units[i] >= m) {
      throw DimensionError("gather_linear: index out of range at pair " + std::to_string(i));
    }
  }
  auto out = make_node({rows.size()}, "gather_linear", {h.node(), w.node(), b.node()});
  const double* hd = h.data().data();
  const double* wd = w.data().data();
  const double* bd = b.data().data();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double* hr = hd + static_cast<std::size_t>(rows[i]) * k;
    const double* wr = wd + static_cast<std::size_t>(units[i]) * k;
    double acc = bd[units[i]];
    for (std::size_t j = 0; j < k; ++j) acc += wr[j] * hr[j];
    out->data[i] = acc;
  }
  if (out->requires_grad) {
    std::vector<std::uint32_t> r(rows.begin(), rows.end());
    std::vector<std::uint32_t> u(units.begin(), units.end());
    out->backward_fn = [r = std::move(r), u = std::move(u), k](Node& self) {
      Node& ph = *self.parents[0];
      Node& pw = *self.parents[1];
      Node& pb = *self.parents[2];
      if (ph.requires_grad) ph.ensure_grad();
      if (pw.requires_grad) pw.ensure_grad();
      if (pb.requires_grad) pb.ensure_grad();
      for (std::size_t i = 0; i < r.size(); ++i) {
        const double g = self.grad[i];
        if (g == 0.0) continue;
        const std::size_t hr = static_cast<std::size_t>(r[i]) * k;
        const std::size_t wr = static_cast<std::size_t>(u[i]) * k;
        if (ph.requires_grad)
          for (std::size_t j = 0; j < k; ++j) ph.grad[hr + j] += g * pw.data[wr + j];
        if (pw.requires_grad)
          for (std::size_t j = 0; j < k; ++j) pw.grad[wr + j] += g * ph.data[hr + j];
        if (pb.requires_grad) pb.grad[u[i]] += g;
      }
    };
  }
  return Tensor(out);
}

Tensor segment_sum(const Tensor& x, std::span<const std::uint32_t> segment,
                   std::size_t segments) {
  if (segment.size() != x.size()) {
    throw DimensionError("segment_sum: " + std::to_string(segment.size()) +
                         " segment ids for " + std::to_string(x.size()) + " values");
  }
  auto out = make_node({segments}, "segment_sum", {x.node()});
  for (std::size_t i = 0; i < segment.size(); ++i) {
    if (segment[i] >= segments) throw DimensionError("segment_sum: segment id out of range");
    out->data[segment[i]] += x.data()[i];
  }
  if (out->requires_grad) {
    std::vector<std::uint32_t> seg(segment.begin(), segment.end());
    out->backward_fn = [seg = std::move(seg)](Node& self) {
      Node& p = *self.parents[0];
      p.ensure_grad();
      for (std::size_t i = 0; i < seg.size(); ++i) p.grad[i] += self.grad[seg[i]];
    };
  }
  return Tensor(out);
}

Tensor weighted_abs_sum(const Tensor& x, std::span<const double> weight) {
  if (weight.size() != x.size()) {
    throw DimensionError("weighted_abs_sum: weight length mismatch");
  }
  auto out = make_node({1}, "weighted_abs_sum", {x.node()});
  double s = 0.0;
  for (std::size_t i = 0; i < weight.size(); ++i) s += weight[i] * std::abs(x.data()[i]);
  out->data[0] = s;
  if (out->requires_grad) {
    std::vector<double> w(weight.begin(), weight.end());
    out->backward_fn = [w = std::move(w)](Node& self) {
      Node& p = *self.parents[0];
      p.ensure_grad();
      const double g = self.grad[0];
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double v = p.data[i];
        const double sign = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
        p.grad[i] += g * w[i] * sign;
      }
    };
  }
  return Tensor(out);
}

}  // namespace sap::ad

namespace sap::ad {

Tensor gather(const Tensor& x, std::span<const std::uint32_t> index) {
  const std::size_t n = x.size();
  for (auto i : index)
    if (i >= n) throw DimensionError("gather: index " + std::to_string(i) + " out of range");
  auto out = std::make_shared<Node>();
  out->shape = {index.size()};
  out->op = "gather";
  out->data.resize(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) out->data[i] = x.data()[index[i]];
  out->requires_grad = x.requires_grad();
  if (out->requires_grad) {
    out->parents = {x.node()};
    std::vector<std::uint32_t> idx(index.begin(), index.end());
    out->backward_fn = [idx = std::move(idx)](Node& self) {
      Node& p = *self.parents[0];
      p.ensure_grad();
      for (std::size_t i = 0; i < idx.size(); ++i) p.grad[idx[i]] += self.grad[i];
    };
  }
  return Tensor(out);
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::uint32_t> labels) {
  if (logits.rank() != 2) throw DimensionError("softmax_cross_entropy: logits must be [n,C]");
  const std::size_t n = logits.rows(), c = logits.cols();
  if (labels.size() != n) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(n) + " rows");
  }
  if (n == 0) throw DimensionError("softmax_cross_entropy: empty batch");
  std::vector<double> prob(n * c);
  double loss = 0.0;
  const double* x = logits.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= c) {
      throw DimensionError("softmax_cross_entropy: label " + std::to_string(labels[i]) +
                           " outside " + std::to_string(c) + " classes");
    }
    const double* row = x + i * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    for (std::size_t j = 0; j < c; ++j) prob[i * c + j] = std::exp(row[j] - mx) / z;
    loss += -(row[labels[i]] - mx - std::log(z));
  }
  auto out = std::make_shared<Node>();
  out->shape = {1};
  out->op = "softmax_cross_entropy";
  out->data = {loss / static_cast<double>(n)};
  out->requires_grad = logits.requires_grad();
  if (out->requires_grad) {
    out->parents = {logits.node()};
    std::vector<std::uint32_t> lab(labels.begin(), labels.end());
    out->backward_fn = [prob = std::move(prob), lab = std::move(lab), n, c](Node& self) {
      Node& p = *self.parents[0];
      p.ensure_grad();
      const double g = self.grad[0] / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j)
          p.grad[i * c + j] += g * (prob[i * c + j] - (j == lab[i] ? 1.0 : 0.0));
    };
  }
  return Tensor(out);
}

Tensor bce_with_logits(const Tensor& x, std::span<const double> targets) {
  if (targets.size() != x.size()) throw DimensionError("bce_with_logits: target length mismatch");
  if (x.size() == 0) throw DimensionError("bce_with_logits: empty input");
  const std::size_t n = x.size();
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = x.data()[i];
    // log(1+exp(-|z|)) + max(z,0) - z*t
    loss += std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0) - z * targets[i];
  }
  auto out = std::make_shared<Node>();
  out->shape = {1};
  out->op = "bce_with_logits";
  out->data = {loss / static_cast<double>(n)};
  out->requires_grad = x.requires_grad();
  if (out->requires_grad) {
    out->parents = {x.node()};
    std::vector<double> t(targets.begin(), targets.end());
    out->backward_fn = [t = std::move(t), n](Node& self) {
      Node& p = *self.parents[0];
      p.ensure_grad();
      const double g = self.grad[0] / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double s = 1.0 / (1.0 + std::exp(-p.data[i]));
        p.grad[i] += g * (s - t[i]);
      }
    };
  }
  return Tensor(out);
}

}  // namespace sap::ad

namespace sap::ad {

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape: " + shape_string(x.shape()) + " -> " + shape_string(shape));
  }
  auto out = std::make_shared<Node>();
  out->shape = std::move(shape);
  out->op = "reshape";
  out->data = x.node()->data;
  out->requires_grad = x.requires_grad();
  if (out->requires_grad) {
    out->parents = {x.node()};
    out->backward_fn = [](Node& self) {
      Node& p = *self.parents[0];
      p.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
    };
  }
  return Tensor(out);
}

}  // namespace sap::ad

namespace sap::ad {

Tensor segment_max(const Tensor& x, std::span<const std::uint32_t> segment, std::size_t segments) {
  if (segment.size() != x.size()) throw DimensionError("segment_max: segment length mismatch");
  std::vector<std::int64_t> arg(segments, -1);
  for (std::size_t i = 0; i < segment.size(); ++i) {
    const auto s = segment[i];
    if (s >= segments) throw DimensionError("segment_max: segment id out of range");
    if (arg[s] < 0 || x.data()[i] > x.data()[static_cast<std::size_t>(arg[s])]) arg[s] = std::int64_t(i);
  }
  auto out = std::make_shared<Node>();
  out->shape = {segments};
  out->op = "segment_max";
  out->data.resize(segments);
  for (std::size_t s = 0; s < segments; ++s) {
    if (arg[s] < 0) throw ContractError("segment_max: empty segment " + std::to_string(s));
    out->data[s] = x.data()[static_cast<std::size_t>(arg[s])];
  }
  out->requires_grad = x.requires_grad();
  if (out->requires_grad) {
    out->parents = {x.node()};
    out->backward_fn = [arg = std::move(arg)](Node& self) {
      Node& p = *self.parents[0];
      p.ensure_grad();
      for (std::size_t s = 0; s < arg.size(); ++s) p.grad[static_cast<std::size_t>(arg[s])] += self.grad[s];
    };
  }
  return Tensor(out);
}

}  // namespace sap::ad
