// Copyright 2026 The occflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "occflow/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace occflow
{

namespace detail
{

struct Node
{
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;
};

}  // namespace detail

namespace
{

thread_local bool g_grad_enabled = true;

std::size_t normalize_axis(int axis, std::size_t rank)
{
  const int r = static_cast<int>(rank);
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for rank " +
                         std::to_string(rank));
  }
  return static_cast<std::size_t>(a);
}

// outer x axis x inner decomposition of a shape around one axis.
struct AxisSplit
{
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape & shape, std::size_t axis)
{
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) {
    s.outer *= shape[i];
  }
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) {
    s.inner *= shape[i];
  }
  return s;
}

Shape broadcast_shapes(const Shape & a, const Shape & b)
{
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw DimensionError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    }
    out[i] = std::max(da, db);
  }
  return out;
}

// Offsets into an input of shape `in` for every element of the broadcast `out`.
std::vector<std::size_t> broadcast_offsets(const Shape & in, const Shape & out)
{
  const std::size_t rank = out.size();
  std::vector<std::size_t> stride(rank, 0);
  std::size_t s = 1;
  for (std::size_t i = in.size(); i-- > 0;) {
    const std::size_t oi = i + (rank - in.size());
    stride[oi] = in[i] == 1 ? 0 : s;
    s *= in[i];
  }
  const std::size_t n = shape_numel(out);
  std::vector<std::size_t> offsets(n);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t off = 0;
  for (std::size_t k = 0; k < n; ++k) {
    offsets[k] = off;
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      off += stride[d];
      if (idx[d] < out[d]) {
        break;
      }
      off -= stride[d] * idx[d];
      idx[d] = 0;
    }
  }
  return offsets;
}

bool is_suffix(const Shape & small, const Shape & big)
{
  if (small.size() > big.size()) {
    return false;
  }
  return std::equal(small.begin(), small.end(), big.end() - static_cast<long>(small.size()));
}

enum class BinOp
{
  add,
  sub,
  mul,
  div,
};

inline double apply(BinOp op, double x, double y)
{
  switch (op) {
    case BinOp::add:
      return x + y;
    case BinOp::sub:
      return x - y;
    case BinOp::mul:
      return x * y;
    case BinOp::div:
      return x / y;
  }
  return 0.0;
}

// Layout of a binary op over its two (possibly broadcast) operands.
struct BinaryLayout
{
  enum Kind
  {
    same,
    b_suffix,
    a_suffix,
    general,
  } kind;
  std::size_t period = 1;
  std::vector<std::size_t> off_a;
  std::vector<std::size_t> off_b;

  std::size_t ia(std::size_t k) const
  {
    switch (kind) {
      case same:
      case b_suffix:
        return k;
      case a_suffix:
        return k % period;
      default:
        return off_a[k];
    }
  }
  std::size_t ib(std::size_t k) const
  {
    switch (kind) {
      case same:
      case a_suffix:
        return k;
      case b_suffix:
        return k % period;
      default:
        return off_b[k];
    }
  }
};

Tensor binary(const Tensor & a, const Tensor & b, BinOp op)
{
  const Shape & sa = a.shape();
  const Shape & sb = b.shape();
  auto layout = std::make_shared<BinaryLayout>();
  Shape out;
  if (sa == sb) {
    layout->kind = BinaryLayout::same;
    out = sa;
  } else if (is_suffix(sb, sa)) {
    layout->kind = BinaryLayout::b_suffix;
    layout->period = shape_numel(sb);
    out = sa;
  } else if (is_suffix(sa, sb)) {
    layout->kind = BinaryLayout::a_suffix;
    layout->period = shape_numel(sa);
    out = sb;
  } else {
    out = broadcast_shapes(sa, sb);
    layout->kind = BinaryLayout::general;
    layout->off_a = broadcast_offsets(sa, out);
    layout->off_b = broadcast_offsets(sb, out);
  }
  const std::size_t n = shape_numel(out);
  std::vector<double> val(n);
  const auto va = a.values();
  const auto vb = b.values();
  for (std::size_t k = 0; k < n; ++k) {
    val[k] = apply(op, va[layout->ia(k)], vb[layout->ib(k)]);
  }
  return make_result(std::move(out), std::move(val), {a, b},
                     [a, b, op, layout, n](std::span<const double> g) {
                       double * ga = grad_sink(a);
                       double * gb = grad_sink(b);
                       const auto va = a.values();
                       const auto vb = b.values();
                       for (std::size_t k = 0; k < n; ++k) {
                         const std::size_t i = layout->ia(k);
                         const std::size_t j = layout->ib(k);
                         switch (op) {
                           case BinOp::add:
                             if (ga) ga[i] += g[k];
                             if (gb) gb[j] += g[k];
                             break;
                           case BinOp::sub:
                             if (ga) ga[i] += g[k];
                             if (gb) gb[j] -= g[k];
                             break;
                           case BinOp::mul:
                             if (ga) ga[i] += g[k] * vb[j];
                             if (gb) gb[j] += g[k] * va[i];
                             break;
                           case BinOp::div:
                             if (ga) ga[i] += g[k] / vb[j];
                             if (gb) gb[j] -= g[k] * va[i] / (vb[j] * vb[j]);
                             break;
                         }
                       }
                     });
}

// Elementwise map whose local derivative is a function of input and output.
template <typename F, typename D>
Tensor unary(const Tensor & x, F f, D dfdx)
{
  const auto vx = x.values();
  std::vector<double> val(vx.size());
  for (std::size_t i = 0; i < vx.size(); ++i) {
    val[i] = f(vx[i]);
  }
  auto out_vals = std::make_shared<std::vector<double>>(val);
  return make_result(x.shape(), std::move(val), {x}, [x, out_vals, dfdx](std::span<const double> g) {
    double * gx = grad_sink(x);
    if (!gx) return;
    const auto vx = x.values();
    const auto & vy = *out_vals;
    for (std::size_t i = 0; i < vx.size(); ++i) {
      gx[i] += g[i] * dfdx(vx[i], vy[i]);
    }
  });
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

std::size_t shape_numel(const Shape & shape)
{
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape & shape)
{
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    os << (i ? "," : "") << shape[i];
  }
  os << ']';
  return os.str();
}

// ------------------------------------------------------------------ Tensor

Tensor::Tensor(Shape shape, double fill) : node_(std::make_shared<detail::Node>())
{
  node_->value.assign(shape_numel(shape), fill);
  node_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
: node_(std::make_shared<detail::Node>())
{
  if (values.size() != shape_numel(shape)) {
    throw DimensionError("value count " + std::to_string(values.size()) + " does not match shape " +
                         shape_str(shape));
  }
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

const Shape & Tensor::shape() const
{
  if (!node_) throw ContractError("use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(int axis) const { return shape()[normalize_axis(axis, rank())]; }

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::span<const double> Tensor::values() const
{
  if (!node_) throw ContractError("use of undefined tensor");
  return node_->value;
}

std::span<double> Tensor::data()
{
  if (!node_) throw ContractError("use of undefined tensor");
  return node_->value;
}

double Tensor::item() const
{
  if (numel() != 1) {
    throw ContractError("item() on tensor of shape " + shape_str(shape()));
  }
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

Tensor & Tensor::set_requires_grad(bool flag)
{
  shape();
  node_->requires_grad = flag;
  return *this;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const
{
  if (!has_grad()) throw ContractError("tensor has no gradient");
  return node_->grad;
}

void Tensor::zero_grad()
{
  if (node_) node_->grad.clear();
}

Tensor Tensor::detach() const { return Tensor(shape(), node_->value, false); }

Tensor make_result(Shape shape, std::vector<double> values, const std::vector<Tensor> & inputs,
                   BackwardFn backward)
{
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  if (g_grad_enabled) {
    for (const auto & in : inputs) {
      if (in.requires_grad()) {
        node->parents.push_back(in.node());
      }
    }
    if (!node->parents.empty()) {
      node->requires_grad = true;
      node->backward = std::move(backward);
    }
  }
  return Tensor(std::move(node));
}

double * grad_sink(const Tensor & t)
{
  if (!t.requires_grad()) return nullptr;
  auto & node = *t.node();
  if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
  return node.grad.data();
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

void backward(const Tensor & loss)
{
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward() requires a scalar loss, got " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward() on a loss that does not depend on any parameter");
  }
  // Iterative post-order DFS gives a topological order.
  std::vector<detail::Node *> order;
  std::unordered_set<detail::Node *> seen;
  std::vector<std::pair<detail::Node *, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto & [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node * p = node->parents[next++].get();
      if (seen.insert(p).second) {
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  auto * root = loss.node().get();
  if (root->grad.empty()) root->grad.assign(1, 0.0);
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node * node = *it;
    if (node->backward && !node->grad.empty()) {
      node->backward(node->grad);
    }
  }
  // Release the graph; interior gradients are not retained.
  for (detail::Node * node : order) {
    if (node->backward) {
      node->backward = nullptr;
      node->parents.clear();
      node->grad.clear();
      node->grad.shrink_to_fit();
    }
  }
}

// --------------------------------------------------------------- arithmetic

Tensor add(const Tensor & a, const Tensor & b) { return binary(a, b, BinOp::add); }
Tensor sub(const Tensor & a, const Tensor & b) { return binary(a, b, BinOp::sub); }
Tensor mul(const Tensor & a, const Tensor & b) { return binary(a, b, BinOp::mul); }
Tensor div(const Tensor & a, const Tensor & b) { return binary(a, b, BinOp::div); }

Tensor scale(const Tensor & x, double factor)
{
  return unary(
    x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor & x, double value)
{
  return unary(
    x, [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor tanh(const Tensor & x)
{
  return unary(
    x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor & x)
{
  return unary(
    x,
    [](double v) {
      if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
      const double e = std::exp(v);
      return e / (1.0 + e);
    },
    [](double, double y) { return y * (1.0 - y); });
}

Tensor gelu(const Tensor & x)
{
  return unary(
    x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); },
    [](double v, double) {
      const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      return cdf + v * pdf;
    });
}

Tensor elu(const Tensor & x)
{
  return unary(
    x, [](double v) { return v > 0 ? v : std::expm1(v); },
    [](double v, double y) { return v > 0 ? 1.0 : y + 1.0; });
}

Tensor exp(const Tensor & x)
{
  return unary(
    x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor & x)
{
  return unary(
    x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor clamp(const Tensor & x, double lo, double hi)
{
  return unary(
    x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
    [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

Tensor matmul(const Tensor & a, const Tensor & b)
{
  const Shape & sa = a.shape();
  const Shape & sb = b.shape();
  if (sa.size() < 2 || sb.size() < 2) {
    throw DimensionError("matmul needs rank >= 2 operands, got " + shape_str(sa) + " and " +
                         shape_str(sb));
  }
  const std::size_t m = sa[sa.size() - 2];
  const std::size_t k = sa[sa.size() - 1];
  const std::size_t k2 = sb[sb.size() - 2];
  const std::size_t n = sb[sb.size() - 1];
  if (k != k2) {
    throw DimensionError("matmul inner extents differ: " + shape_str(sa) + " x " + shape_str(sb));
  }
  const Shape ba(sa.begin(), sa.end() - 2);
  const Shape bb(sb.begin(), sb.end() - 2);
  Shape batch;
  try {
    batch = broadcast_shapes(ba, bb);
  } catch (const DimensionError &) {
    throw DimensionError("matmul batch extents not broadcastable: " + shape_str(sa) + " x " +
                         shape_str(sb));
  }
  auto off_a = std::make_shared<std::vector<std::size_t>>(broadcast_offsets(ba, batch));
  auto off_b = std::make_shared<std::vector<std::size_t>>(broadcast_offsets(bb, batch));
  const std::size_t nb = shape_numel(batch);
  Shape out = batch;
  out.push_back(m);
  out.push_back(n);
  std::vector<double> val(nb * m * n, 0.0);
  const auto va = a.values();
  const auto vb = b.values();
  for (std::size_t t = 0; t < nb; ++t) {
    const double * A = va.data() + (*off_a)[t] * m * k;
    const double * B = vb.data() + (*off_b)[t] * k * n;
    double * C = val.data() + t * m * n;
    for (std::size_t i = 0; i < m; ++i) {
      double * crow = C + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = A[i * k + p];
        const double * brow = B + p * n;
        for (std::size_t j = 0; j < n; ++j) {
          crow[j] += aip * brow[j];
        }
      }
    }
  }
  return make_result(std::move(out), std::move(val), {a, b},
                     [a, b, off_a, off_b, nb, m, k, n](std::span<const double> g) {
                       double * ga = grad_sink(a);
                       double * gb = grad_sink(b);
                       const auto va = a.values();
                       const auto vb = b.values();
                       for (std::size_t t = 0; t < nb; ++t) {
                         const double * A = va.data() + (*off_a)[t] * m * k;
                         const double * B = vb.data() + (*off_b)[t] * k * n;
                         const double * G = g.data() + t * m * n;
                         if (ga) {
                           double * GA = ga + (*off_a)[t] * m * k;
                           for (std::size_t i = 0; i < m; ++i) {
                             for (std::size_t p = 0; p < k; ++p) {
                               double s = 0.0;
                               const double * brow = B + p * n;
                               const double * grow = G + i * n;
                               for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
                               GA[i * k + p] += s;
                             }
                           }
                         }
                         if (gb) {
                           double * GB = gb + (*off_b)[t] * k * n;
                           for (std::size_t i = 0; i < m; ++i) {
                             const double * grow = G + i * n;
                             for (std::size_t p = 0; p < k; ++p) {
                               const double aip = A[i * k + p];
                               double * gbrow = GB + p * n;
                               for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
                             }
                           }
                         }
                       }
                     });
}

// ------------------------------------------------------------------- layout

Tensor reshape(const Tensor & x, Shape shape)
{
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("cannot reshape " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  std::vector<double> val(x.values().begin(), x.values().end());
  return make_result(std::move(shape), std::move(val), {x}, [x](std::span<const double> g) {
    double * gx = grad_sink(x);
    if (!gx) return;
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Tensor permute(const Tensor & x, const std::vector<std::size_t> & axes)
{
  const Shape & in = x.shape();
  const std::size_t rank = in.size();
  if (axes.size() != rank) {
    throw DimensionError("permute axes do not match rank of " + shape_str(in));
  }
  std::vector<std::size_t> in_stride(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_stride[i - 1] = in_stride[i] * in[i];
  Shape out(rank);
  std::vector<std::size_t> stride(rank);
  std::vector<bool> used(rank, false);
  for (std::size_t i = 0; i < rank; ++i) {
    if (axes[i] >= rank || used[axes[i]]) {
      throw DimensionError("invalid permutation for " + shape_str(in));
    }
    used[axes[i]] = true;
    out[i] = in[axes[i]];
    stride[i] = in_stride[axes[i]];
  }
  const std::size_t n = x.numel();
  auto src = std::make_shared<std::vector<std::size_t>>(n);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t off = 0;
  for (std::size_t k = 0; k < n; ++k) {
    (*src)[k] = off;
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      off += stride[d];
      if (idx[d] < out[d]) break;
      off -= stride[d] * idx[d];
      idx[d] = 0;
    }
  }
  std::vector<double> val(n);
  const auto vx = x.values();
  for (std::size_t k = 0; k < n; ++k) val[k] = vx[(*src)[k]];
  return make_result(std::move(out), std::move(val), {x}, [x, src](std::span<const double> g) {
    double * gx = grad_sink(x);
    if (!gx) return;
    for (std::size_t k = 0; k < g.size(); ++k) gx[(*src)[k]] += g[k];
  });
}

Tensor transpose(const Tensor & x, int axis0, int axis1)
{
  const std::size_t rank = x.rank();
  std::vector<std::size_t> axes(rank);
  std::iota(axes.begin(), axes.end(), std::size_t{0});
  std::swap(axes[normalize_axis(axis0, rank)], axes[normalize_axis(axis1, rank)]);
  return permute(x, axes);
}

Tensor take_rows(const Tensor & x, std::span<const std::size_t> rows)
{
  const Shape & in = x.shape();
  if (in.empty()) throw DimensionError("take_rows on a scalar");
  const std::size_t row = x.numel() / in[0];
  for (std::size_t r : rows) {
    if (r >= in[0]) {
      throw DimensionError("row index " + std::to_string(r) + " out of range for " + shape_str(in));
    }
  }
  Shape out = in;
  out[0] = rows.size();
  std::vector<double> val(rows.size() * row);
  const auto vx = x.values();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(vx.begin() + static_cast<long>(rows[i] * row), row, val.begin() + static_cast<long>(i * row));
  }
  auto idx = std::make_shared<std::vector<std::size_t>>(rows.begin(), rows.end());
  return make_result(std::move(out), std::move(val), {x}, [x, idx, row](std::span<const double> g) {
    double * gx = grad_sink(x);
    if (!gx) return;
    for (std::size_t i = 0; i < idx->size(); ++i) {
      double * dst = gx + (*idx)[i] * row;
      const double * src = g.data() + i * row;
      for (std::size_t j = 0; j < row; ++j) dst[j] += src[j];
    }
  });
}

Tensor concat(const std::vector<Tensor> & xs, int axis)
{
  if (xs.empty()) throw DimensionError("concat of zero tensors");
  const Shape & first = xs[0].shape();
  const std::size_t ax = normalize_axis(axis, first.size());
  Shape out = first;
  out[ax] = 0;
  for (const auto & t : xs) {
    const Shape & s = t.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) {
      if (i != ax && s[i] != first[i]) ok = false;
    }
    if (!ok) {
      throw DimensionError("concat shape mismatch: " + shape_str(first) + " vs " + shape_str(s));
    }
    out[ax] += s[ax];
  }
  const AxisSplit so = split_at(out, ax);
  std::vector<double> val(shape_numel(out));
  std::vector<std::size_t> starts;
  std::size_t start = 0;
  for (const auto & t : xs) {
    starts.push_back(start);
    const AxisSplit st = split_at(t.shape(), ax);
    const auto v = t.values();
    for (std::size_t o = 0; o < st.outer; ++o) {
      std::copy_n(v.begin() + static_cast<long>(o * st.extent * st.inner), st.extent * st.inner,
                  val.begin() + static_cast<long>((o * so.extent + start) * so.inner));
    }
    start += st.extent;
  }
  return make_result(std::move(out), std::move(val), xs,
                     [xs, starts, so, ax](std::span<const double> g) {
                       for (std::size_t i = 0; i < xs.size(); ++i) {
                         double * gx = grad_sink(xs[i]);
                         if (!gx) continue;
                         const AxisSplit st = split_at(xs[i].shape(), ax);
                         const std::size_t len = st.extent * st.inner;
                         for (std::size_t o = 0; o < st.outer; ++o) {
                           const double * src = g.data() + (o * so.extent + starts[i]) * so.inner;
                           double * dst = gx + o * len;
                           for (std::size_t j = 0; j < len; ++j) dst[j] += src[j];
                         }
                       }
                     });
}

Tensor slice(const Tensor & x, int axis, std::size_t start, std::size_t length)
{
  const std::size_t ax = normalize_axis(axis, x.rank());
  const AxisSplit s = split_at(x.shape(), ax);
  if (start + length > s.extent) {
    throw DimensionError("slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") out of range for " + shape_str(x.shape()));
  }
  Shape out = x.shape();
  out[ax] = length;
  std::vector<double> val(s.outer * length * s.inner);
  const auto vx = x.values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(vx.begin() + static_cast<long>((o * s.extent + start) * s.inner), length * s.inner,
                val.begin() + static_cast<long>(o * length * s.inner));
  }
  return make_result(std::move(out), std::move(val), {x},
                     [x, s, start, length](std::span<const double> g) {
                       double * gx = grad_sink(x);
                       if (!gx) return;
                       for (std::size_t o = 0; o < s.outer; ++o) {
                         double * dst = gx + (o * s.extent + start) * s.inner;
                         const double * src = g.data() + o * length * s.inner;
                         for (std::size_t j = 0; j < length * s.inner; ++j) dst[j] += src[j];
                       }
                     });
}

// --------------------------------------------------------------- reductions

Tensor sum(const Tensor & x)
{
  double s = 0.0;
  for (double v : x.values()) s += v;
  return make_result(Shape{}, {s}, {x}, [x](std::span<const double> g) {
    double * gx = grad_sink(x);
    if (!gx) return;
    const std::size_t n = x.numel();
    for (std::size_t i = 0; i < n; ++i) gx[i] += g[0];
  });
}

Tensor mean(const Tensor & x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor sum_axis(const Tensor & x, int axis)
{
  const std::size_t ax = normalize_axis(axis, x.rank());
  const AxisSplit s = split_at(x.shape(), ax);
  Shape out = x.shape();
  out.erase(out.begin() + static_cast<long>(ax));
  std::vector<double> val(s.outer * s.inner, 0.0);
  const auto vx = x.values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t a = 0; a < s.extent; ++a) {
      const double * src = vx.data() + (o * s.extent + a) * s.inner;
      double * dst = val.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
    }
  }
  return make_result(std::move(out), std::move(val), {x}, [x, s](std::span<const double> g) {
    double * gx = grad_sink(x);
    if (!gx) return;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t a = 0; a < s.extent; ++a) {
        double * dst = gx + (o * s.extent + a) * s.inner;
        const double * src = g.data() + o * s.inner;
        for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
      }
    }
  });
}

Tensor max_axis(const Tensor & x, int axis)
{
  const std::size_t ax = normalize_axis(axis, x.rank());
  const AxisSplit s = split_at(x.shape(), ax);
  if (s.extent == 0) throw DimensionError("max over empty axis");
  Shape out = x.shape();
  out.erase(out.begin() + static_cast<long>(ax));
  std::vector<double> val(s.outer * s.inner);
  auto arg = std::make_shared<std::vector<std::size_t>>(s.outer * s.inner);
  const auto vx = x.values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      std::size_t best = o * s.extent * s.inner + i;
      for (std::size_t a = 1; a < s.extent; ++a) {
        const std::size_t c = (o * s.extent + a) * s.inner + i;
        if (vx[c] > vx[best]) best = c;
      }
      val[o * s.inner + i] = vx[best];
      (*arg)[o * s.inner + i] = best;
    }
  }
  return make_result(std::move(out), std::move(val), {x}, [x, arg](std::span<const double> g) {
    double * gx = grad_sink(x);
    if (!gx) return;
    for (std::size_t k = 0; k < arg->size(); ++k) gx[(*arg)[k]] += g[k];
  });
}

Tensor softmax(const Tensor & x, int axis)
{
  const std::size_t ax = normalize_axis(axis, x.rank());
  const AxisSplit s = split_at(x.shape(), ax);
  const auto vx = x.values();
  std::vector<double> val(vx.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.extent * s.inner + i;
      double mx = vx[base];
      for (std::size_t a = 1; a < s.extent; ++a) mx = std::max(mx, vx[base + a * s.inner]);
      double z = 0.0;
      for (std::size_t a = 0; a < s.extent; ++a) {
        const double e = std::exp(vx[base + a * s.inner] - mx);
        val[base + a * s.inner] = e;
        z += e;
      }
      for (std::size_t a = 0; a < s.extent; ++a) val[base + a * s.inner] /= z;
    }
  }
  auto y = std::make_shared<std::vector<double>>(val);
  return make_result(x.shape(), std::move(val), {x}, [x, y, s](std::span<const double> g) {
    double * gx = grad_sink(x);
    if (!gx) return;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.extent * s.inner + i;
        double dot = 0.0;
        for (std::size_t a = 0; a < s.extent; ++a) {
          dot += g[base + a * s.inner] * (*y)[base + a * s.inner];
        }
        for (std::size_t a = 0; a < s.extent; ++a) {
          const std::size_t c = base + a * s.inner;
          gx[c] += (*y)[c] * (g[c] - dot);
        }
      }
    }
  });
}

Tensor layer_norm(const Tensor & x, int axis, double eps)
{
  if (!(eps > 0.0)) throw ContractError("layer_norm eps must be positive");
  const std::size_t ax = normalize_axis(axis, x.rank());
  const AxisSplit s = split_at(x.shape(), ax);
  const auto vx = x.values();
  std::vector<double> val(vx.size());
  auto inv_std = std::make_shared<std::vector<double>>(s.outer * s.inner);
  const double n = static_cast<double>(s.extent);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.extent * s.inner + i;
      double mu = 0.0;
      for (std::size_t a = 0; a < s.extent; ++a) mu += vx[base + a * s.inner];
      mu /= n;
      double var = 0.0;
      for (std::size_t a = 0; a < s.extent; ++a) {
        const double d = vx[base + a * s.inner] - mu;
        var += d * d;
      }
      var /= n;
      const double r = 1.0 / std::sqrt(var + eps);
      (*inv_std)[o * s.inner + i] = r;
      for (std::size_t a = 0; a < s.extent; ++a) {
        val[base + a * s.inner] = (vx[base + a * s.inner] - mu) * r;
      }
    }
  }
  auto y = std::make_shared<std::vector<double>>(val);
  return make_result(x.shape(), std::move(val), {x}, [x, y, inv_std, s, n](std::span<const double> g) {
    double * gx = grad_sink(x);
    if (!gx) return;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.extent * s.inner + i;
        double mg = 0.0;
        double mgy = 0.0;
        for (std::size_t a = 0; a < s.extent; ++a) {
          const std::size_t c = base + a * s.inner;
          mg += g[c];
          mgy += g[c] * (*y)[c];
        }
        mg /= n;
        mgy /= n;
        const double r = (*inv_std)[o * s.inner + i];
        for (std::size_t a = 0; a < s.extent; ++a) {
          const std::size_t c = base + a * s.inner;
          gx[c] += r * (g[c] - mg - (*y)[c] * mgy);
        }
      }
    }
  });
}

// -------------------------------------------------------------------- image

Tensor conv2d(const Tensor & x, const Tensor & kernel, std::size_t stride, std::size_t padding)
{
  const Shape & sx = x.shape();
  const Shape & sk = kernel.shape();
  if (sx.size() != 4 || sk.size() != 4) {
    throw DimensionError("conv2d expects x[B,H,W,Cin] and kernel[kh,kw,Cin,Cout], got " +
                         shape_str(sx) + " and " + shape_str(sk));
  }
  if (stride == 0) throw ContractError("conv2d stride must be positive");
  const std::size_t B = sx[0], H = sx[1], W = sx[2], Cin = sx[3];
  const std::size_t kh = sk[0], kw = sk[1], Cout = sk[3];
  if (sk[2] != Cin) {
    throw DimensionError("conv2d channel mismatch: " + shape_str(sx) + " vs kernel " + shape_str(sk));
  }
  if (kh > H + 2 * padding || kw > W + 2 * padding) {
    throw DimensionError("conv2d kernel " + shape_str(sk) + " larger than padded input " +
                         shape_str(sx));
  }
  const std::size_t Ho = (H + 2 * padding - kh) / stride + 1;
  const std::size_t Wo = (W + 2 * padding - kw) / stride + 1;
  std::vector<double> val(B * Ho * Wo * Cout, 0.0);
  const auto vx = x.values();
  const auto vk = kernel.values();
  const long pad = static_cast<long>(padding);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t oy = 0; oy < Ho; ++oy) {
      for (std::size_t ox = 0; ox < Wo; ++ox) {
        double * o = val.data() + ((b * Ho + oy) * Wo + ox) * Cout;
        for (std::size_t ky = 0; ky < kh; ++ky) {
          const long iy = static_cast<long>(oy * stride + ky) - pad;
          if (iy < 0 || iy >= static_cast<long>(H)) continue;
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const long ix = static_cast<long>(ox * stride + kx) - pad;
            if (ix < 0 || ix >= static_cast<long>(W)) continue;
            const double * in = vx.data() + ((b * H + static_cast<std::size_t>(iy)) * W +
                                             static_cast<std::size_t>(ix)) * Cin;
            const double * kk = vk.data() + (ky * kw + kx) * Cin * Cout;
            for (std::size_t ci = 0; ci < Cin; ++ci) {
              const double xv = in[ci];
              const double * krow = kk + ci * Cout;
              for (std::size_t co = 0; co < Cout; ++co) o[co] += xv * krow[co];
            }
          }
        }
      }
    }
  }
  return make_result(
    Shape{B, Ho, Wo, Cout}, std::move(val), {x, kernel},
    [=](std::span<const double> g) {
      double * gx = grad_sink(x);
      double * gk = grad_sink(kernel);
      const auto vx = x.values();
      const auto vk = kernel.values();
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t oy = 0; oy < Ho; ++oy) {
          for (std::size_t ox = 0; ox < Wo; ++ox) {
            const double * go = g.data() + ((b * Ho + oy) * Wo + ox) * Cout;
            for (std::size_t ky = 0; ky < kh; ++ky) {
              const long iy = static_cast<long>(oy * stride + ky) - pad;
              if (iy < 0 || iy >= static_cast<long>(H)) continue;
              for (std::size_t kx = 0; kx < kw; ++kx) {
                const long ix = static_cast<long>(ox * stride + kx) - pad;
                if (ix < 0 || ix >= static_cast<long>(W)) continue;
                const std::size_t in_off =
                  ((b * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)) * Cin;
                const std::size_t k_off = (ky * kw + kx) * Cin * Cout;
                for (std::size_t ci = 0; ci < Cin; ++ci) {
                  const double * krow = vk.data() + k_off + ci * Cout;
                  if (gx) {
                    double s = 0.0;
                    for (std::size_t co = 0; co < Cout; ++co) s += krow[co] * go[co];
                    gx[in_off + ci] += s;
                  }
                  if (gk) {
                    const double xv = vx[in_off + ci];
                    double * gkrow = gk + k_off + ci * Cout;
                    for (std::size_t co = 0; co < Cout; ++co) gkrow[co] += xv * go[co];
                  }
                }
              }
            }
          }
        }
      }
    });
}

Tensor upsample_nearest(const Tensor & x, std::size_t factor)
{
  const Shape & sx = x.shape();
  if (sx.size() != 4) throw DimensionError("upsample_nearest expects [B,H,W,C], got " + shape_str(sx));
  if (factor == 0) throw ContractError("upsample factor must be positive");
  const std::size_t B = sx[0], H = sx[1], W = sx[2], C = sx[3];
  const std::size_t Ho = H * factor, Wo = W * factor;
  std::vector<double> val(B * Ho * Wo * C);
  const auto vx = x.values();
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t y = 0; y < Ho; ++y) {
      for (std::size_t xx = 0; xx < Wo; ++xx) {
        const double * src = vx.data() + ((b * H + y / factor) * W + xx / factor) * C;
        std::copy_n(src, C, val.begin() + static_cast<long>(((b * Ho + y) * Wo + xx) * C));
      }
    }
  }
  return make_result(Shape{B, Ho, Wo, C}, std::move(val), {x}, [=](std::span<const double> g) {
    double * gx = grad_sink(x);
    if (!gx) return;
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t y = 0; y < Ho; ++y) {
        for (std::size_t xx = 0; xx < Wo; ++xx) {
          double * dst = gx + ((b * H + y / factor) * W + xx / factor) * C;
          const double * src = g.data() + ((b * Ho + y) * Wo + xx) * C;
          for (std::size_t c = 0; c < C; ++c) dst[c] += src[c];
        }
      }
    }
  });
}

// --------------------------------------------------------------------- misc

std::uint64_t Rng::next_u64()
{
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal()
{
  // Box-Muller; one draw per call keeps the stream position simple.
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::uint64_t Rng::below(std::uint64_t bound)
{
  if (bound == 0) return 0;
  return next_u64() % bound;
}

Tensor dropout(const Tensor & x, double rate, Rng & rng, bool training)
{
  if (!training || rate <= 0.0) return x;
  if (rate >= 1.0) throw ContractError("dropout rate must be below 1");
  const double keep = 1.0 - rate;
  std::vector<double> mask(x.numel());
  for (double & m : mask) m = rng.uniform() < keep ? 1.0 / keep : 0.0;
  return mul(x, Tensor(x.shape(), std::move(mask)));
}

Tensor uniform_tensor(Shape shape, Rng & rng, double lo, double hi)
{
  std::vector<double> v(shape_numel(shape));
  for (double & e : v) e = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

Tensor normal_tensor(Shape shape, Rng & rng, double stddev)
{
  std::vector<double> v(shape_numel(shape));
  for (double & e : v) e = stddev * rng.normal();
  return Tensor(std::move(shape), std::move(v));
}

namespace
{

double relative_error(std::span<const double> analytic, const std::vector<double> & numeric)
{
  double worst = 0.0;
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    const double err = std::abs(analytic[i] - numeric[i]) / (std::abs(numeric[i]) + 1e-8);
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace

double finite_difference_check(const std::function<Tensor(const Tensor &)> & f, const Tensor & x,
                               double h)
{
  Tensor leaf(x.shape(), std::vector<double>(x.values().begin(), x.values().end()), true);
  return finite_difference_check([&]() { return f(leaf); }, leaf, h);
}

double finite_difference_check(const std::function<Tensor()> & f, Tensor & leaf, double h)
{
  if (!(h > 0.0)) throw ContractError("finite difference step must be positive");
  const bool was_required = leaf.requires_grad();
  leaf.set_requires_grad(true);
  leaf.zero_grad();
  const Tensor y = f();
  if (y.numel() != 1) throw ContractError("finite_difference_check needs a scalar function");
  std::vector<double> analytic(leaf.numel(), 0.0);
  if (y.requires_grad()) {
    backward(y);
    if (leaf.has_grad()) {
      const auto g = leaf.grad();
      analytic.assign(g.begin(), g.end());
    }
  }
  leaf.zero_grad();
  std::vector<double> numeric(leaf.numel());
  {
    NoGradGuard guard;
    auto data = leaf.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      data[i] = orig + h;
      const double fp = f().item();
      data[i] = orig - h;
      const double fm = f().item();
      data[i] = orig;
      numeric[i] = (fp - fm) / (2.0 * h);
    }
  }
  leaf.set_requires_grad(was_required);
  return relative_error(analytic, numeric);
}

// --------------------------------------------------------------- parameters

Tensor ParameterStore::add(const std::string & name, Tensor init)
{
  if (find(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  init.set_requires_grad(true);
  params_.push_back({name, init});
  return init;
}

const Parameter * ParameterStore::find(const std::string & name) const
{
  for (const auto & p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::size_t ParameterStore::scalar_count() const
{
  std::size_t n = 0;
  for (const auto & p : params_) n += p.tensor.numel();
  return n;
}

void ParameterStore::zero_grad()
{
  for (auto & p : params_) p.tensor.zero_grad();
}

Scope Scope::child(const std::string & name) const
{
  return Scope(*store_, *rng_, prefix_.empty() ? name : prefix_ + "." + name);
}

Tensor Scope::param(const std::string & name, Shape shape, Init init) const
{
  Tensor t;
  switch (init) {
    case Init::zeros:
      t = Tensor(shape, 0.0);
      break;
    case Init::ones:
      t = Tensor(shape, 1.0);
      break;
    case Init::glorot: {
      // Fan-in is every axis but the last; fan-out is the last axis.
      const std::size_t fan_out = shape.empty() ? 1 : shape.back();
      const std::size_t fan_in = std::max<std::size_t>(1, shape_numel(shape) / std::max<std::size_t>(1, fan_out));
      const std::size_t recept = shape.size() == 4 ? shape[0] * shape[1] : 1;
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out * recept));
      t = uniform_tensor(shape, *rng_, -limit, limit);
      break;
    }
    case Init::normal_small:
      t = normal_tensor(shape, *rng_, 0.02);
      break;
  }
  return store_->add(prefix_.empty() ? name : prefix_ + "." + name, t);
}

void adam_step(std::vector<Parameter> & params, AdamState & state, const AdamOptions & options)
{
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), {});
    state.v.assign(params.size(), {});
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(options.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(options.beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor & t = params[p].tensor;
    auto & m = state.m[p];
    auto & v = state.v[p];
    if (m.size() != t.numel()) {
      m.assign(t.numel(), 0.0);
      v.assign(t.numel(), 0.0);
    }
    auto data = t.data();
    const bool has = t.has_grad();
    const auto g = has ? t.grad() : std::span<const double>{};
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double gi = has ? g[i] : 0.0;
      m[i] = options.beta1 * m[i] + (1.0 - options.beta1) * gi;
      v[i] = options.beta2 * v[i] + (1.0 - options.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      data[i] -= options.lr * mhat / (std::sqrt(vhat) + options.eps);
    }
  }
}

}  // namespace occflow
