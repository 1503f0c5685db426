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

#ifndef OCCFLOW__TENSOR_HPP_
#define OCCFLOW__TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "occflow/errors.hpp"

namespace occflow
{

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape & shape);
std::string shape_str(const Shape & shape);

namespace detail
{
struct Node;
}

/// Dense row-major double-precision array with optional reverse-mode gradient.
///
/// A Tensor is a shared handle: copies refer to the same storage. Operations
/// on tensors that require gradients record a backward closure; calling
/// backward() on a scalar result walks the recorded graph once and releases it.
class Tensor
{
public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double value);

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const Shape & shape() const;
  std::size_t rank() const { return shape().size(); }
  /// Extent along `axis`; negative axes count from the back.
  std::size_t dim(int axis) const;
  std::size_t numel() const;

  std::span<const double> values() const;
  /// Mutable view of the storage; intended for leaves (parameters, inputs).
  std::span<double> data();
  double item() const;

  bool requires_grad() const;
  Tensor & set_requires_grad(bool flag);
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  /// New leaf holding a copy of the values, detached from any graph.
  Tensor detach() const;

  const std::shared_ptr<detail::Node> & node() const noexcept { return node_; }

private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;

  friend Tensor make_result(Shape, std::vector<double>, const std::vector<Tensor> &,
                            std::function<void(std::span<const double>)>);
};

/// Receives the upstream gradient of a result and accumulates into inputs.
using BackwardFn = std::function<void(std::span<const double> grad_out)>;

/// Builds an operation result. `backward` is recorded only when gradient
/// recording is enabled and at least one input requires a gradient.
Tensor make_result(Shape shape, std::vector<double> values, const std::vector<Tensor> & inputs,
                   BackwardFn backward);

/// Gradient accumulator of `t`, allocated on first use; null when `t`
/// does not take part in differentiation.
double * grad_sink(const Tensor & t);

/// Disables graph recording for its lifetime (thread-local).
class NoGradGuard
{
public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard &) = delete;
  NoGradGuard & operator=(const NoGradGuard &) = delete;

private:
  bool previous_;
};

bool grad_enabled();

/// Reverse pass from a scalar. Gradients of every reachable leaf that
/// requires them are summed over all paths; the graph is consumed.
void backward(const Tensor & loss);

// ---------------------------------------------------------------- arithmetic
// Binary ops broadcast numpy-style.

Tensor add(const Tensor & a, const Tensor & b);
Tensor sub(const Tensor & a, const Tensor & b);
Tensor mul(const Tensor & a, const Tensor & b);
Tensor div(const Tensor & a, const Tensor & b);
Tensor scale(const Tensor & x, double factor);
Tensor add_scalar(const Tensor & x, double value);

inline Tensor operator+(const Tensor & a, const Tensor & b) { return add(a, b); }
inline Tensor operator-(const Tensor & a, const Tensor & b) { return sub(a, b); }
inline Tensor operator*(const Tensor & a, const Tensor & b) { return mul(a, b); }
inline Tensor operator*(const Tensor & a, double s) { return scale(a, s); }

Tensor tanh(const Tensor & x);
Tensor sigmoid(const Tensor & x);
/// Exact GELU, x * Phi(x).
Tensor gelu(const Tensor & x);
/// ELU with alpha = 1.
Tensor elu(const Tensor & x);
Tensor exp(const Tensor & x);
Tensor log(const Tensor & x);
Tensor clamp(const Tensor & x, double lo, double hi);

/// [.., m, k] x [.., k, n] with broadcast batch extents.
Tensor matmul(const Tensor & a, const Tensor & b);

// ------------------------------------------------------------------- layout

Tensor reshape(const Tensor & x, Shape shape);
Tensor permute(const Tensor & x, const std::vector<std::size_t> & axes);
Tensor transpose(const Tensor & x, int axis0, int axis1);
/// Rows of `x` (viewed as [N, ...]) gathered by index; backward scatter-adds.
Tensor take_rows(const Tensor & x, std::span<const std::size_t> rows);
Tensor concat(const std::vector<Tensor> & xs, int axis);
Tensor slice(const Tensor & x, int axis, std::size_t start, std::size_t length);

// --------------------------------------------------------------- reductions

Tensor sum(const Tensor & x);
Tensor sum_axis(const Tensor & x, int axis);
Tensor mean(const Tensor & x);
/// Maximum along `axis` (axis removed); the gradient goes to the first argmax.
Tensor max_axis(const Tensor & x, int axis);
Tensor softmax(const Tensor & x, int axis);
/// Normalizes to zero mean and unit (population) variance along `axis`.
Tensor layer_norm(const Tensor & x, int axis, double eps);

// -------------------------------------------------------------------- image

/// Cross-correlation of x[B,H,W,Cin] with kernel[kh,kw,Cin,Cout].
Tensor conv2d(const Tensor & x, const Tensor & kernel, std::size_t stride, std::size_t padding);
/// Nearest-neighbour upsampling of x[B,H,W,C] by an integer factor.
Tensor upsample_nearest(const Tensor & x, std::size_t factor);

// --------------------------------------------------------------------- misc

/// Tiny deterministic generator (SplitMix64) used for initialization and dropout.
class Rng
{
public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}
  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  std::uint64_t below(std::uint64_t bound);

private:
  std::uint64_t state_;
};

/// Inverted dropout; identity unless `training`.
Tensor dropout(const Tensor & x, double rate, Rng & rng, bool training);

Tensor uniform_tensor(Shape shape, Rng & rng, double lo, double hi);
Tensor normal_tensor(Shape shape, Rng & rng, double stddev);

/// Max over coordinates of |analytic - central difference| / (|central difference| + 1e-8)
/// for the scalar function `f` evaluated at `x`.
double finite_difference_check(const std::function<Tensor(const Tensor &)> & f, const Tensor & x,
                               double h = 1e-5);

/// Same check for a leaf captured by `f` (e.g. a model parameter); the leaf's
/// values are perturbed in place and restored.
double finite_difference_check(const std::function<Tensor()> & f, Tensor & leaf, double h = 1e-5);

// --------------------------------------------------------------- parameters

struct Parameter
{
  std::string name;
  Tensor tensor;
};

/// Named parameter registry of a model. Names are unique.
class ParameterStore
{
public:
  Tensor add(const std::string & name, Tensor init);
  const std::vector<Parameter> & all() const noexcept { return params_; }
  std::vector<Parameter> & all() noexcept { return params_; }
  const Parameter * find(const std::string & name) const;
  std::size_t scalar_count() const;
  void zero_grad();

private:
  std::vector<Parameter> params_;
};

enum class Init
{
  zeros,
  ones,
  glorot,
  normal_small,
};

/// Hierarchical naming helper handed to module constructors.
class Scope
{
public:
  Scope(ParameterStore & store, Rng & rng, std::string prefix = {})
  : store_(&store), rng_(&rng), prefix_(std::move(prefix))
  {
  }

  Scope child(const std::string & name) const;
  Tensor param(const std::string & name, Shape shape, Init init) const;
  const std::string & prefix() const noexcept { return prefix_; }

private:
  ParameterStore * store_;
  Rng * rng_;
  std::string prefix_;
};

struct AdamOptions
{
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState
{
  long step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/// One bias-corrected Adam update using each parameter's accumulated gradient.
/// Parameters without a gradient are treated as having a zero gradient.
void adam_step(std::vector<Parameter> & params, AdamState & state, const AdamOptions & options);

}  // namespace occflow

#endif  // OCCFLOW__TENSOR_HPP_
