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

#ifndef OCCFLOW__LAYERS_HPP_
#define OCCFLOW__LAYERS_HPP_

#include "occflow/tensor.hpp"

namespace occflow
{

/// Per-call execution mode. Dropout is active only when `training`.
struct ForwardContext
{
  bool training = false;
  double dropout = 0.0;
  Rng * rng = nullptr;

  Tensor drop(const Tensor & x) const;
};

/// y = x W + b over the last axis; weight is [in, out].
class Linear
{
public:
  Linear() = default;
  Linear(const Scope & scope, std::size_t in, std::size_t out, bool bias = true,
         Init init = Init::glorot);

  Tensor operator()(const Tensor & x) const;
  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }

  Tensor weight;
  Tensor bias;

private:
  std::size_t in_ = 0;
  std::size_t out_ = 0;
};

class LayerNorm
{
public:
  LayerNorm() = default;
  LayerNorm(const Scope & scope, std::size_t dim, double eps);

  Tensor operator()(const Tensor & x) const;

  Tensor gamma;
  Tensor beta;

private:
  double eps_ = 1e-5;
};

/// Two-layer feed-forward block: Linear -> GELU -> dropout -> Linear -> dropout.
class Mlp
{
public:
  Mlp() = default;
  Mlp(const Scope & scope, std::size_t in, std::size_t hidden, std::size_t out,
      Init last_init = Init::glorot);

  Tensor operator()(const Tensor & x, const ForwardContext & ctx) const;

  Linear fc1;
  Linear fc2;
};

/// NHWC convolution with bias; "same" padding for odd kernels by default.
class Conv2d
{
public:
  Conv2d() = default;
  Conv2d(const Scope & scope, std::size_t kernel, std::size_t in, std::size_t out,
         std::size_t stride = 1, std::size_t padding = 0);

  Tensor operator()(const Tensor & x) const;

  Tensor kernel;
  Tensor bias;

private:
  std::size_t stride_ = 1;
  std::size_t padding_ = 0;
};

}  // namespace occflow

#endif  // OCCFLOW__LAYERS_HPP_
