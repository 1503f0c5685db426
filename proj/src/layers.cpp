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

#include "occflow/layers.hpp"

namespace occflow
{

Tensor ForwardContext::drop(const Tensor & x) const
{
  if (!training || dropout <= 0.0) return x;
  if (!rng) throw ContractError("training-mode dropout needs a generator");
  return occflow::dropout(x, dropout, *rng, true);
}

Linear::Linear(const Scope & scope, std::size_t in, std::size_t out, bool with_bias, Init init)
: in_(in), out_(out)
{
  weight = scope.param("weight", {in, out}, init);
  if (with_bias) bias = scope.param("bias", {out}, Init::zeros);
}

Tensor Linear::operator()(const Tensor & x) const
{
  if (x.rank() == 0 || x.dim(-1) != in_) {
    throw DimensionError("linear expects last extent " + std::to_string(in_) + ", got " +
                         shape_str(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape.back() = out_;
  const Tensor flat = reshape(x, {x.numel() / in_, in_});
  Tensor y = matmul(flat, weight);
  if (bias.defined()) y = add(y, bias);
  return reshape(y, std::move(out_shape));
}

LayerNorm::LayerNorm(const Scope & scope, std::size_t dim, double eps) : eps_(eps)
{
  gamma = scope.param("gamma", {dim}, Init::ones);
  beta = scope.param("beta", {dim}, Init::zeros);
}

Tensor LayerNorm::operator()(const Tensor & x) const
{
  return add(mul(layer_norm(x, -1, eps_), gamma), beta);
}

Mlp::Mlp(const Scope & scope, std::size_t in, std::size_t hidden, std::size_t out, Init last_init)
: fc1(scope.child("fc1"), in, hidden), fc2(scope.child("fc2"), hidden, out, true, last_init)
{
}

Tensor Mlp::operator()(const Tensor & x, const ForwardContext & ctx) const
{
  return ctx.drop(fc2(ctx.drop(gelu(fc1(x)))));
}

Conv2d::Conv2d(const Scope & scope, std::size_t k, std::size_t in, std::size_t out,
               std::size_t stride, std::size_t padding)
: stride_(stride), padding_(padding)
{
  kernel = scope.param("kernel", {k, k, in, out}, Init::glorot);
  bias = scope.param("bias", {out}, Init::zeros);
}

Tensor Conv2d::operator()(const Tensor & x) const
{
  return add(conv2d(x, kernel, stride_, padding_), bias);
}

}  // namespace occflow
