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

#ifndef OCCFLOW__ENCODERS_HPP_
#define OCCFLOW__ENCODERS_HPP_

#include <array>
#include <vector>

#include "occflow/attention.hpp"
#include "occflow/layers.hpp"
#include "occflow/rasterizer.hpp"
#include "occflow/scene.hpp"

namespace occflow
{

/// Per-modality embeddings at H/4 x W/4 x C.
struct Embeddings
{
  Tensor occupancy;
  Tensor road;
  Tensor flow;
};

/// Separate 4x4 stride-4 convolutions for occupancy history, road map and history flow.
class PatchEmbed
{
public:
  PatchEmbed() = default;
  PatchEmbed(const Scope & scope, std::size_t history_channels, std::size_t channels);

  /// Inputs are [H,W,T_h+1], [H,W,3] and [H,W,2].
  Embeddings operator()(const Tensor & occupancy, const Tensor & road, const Tensor & flow) const;

  Conv2d occupancy;
  Conv2d road;
  Conv2d flow;

private:
  std::size_t history_channels_ = 0;
};

/// Pre-norm transformer layer with (shifted) window attention.
class SwinLayer
{
public:
  SwinLayer() = default;
  SwinLayer(const Scope & scope, std::size_t height, std::size_t width, std::size_t dim,
            const ModelConfig & config, std::size_t heads, std::size_t shift);

  Tensor operator()(const Tensor & x, const ForwardContext & ctx) const;

  LayerNorm norm1;
  WindowAttention attn;
  LayerNorm norm2;
  Mlp mlp;
};

/// A W-SA layer followed by an SW-SA layer.
class SwinBlock
{
public:
  SwinBlock() = default;
  SwinBlock(const Scope & scope, std::size_t height, std::size_t width, std::size_t dim,
            const ModelConfig & config, std::size_t heads);

  Tensor operator()(const Tensor & x, const ForwardContext & ctx) const;

  SwinLayer regular;
  SwinLayer shifted;
};

/// 2x2 neighbourhood concat -> LayerNorm -> Linear(4C -> 2C).
class PatchMerging
{
public:
  PatchMerging() = default;
  PatchMerging(const Scope & scope, std::size_t dim, double eps);

  Tensor operator()(const Tensor & x) const;

  LayerNorm norm;
  Linear reduction;
};

struct VisualFeatures
{
  Tensor h1;  // [H/4, W/4, C]
  Tensor h2;  // [H/8, W/8, 2C]
  Tensor h3;  // [H/16, W/16, 4C]
};

class VisualEncoder
{
public:
  VisualEncoder() = default;
  VisualEncoder(const Scope & scope, const ModelConfig & config);

  VisualFeatures operator()(const Embeddings & e, const ForwardContext & ctx) const;

  std::array<SwinBlock, 3> stages;
  SwinBlock flow_block;
  std::array<PatchMerging, 2> merges;
};

/// Encodes each agent history into a 4C vector.
class TrajectoryEncoder
{
public:
  TrajectoryEncoder() = default;
  TrajectoryEncoder(const Scope & scope, const ModelConfig & config);

  /// Returns [n, 4C] for the given agents (n may be zero).
  Tensor operator()(const std::vector<AgentVector> & agents, const ForwardContext & ctx) const;

  /// Normalised per-step features [n, T, 5] and key mask [n, 1, 1, T].
  std::pair<Tensor, Tensor> features(const std::vector<AgentVector> & agents) const;

  Linear input;
  MultiHeadAttention attention;
  Linear type_embed;
  Linear head;

private:
  std::size_t steps_ = 0;
  std::size_t dim_ = 0;
  double position_scale_ = 1.0;
  Tensor positional_;
};

/// Sinusoidal encoding [steps, dim].
Tensor sinusoidal_encoding(std::size_t steps, std::size_t dim);

/// Masked self-attention across agents with a residual connection.
class InteractionTransformer
{
public:
  InteractionTransformer() = default;
  InteractionTransformer(const Scope & scope, const ModelConfig & config);

  /// `embeddings` is [n, 4C]; `valid` has n entries. Invalid rows come out zero.
  Tensor operator()(const Tensor & embeddings, const std::vector<bool> & valid,
                    const ForwardContext & ctx) const;

  LayerNorm norm;
  MultiHeadAttention attention;
};

/// Additive key mask [1, 1, n] (0 for valid, kMaskValue otherwise).
Tensor key_mask(const std::vector<bool> & valid);

}  // namespace occflow

#endif  // OCCFLOW__ENCODERS_HPP_
