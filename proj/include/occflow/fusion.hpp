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

#ifndef OCCFLOW__FUSION_HPP_
#define OCCFLOW__FUSION_HPP_

#include <vector>

#include "occflow/attention.hpp"
#include "occflow/layers.hpp"
#include "occflow/scene.hpp"

namespace occflow
{

/// Flow-guided multi-head self-attention over the H/16 feature map.
///
/// A shared FFN predicts one offset field per future step; step k reads its
/// keys and values from the feature map sampled at mesh + offset_k, and owns
/// one attention head with its own output projection.
class FlowGuidedAttention
{
public:
  FlowGuidedAttention() = default;
  FlowGuidedAttention(const Scope & scope, const ModelConfig & config);

  /// Offsets [Hf, Wf, 2] per step, each component within [-rho, rho].
  std::vector<Tensor> make_offsets(const Tensor & h3, const ForwardContext & ctx) const;
  /// Per-step attention output h3 + head_k W_k^O before the FFN.
  std::vector<Tensor> attend(const Tensor & h3, const std::vector<Tensor> & offsets,
                             const ForwardContext & ctx) const;
  /// h_k^O for every step given explicit offsets.
  std::vector<Tensor> forward(const Tensor & h3, const std::vector<Tensor> & offsets,
                              const ForwardContext & ctx) const;

  std::size_t steps() const { return steps_; }
  std::size_t head_dim() const { return head_dim_; }
  double offset_scale() const { return rho_; }
  bool uses_flow_guidance() const { return guided_; }

  Mlp offset_ffn;
  LayerNorm norm;
  Linear query;
  std::vector<Linear> keys;
  std::vector<Linear> values;
  std::vector<Linear> outputs;
  RelPosBias bias;
  LayerNorm ffn_norm;
  Mlp ffn;

private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t steps_ = 0;
  std::size_t head_dim_ = 0;
  double rho_ = 1.0;
  bool guided_ = true;
};

/// Per-step cross-attention from grid cells to agent tokens.
class TrajectoryCrossAttention
{
public:
  TrajectoryCrossAttention() = default;
  TrajectoryCrossAttention(const Scope & scope, const ModelConfig & config);

  /// Query construction h_k^O + W_k^f h_k^f, [Hf, Wf, 4C].
  Tensor queries(const Tensor & occupancy_features, const Tensor & offsets) const;
  /// `agents` is [n, 4C]; returns [Hf, Wf, 4C]. With no valid agent the
  /// queries are returned unchanged.
  Tensor operator()(const Tensor & occupancy_features, const Tensor & offsets,
                    const Tensor & agents, const std::vector<bool> & valid,
                    const ForwardContext & ctx) const;

  Linear offset_proj;
  LayerNorm norm;
  MultiHeadAttention attention;
  bool flow_term = true;
};

}  // namespace occflow

#endif  // OCCFLOW__FUSION_HPP_
