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

#ifndef OCCFLOW__DECODER_HPP_
#define OCCFLOW__DECODER_HPP_

#include <vector>

#include "occflow/layers.hpp"
#include "occflow/scene.hpp"

namespace occflow
{

/// Raw decoder outputs for all future steps.
struct DecoderOutput
{
  Tensor occupancy_logits;  // [T_f, H, W, 2]: observed, occluded
  Tensor flow;              // [T_f, H, W, 2]: dx, dy
};

/// Feature-pyramid decoder shared across future steps.
class FpnDecoder
{
public:
  FpnDecoder() = default;
  FpnDecoder(const Scope & scope, const ModelConfig & config);

  /// `fused` is [T_f, H/16, W/16, 4C]; h2 and h1 are the encoder maps at
  /// H/8 and H/4.
  DecoderOutput operator()(const Tensor & fused, const Tensor & h2, const Tensor & h1) const;

  /// 3x3 convolutions of the four upsampling levels.
  std::vector<Conv2d> levels;
  Conv2d lateral2;  // h_v^2 -> level-1 width
  Conv2d lateral1;  // h_v^1 -> level-2 width
  Conv2d occupancy_head;
  Conv2d flow_head;
};

/// Sigmoid occupancy and identity flow as per-step grids.
PredictionSet to_predictions(const DecoderOutput & out);

}  // namespace occflow

#endif  // OCCFLOW__DECODER_HPP_
