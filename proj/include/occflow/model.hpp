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

#ifndef OCCFLOW__MODEL_HPP_
#define OCCFLOW__MODEL_HPP_

#include <vector>

#include "occflow/decoder.hpp"
#include "occflow/encoders.hpp"
#include "occflow/fusion.hpp"
#include "occflow/rasterizer.hpp"
#include "occflow/scene.hpp"

namespace occflow
{

/// Scene inputs laid out as tensors.
struct InputTensors
{
  Tensor occupancy;  // [H, W, T_h + 1], oldest first
  Tensor road;       // [H, W, 3]
  Tensor flow;       // [H, W, 2], scaled by kFlowInputScale
};

/// History flow is fed to the network in units of 8 cells.
inline constexpr double kFlowInputScale = 1.0 / 8.0;

InputTensors make_input_tensors(const SceneInputs & inputs);

struct ModelOutput
{
  Tensor occupancy_logits;  // [T_f, H, W, 2]
  Tensor flow;              // [T_f, H, W, 2]
  std::vector<Tensor> offsets;
  VisualFeatures features;
};

class OccFlowModel
{
public:
  /// Parameters are initialised from `config.seed`.
  explicit OccFlowModel(const ModelConfig & config);
  OccFlowModel(const OccFlowModel &) = delete;
  OccFlowModel & operator=(const OccFlowModel &) = delete;

  ModelOutput forward(const SceneInputs & inputs, const ForwardContext & ctx) const;
  ModelOutput forward(const InputTensors & inputs, const std::vector<AgentVector> & agents,
                      const ForwardContext & ctx) const;
  /// Eval-mode forward without gradient recording.
  PredictionSet predict(const SceneInputs & inputs) const;

  const ModelConfig & config() const { return config_; }
  ParameterStore & parameters() { return store_; }
  const ParameterStore & parameters() const { return store_; }

  PatchEmbed embed;
  VisualEncoder visual;
  TrajectoryEncoder trajectory;
  InteractionTransformer interaction;
  FlowGuidedAttention fg_msa;
  std::vector<TrajectoryCrossAttention> cross;
  FpnDecoder decoder;

private:
  ModelConfig config_;
  ParameterStore store_;
};

}  // namespace occflow

#endif  // OCCFLOW__MODEL_HPP_
