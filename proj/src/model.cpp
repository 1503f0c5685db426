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

#include "occflow/model.hpp"

#include "occflow/errors.hpp"

namespace occflow
{

InputTensors make_input_tensors(const SceneInputs & inputs)
{
  const std::size_t T = inputs.occupancy.size();
  if (T == 0) throw DimensionError("scene inputs carry no occupancy history");
  const std::size_t H = static_cast<std::size_t>(inputs.occupancy[0].height);
  const std::size_t W = static_cast<std::size_t>(inputs.occupancy[0].width);
  std::vector<double> occ(H * W * T);
  for (std::size_t t = 0; t < T; ++t) {
    const auto & g = inputs.occupancy[t];
    if (g.data.size() != H * W) throw DimensionError("occupancy history extents differ");
    for (std::size_t i = 0; i < H * W; ++i) occ[i * T + t] = g.data[i];
  }
  std::vector<double> flow(inputs.history_flow.data);
  for (double & v : flow) v *= kFlowInputScale;
  return {Tensor({H, W, T}, std::move(occ)), Tensor({H, W, 3}, inputs.road.data),
          Tensor({H, W, 2}, std::move(flow))};
}

OccFlowModel::OccFlowModel(const ModelConfig & config) : config_(config)
{
  config_.check();
  Rng rng(config_.seed);
  const Scope root(store_, rng);
  const std::size_t C = static_cast<std::size_t>(config_.channels);
  embed = PatchEmbed(root.child("embed"), static_cast<std::size_t>(config_.timing.history_steps) + 1, C);
  visual = VisualEncoder(root.child("visual"), config_);
  trajectory = TrajectoryEncoder(root.child("trajectory"), config_);
  interaction = InteractionTransformer(root.child("interaction"), config_);
  fg_msa = FlowGuidedAttention(root.child("fg_msa"), config_);
  for (int k = 0; k < config_.future_steps(); ++k) {
    cross.emplace_back(root.child("cross" + std::to_string(k + 1)), config_);
  }
  decoder = FpnDecoder(root.child("decoder"), config_);
}

ModelOutput OccFlowModel::forward(const SceneInputs & inputs, const ForwardContext & ctx) const
{
  return forward(make_input_tensors(inputs), inputs.agents, ctx);
}

ModelOutput OccFlowModel::forward(const InputTensors & in, const std::vector<AgentVector> & agents,
                                  const ForwardContext & ctx) const
{
  const auto & g = config_.grid;
  if (in.occupancy.rank() != 3 || in.occupancy.dim(0) != static_cast<std::size_t>(g.height) ||
      in.occupancy.dim(1) != static_cast<std::size_t>(g.width)) {
    throw DimensionError("model.forward: occupancy " + shape_str(in.occupancy.shape()) +
                         " does not match the configured " + std::to_string(g.height) + "x" +
                         std::to_string(g.width) + " grid");
  }
  if (agents.size() > static_cast<std::size_t>(config_.max_agents)) {
    throw DimensionError("model.forward: " + std::to_string(agents.size()) +
                         " agents exceed max_agents " + std::to_string(config_.max_agents));
  }
  ModelOutput out;
  out.features = visual(embed(in.occupancy, in.road, in.flow), ctx);
  const Tensor & h3 = out.features.h3;

  std::vector<bool> valid(agents.size(), true);
  const Tensor tokens = interaction(trajectory(agents, ctx), valid, ctx);

  out.offsets = fg_msa.make_offsets(h3, ctx);
  const std::vector<Tensor> attended = fg_msa.forward(h3, out.offsets, ctx);
  std::vector<Tensor> fused;
  fused.reserve(attended.size());
  for (std::size_t k = 0; k < attended.size(); ++k) {
    const Tensor f = cross[k](attended[k], out.offsets[k], tokens, valid, ctx);
    fused.push_back(reshape(f, {1, f.dim(0), f.dim(1), f.dim(2)}));
  }
  DecoderOutput dec = decoder(concat(fused, 0), out.features.h2, out.features.h1);
  out.occupancy_logits = dec.occupancy_logits;
  out.flow = dec.flow;
  return out;
}

PredictionSet OccFlowModel::predict(const SceneInputs & inputs) const
{
  NoGradGuard guard;
  const ModelOutput out = forward(inputs, ForwardContext{});
  return to_predictions({out.occupancy_logits, out.flow});
}

}  // namespace occflow
