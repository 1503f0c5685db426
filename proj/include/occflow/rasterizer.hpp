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

#ifndef OCCFLOW__RASTERIZER_HPP_
#define OCCFLOW__RASTERIZER_HPP_

#include <array>
#include <vector>

#include "occflow/scene.hpp"

namespace occflow
{

enum class AgentSelection
{
  observed,
  occluded,
  both,
};

/// Road palette (RGB in [0, 1]).
struct RoadPalette
{
  static constexpr std::array<double, 3> lane{0.5, 0.5, 0.5};
  static constexpr std::array<double, 3> road_edge{1.0, 1.0, 1.0};
  static constexpr std::array<double, 3> crosswalk{1.0, 1.0, 0.0};
  static constexpr std::array<double, 3> red{1.0, 0.0, 0.0};
  static constexpr std::array<double, 3> yellow{1.0, 0.6, 0.0};
  static constexpr std::array<double, 3> green{0.0, 1.0, 0.0};
};

/// Agent state at `step`: history/current for step <= 0, future for step > 0.
/// Returns null when the agent has no state at that step.
const AgentState * state_at(const Trajectory & agent, const Timing & timing, int step);

/// Binary grid: a cell is 1 iff its centre lies strictly inside the oriented
/// box of a selected agent with a valid state at `step` (range [-T_h, T_f]).
OccupancyGrid rasterize_occupancy(const Scenario & scenario, int step, AgentSelection include);

/// Backward flow for cells occupied at `from_step`: each cell centre is moved
/// through the owning agent's rigid pose change to `to_step`, and the flow is
/// (position at to_step) - (position at from_step), in cells, clamped to the
/// +-W/2, +-H/2 range. The smallest agent_id wins on shared cells.
FlowField compute_flow_between(const Scenario & scenario, int from_step, int to_step,
                               AgentSelection include);

/// Per-step ground-truth flow, step -> step - 1 (requires step >= -T_h + 1).
FlowField compute_backward_flow(const Scenario & scenario, int step);

/// Road network as 1-cell Bresenham strokes with traffic-light endpoint overlays.
RoadRaster rasterize_roadmap(const Scenario & scenario);

/// Cells visited by a Bresenham line between two integer cells, inclusive.
std::vector<std::array<int, 2>> bresenham(int c0, int r0, int c1, int r1);

/// Vectorised history of one agent slot.
struct AgentVector
{
  int agent_id = -1;
  AgentType type = AgentType::vehicle;
  /// (x, y, vx, vy, theta) per history step, oldest first.
  std::vector<std::array<double, 5>> states;
  std::vector<bool> step_valid;
};

/// Model inputs of one scene.
struct SceneInputs
{
  /// Occupancy of observed agents for steps -T_h..0, oldest first.
  std::vector<OccupancyGrid> occupancy;
  RoadRaster road;
  /// Backward flow of observed agents between step 0 and step -T_h.
  FlowField history_flow;
  /// Observed agents valid at step 0, nearest to the ego first, at most `max_agents`.
  std::vector<AgentVector> agents;
};

SceneInputs build_inputs(const Scenario & scenario, int max_agents);

/// Future ground truth: observed and occluded occupancy plus flow of all agents.
PredictionSet build_targets(const Scenario & scenario);

}  // namespace occflow

#endif  // OCCFLOW__RASTERIZER_HPP_
