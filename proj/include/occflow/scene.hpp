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

#ifndef OCCFLOW__SCENE_HPP_
#define OCCFLOW__SCENE_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace occflow
{

enum class AgentType
{
  vehicle,
  pedestrian,
  cyclist,
};

std::string to_string(AgentType type);
AgentType agent_type_from_string(const std::string & name);

/// Default footprint (length, width) in meters per agent type.
std::array<double, 2> default_extent(AgentType type);

/// Kinematic state in the ego-centred frame. Invalid states carry zeros.
struct AgentState
{
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  double theta = 0.0;
  bool valid = false;

  bool operator==(const AgentState &) const = default;
};

struct Trajectory
{
  int agent_id = 0;
  AgentType type = AgentType::vehicle;
  double length = 4.5;
  double width = 2.0;
  /// History followed by the current state (history_steps + 1 entries).
  std::vector<AgentState> states;
  /// Ground-truth future at the future rate; empty for inference-only scenes.
  std::vector<AgentState> future_states;
  /// False when the agent is hidden in the history (occluded).
  bool observed = true;

  bool operator==(const Trajectory &) const = default;
};

enum class RoadCategory
{
  lane,
  road_edge,
  crosswalk,
};

enum class TrafficLight
{
  none,
  red,
  yellow,
  green,
};

std::string to_string(RoadCategory category);
std::string to_string(TrafficLight light);
RoadCategory road_category_from_string(const std::string & name);
TrafficLight traffic_light_from_string(const std::string & name);

struct Polyline
{
  RoadCategory category = RoadCategory::lane;
  TrafficLight light = TrafficLight::none;
  std::vector<std::array<double, 2>> points;

  bool operator==(const Polyline &) const = default;
};

/// Raster placement. The ego sits at the grid centre; column index grows
/// with x and row index grows with y.
struct GridSpec
{
  int height = 64;
  int width = 64;
  double meters_per_cell = 1.25;

  /// 256 x 256 cells over 80 x 80 m.
  static GridSpec paper();
  /// 64 x 64 cells over the same 80 x 80 m area.
  static GridSpec desk();

  /// Continuous cell coordinates (col, row) of a metric point; cell (r, c)
  /// spans [c, c + 1) x [r, r + 1).
  std::array<double, 2> to_cell(double x, double y) const;
  /// Metric coordinates of a continuous cell position.
  std::array<double, 2> to_meters(double col, double row) const;

  bool operator==(const GridSpec &) const = default;
};

struct Timing
{
  int history_steps = 5;
  int future_steps = 4;
  double history_dt = 0.1;
  double future_dt = 1.0;

  bool operator==(const Timing &) const = default;
};

struct Scenario
{
  std::vector<Trajectory> agents;
  std::vector<Polyline> road;
  GridSpec grid;
  Timing timing;
  std::uint64_t seed = 0;

  bool operator==(const Scenario &) const = default;
};

/// Channels-last raster of fixed channel count.
template <int Channels>
struct Raster
{
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Raster() = default;
  Raster(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h * w * Channels), 0.0) {}

  static constexpr int channels = Channels;
  double & at(int row, int col, int ch = 0)
  {
    return data[static_cast<std::size_t>((row * width + col) * Channels + ch)];
  }
  double at(int row, int col, int ch = 0) const
  {
    return data[static_cast<std::size_t>((row * width + col) * Channels + ch)];
  }
  std::size_t cells() const { return static_cast<std::size_t>(height * width); }

  bool operator==(const Raster &) const = default;
};

enum class OccupancyKind
{
  observed,
  occluded,
};

struct OccupancyGrid : Raster<1>
{
  OccupancyKind kind = OccupancyKind::observed;

  OccupancyGrid() = default;
  OccupancyGrid(int h, int w, OccupancyKind k = OccupancyKind::observed) : Raster<1>(h, w), kind(k) {}
};

/// Backward flow (dx, dy) in cells per step: previous position minus current.
using FlowField = Raster<2>;
using RoadRaster = Raster<3>;

/// Occupancy and flow for every future step. Used for predictions and for
/// ground truth alike.
struct PredictionSet
{
  std::vector<OccupancyGrid> observed;
  std::vector<OccupancyGrid> occluded;
  std::vector<FlowField> flow;

  std::size_t steps() const { return observed.size(); }
};

/// Every architectural, loss and optimisation hyperparameter.
struct ModelConfig
{
  GridSpec grid;
  Timing timing;
  int channels = 16;              // C
  int max_agents = 8;             // n
  int window = 4;
  std::array<int, 3> stage_heads{3, 6, 12};
  /// Per-head width; 0 derives it as dim / heads (which must divide).
  int head_dim = 8;
  int mlp_ratio = 4;
  int trajectory_heads = 4;
  int interaction_heads = 6;
  int cross_heads = 4;
  /// Offset scale rho in feature cells; 0 selects (H/16)/2.
  double offset_scale = 0.0;
  std::array<int, 4> decoder_dims{32, 16, 8, 2};
  bool use_flow_guidance = true;
  double dropout = 0.1;
  double layer_norm_eps = 1e-5;

  double focal_gamma = 2.0;
  double focal_alpha = 0.25;
  double weight_obs = 1000.0;
  double weight_occ = 1000.0;
  double weight_warp = 1000.0;
  double weight_focal = 1.0;

  double lr = 1e-4;
  double lr_decay = 0.5;
  int lr_decay_every = 3;
  int epochs = 10;
  int accumulate = 1;
  /// Global gradient-norm clip per optimizer step; 0 disables.
  double grad_clip = 0.0;
  /// Initial occupancy-head bias (logit of the prior occupancy rate).
  double occupancy_prior_logit = -4.6;
  std::uint64_t seed = 0;

  static ModelConfig desk();
  static ModelConfig paper();
  /// 16 x 16 grid used for end-to-end gradient checks.
  static ModelConfig micro();

  int feature_height() const { return grid.height / 16; }
  int feature_width() const { return grid.width / 16; }
  int future_steps() const { return timing.future_steps; }
  double resolved_offset_scale() const;

  /// Throws ConfigError on inconsistent settings.
  void check() const;
  /// Stable digest of the architecture-defining fields.
  std::uint64_t digest() const;
};

struct Violation
{
  std::string message;
};

/// Checks every scene-level invariant; reports instead of throwing.
std::vector<Violation> validate(const Scenario & scenario);
/// Checks ground-truth invariants: binary grids, flow bounds, flow only on occupied cells.
std::vector<Violation> validate(const PredictionSet & ground_truth, const GridSpec & grid);

/// Wraps an angle into (-pi, pi].
double wrap_angle(double theta);

}  // namespace occflow

#endif  // OCCFLOW__SCENE_HPP_
