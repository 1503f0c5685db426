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

#include "occflow/scene.hpp"

#include <cmath>
#include <sstream>

#include "occflow/errors.hpp"

namespace occflow
{

std::string to_string(AgentType type)
{
  switch (type) {
    case AgentType::vehicle:
      return "vehicle";
    case AgentType::pedestrian:
      return "pedestrian";
    case AgentType::cyclist:
      return "cyclist";
  }
  return "vehicle";
}

AgentType agent_type_from_string(const std::string & name)
{
  if (name == "vehicle") return AgentType::vehicle;
  if (name == "pedestrian") return AgentType::pedestrian;
  if (name == "cyclist") return AgentType::cyclist;
  throw CorruptionError("unknown agent type '" + name + "'");
}

std::array<double, 2> default_extent(AgentType type)
{
  switch (type) {
    case AgentType::vehicle:
      return {4.5, 2.0};
    case AgentType::cyclist:
      return {1.8, 0.6};
    case AgentType::pedestrian:
      return {0.6, 0.6};
  }
  return {4.5, 2.0};
}

std::string to_string(RoadCategory category)
{
  switch (category) {
    case RoadCategory::lane:
      return "lane";
    case RoadCategory::road_edge:
      return "road-edge";
    case RoadCategory::crosswalk:
      return "crosswalk";
  }
  return "lane";
}

std::string to_string(TrafficLight light)
{
  switch (light) {
    case TrafficLight::none:
      return "none";
    case TrafficLight::red:
      return "red";
    case TrafficLight::yellow:
      return "yellow";
    case TrafficLight::green:
      return "green";
  }
  return "none";
}

RoadCategory road_category_from_string(const std::string & name)
{
  if (name == "lane") return RoadCategory::lane;
  if (name == "road-edge") return RoadCategory::road_edge;
  if (name == "crosswalk") return RoadCategory::crosswalk;
  throw CorruptionError("unknown road category '" + name + "'");
}

TrafficLight traffic_light_from_string(const std::string & name)
{
  if (name == "none") return TrafficLight::none;
  if (name == "red") return TrafficLight::red;
  if (name == "yellow") return TrafficLight::yellow;
  if (name == "green") return TrafficLight::green;
  throw CorruptionError("unknown traffic light state '" + name + "'");
}

GridSpec GridSpec::paper() { return {256, 256, 80.0 / 256.0}; }
GridSpec GridSpec::desk() { return {64, 64, 80.0 / 64.0}; }

std::array<double, 2> GridSpec::to_cell(double x, double y) const
{
  return {x / meters_per_cell + 0.5 * width, y / meters_per_cell + 0.5 * height};
}

std::array<double, 2> GridSpec::to_meters(double col, double row) const
{
  return {(col - 0.5 * width) * meters_per_cell, (row - 0.5 * height) * meters_per_cell};
}

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::paper()
{
  ModelConfig c;
  c.grid = GridSpec::paper();
  c.timing = {10, 8, 0.1, 1.0};
  c.channels = 96;
  c.max_agents = 64;
  c.window = 8;
  c.head_dim = 0;
  c.decoder_dims = {192, 96, 48, 2};
  return c;
}

ModelConfig ModelConfig::micro()
{
  ModelConfig c;
  c.grid = {16, 16, 1.25};
  c.timing = {2, 2, 0.1, 1.0};
  c.channels = 4;
  c.max_agents = 3;
  c.window = 4;
  c.head_dim = 2;
  c.stage_heads = {3, 6, 12};
  c.trajectory_heads = 4;
  c.interaction_heads = 6;
  c.cross_heads = 2;
  c.mlp_ratio = 2;
  c.decoder_dims = {8, 4, 4, 2};
  c.dropout = 0.0;
  return c;
}

double ModelConfig::resolved_offset_scale() const
{
  return offset_scale > 0.0 ? offset_scale : 0.5 * feature_height();
}

namespace
{

void check_heads(int dim, int heads, int head_dim, const std::string & where)
{
  if (heads <= 0) throw ConfigError(where + ": head count must be positive");
  if (head_dim == 0 && dim % heads != 0) {
    throw ConfigError(where + ": dimension " + std::to_string(dim) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
}

}  // namespace

void ModelConfig::check() const
{
  if (grid.height <= 0 || grid.width <= 0 || grid.height % 16 != 0 || grid.width % 16 != 0) {
    throw ConfigError("grid extents must be positive multiples of 16, got " +
                      std::to_string(grid.height) + "x" + std::to_string(grid.width));
  }
  if (!(grid.meters_per_cell > 0.0)) throw ConfigError("meters_per_cell must be positive");
  if (timing.history_steps < 1 || timing.future_steps < 1) {
    throw ConfigError("history and future step counts must be at least 1");
  }
  if (channels <= 0 || max_agents <= 0 || window <= 0 || mlp_ratio <= 0) {
    throw ConfigError("channels, max_agents, window and mlp_ratio must be positive");
  }
  if (head_dim < 0) throw ConfigError("head_dim must be >= 0");
  for (int s = 0; s < 3; ++s) {
    const int extent_h = grid.height / (4 << s);
    const int extent_w = grid.width / (4 << s);
    const int wh = std::min(window, extent_h);
    const int ww = std::min(window, extent_w);
    if (extent_h % wh != 0 || extent_w % ww != 0) {
      throw ConfigError("stage " + std::to_string(s + 1) + " extent " + std::to_string(extent_h) +
                        "x" + std::to_string(extent_w) + " not divisible by window " +
                        std::to_string(window));
    }
    check_heads(channels << s, stage_heads[static_cast<std::size_t>(s)], head_dim,
                "stage " + std::to_string(s + 1));
  }
  check_heads(4 * channels, trajectory_heads, head_dim, "trajectory encoder");
  check_heads(4 * channels, interaction_heads, head_dim, "interaction transformer");
  check_heads(4 * channels, cross_heads, head_dim, "cross attention");
  check_heads(4 * channels, timing.future_steps, head_dim, "flow-guided attention");
  for (int d : decoder_dims) {
    if (d <= 0) throw ConfigError("decoder dims must be positive");
  }
  if (decoder_dims[3] != 2) throw ConfigError("last decoder dim must be 2 (per-head outputs)");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  if (focal_gamma < 0.0 || focal_alpha <= 0.0 || focal_alpha >= 1.0) {
    throw ConfigError("focal loss needs gamma >= 0 and alpha in (0, 1)");
  }
  if (accumulate < 1) throw ConfigError("accumulate must be >= 1");
  if (!(grad_clip >= 0.0)) throw ConfigError("grad_clip must be >= 0");
}

std::uint64_t ModelConfig::digest() const
{
  std::ostringstream os;
  os.precision(17);
  os << grid.height << ' ' << grid.width << ' ' << timing.history_steps << ' '
     << timing.future_steps << ' ' << channels << ' ' << max_agents << ' ' << window << ' '
     << stage_heads[0] << ' ' << stage_heads[1] << ' ' << stage_heads[2] << ' ' << head_dim << ' '
     << mlp_ratio << ' ' << trajectory_heads << ' ' << interaction_heads << ' ' << cross_heads
     << ' ' << resolved_offset_scale() << ' ' << decoder_dims[0] << ' ' << decoder_dims[1] << ' '
     << decoder_dims[2] << ' ' << decoder_dims[3] << ' ' << use_flow_guidance;
  const std::string s = os.str();
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double wrap_angle(double theta)
{
  double t = std::remainder(theta, 2.0 * M_PI);
  if (t <= -M_PI) t += 2.0 * M_PI;
  return t;
}

namespace
{

std::string agent_label(const Trajectory & a) { return "agent " + std::to_string(a.agent_id); }

void check_state(const Trajectory & a, const AgentState & s, const std::string & where,
                 std::vector<Violation> & out)
{
  const double vals[] = {s.x, s.y, s.vx, s.vy, s.theta};
  for (double v : vals) {
    if (!std::isfinite(v)) {
      out.push_back({agent_label(a) + ": non-finite value in " + where});
      return;
    }
  }
  if (s.valid) {
    if (!(s.theta > -M_PI && s.theta <= M_PI)) {
      out.push_back({agent_label(a) + ": heading outside (-pi, pi] in " + where});
    }
  } else if (s.x != 0.0 || s.y != 0.0 || s.vx != 0.0 || s.vy != 0.0 || s.theta != 0.0) {
    out.push_back({agent_label(a) + ": invalid state with non-zero fields in " + where});
  }
}

}  // namespace

std::vector<Violation> validate(const Scenario & scenario)
{
  std::vector<Violation> out;
  const auto & g = scenario.grid;
  if (g.height <= 0 || g.width <= 0 || !(g.meters_per_cell > 0.0)) {
    out.push_back({"grid: extents and meters_per_cell must be positive"});
  }
  const auto & t = scenario.timing;
  if (t.history_steps < 1 || t.future_steps < 1 || !(t.history_dt > 0.0) || !(t.future_dt > 0.0)) {
    out.push_back({"timing: step counts and intervals must be positive"});
  }
  std::vector<int> ids;
  for (const auto & a : scenario.agents) {
    for (int id : ids) {
      if (id == a.agent_id) out.push_back({agent_label(a) + ": duplicate agent id"});
    }
    ids.push_back(a.agent_id);
    if (!(a.length > 0.0) || !(a.width > 0.0)) {
      out.push_back({agent_label(a) + ": length and width must be positive"});
    }
    if (a.states.size() != static_cast<std::size_t>(t.history_steps + 1)) {
      out.push_back({agent_label(a) + ": expected " + std::to_string(t.history_steps + 1) +
                     " history states, found " + std::to_string(a.states.size())});
    }
    if (!a.future_states.empty() &&
        a.future_states.size() != static_cast<std::size_t>(t.future_steps)) {
      out.push_back({agent_label(a) + ": expected " + std::to_string(t.future_steps) +
                     " future states, found " + std::to_string(a.future_states.size())});
    }
    for (std::size_t i = 0; i < a.states.size(); ++i) {
      check_state(a, a.states[i], "history state " + std::to_string(i), out);
    }
    for (std::size_t i = 0; i < a.future_states.size(); ++i) {
      check_state(a, a.future_states[i], "future state " + std::to_string(i), out);
    }
  }
  for (std::size_t i = 0; i < scenario.road.size(); ++i) {
    const auto & p = scenario.road[i];
    for (const auto & pt : p.points) {
      if (!std::isfinite(pt[0]) || !std::isfinite(pt[1])) {
        out.push_back({"road polyline " + std::to_string(i) + ": non-finite point"});
        break;
      }
    }
  }
  return out;
}

std::vector<Violation> validate(const PredictionSet & gt, const GridSpec & grid)
{
  std::vector<Violation> out;
  const std::size_t steps = gt.observed.size();
  if (gt.occluded.size() != steps || gt.flow.size() != steps) {
    out.push_back({"ground truth: stream lengths differ"});
    return out;
  }
  const double bound_x = 0.5 * grid.width;
  const double bound_y = 0.5 * grid.height;
  for (std::size_t k = 0; k < steps; ++k) {
    const std::string step = "step " + std::to_string(k + 1);
    const auto & ob = gt.observed[k];
    const auto & oc = gt.occluded[k];
    const auto & f = gt.flow[k];
    if (ob.height != grid.height || ob.width != grid.width || oc.height != grid.height ||
        oc.width != grid.width || f.height != grid.height || f.width != grid.width) {
      out.push_back({step + ": raster extents differ from the grid"});
      continue;
    }
    for (std::size_t i = 0; i < ob.data.size(); ++i) {
      if ((ob.data[i] != 0.0 && ob.data[i] != 1.0) || (oc.data[i] != 0.0 && oc.data[i] != 1.0)) {
        out.push_back({step + ": ground-truth occupancy is not binary"});
        break;
      }
    }
    bool bound_reported = false;
    bool support_reported = false;
    for (std::size_t c = 0; c < ob.data.size(); ++c) {
      const double dx = f.data[2 * c];
      const double dy = f.data[2 * c + 1];
      if (!bound_reported && (std::abs(dx) > bound_x || std::abs(dy) > bound_y)) {
        out.push_back({step + ": flow (" + std::to_string(dx) + ", " + std::to_string(dy) +
                       ") exceeds the +-W/2, +-H/2 bound"});
        bound_reported = true;
      }
      const bool occupied = ob.data[c] > 0.0 || oc.data[c] > 0.0;
      if (!support_reported && !occupied && (dx != 0.0 || dy != 0.0)) {
        out.push_back({step + ": non-zero flow on an unoccupied cell"});
        support_reported = true;
      }
    }
  }
  return out;
}

}  // namespace occflow
