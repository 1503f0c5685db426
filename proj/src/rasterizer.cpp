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

#include "occflow/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "occflow/errors.hpp"

namespace occflow
{

namespace
{

bool selected(const Trajectory & a, AgentSelection include)
{
  switch (include) {
    case AgentSelection::observed:
      return a.observed;
    case AgentSelection::occluded:
      return !a.observed;
    case AgentSelection::both:
      return true;
  }
  return true;
}

// Pose of an agent in continuous cell coordinates.
struct CellPose
{
  double col;
  double row;
  double cos_t;
  double sin_t;
  double half_len;
  double half_wid;
};

CellPose cell_pose(const Trajectory & a, const AgentState & s, const GridSpec & g)
{
  const auto c = g.to_cell(s.x, s.y);
  return {c[0], c[1], std::cos(s.theta), std::sin(s.theta), 0.5 * a.length / g.meters_per_cell,
          0.5 * a.width / g.meters_per_cell};
}

// Calls fn(row, col) for every cell whose centre is strictly inside the box.
template <typename Fn>
void for_each_cell_in_box(const CellPose & p, const GridSpec & g, Fn fn)
{
  const double reach = std::hypot(p.half_len, p.half_wid);
  const int c0 = std::max(0, static_cast<int>(std::floor(p.col - reach)));
  const int c1 = std::min(g.width - 1, static_cast<int>(std::ceil(p.col + reach)));
  const int r0 = std::max(0, static_cast<int>(std::floor(p.row - reach)));
  const int r1 = std::min(g.height - 1, static_cast<int>(std::ceil(p.row + reach)));
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      const double dx = (c + 0.5) - p.col;
      const double dy = (r + 0.5) - p.row;
      const double u = dx * p.cos_t + dy * p.sin_t;
      const double v = -dx * p.sin_t + dy * p.cos_t;
      if (std::abs(u) < p.half_len && std::abs(v) < p.half_wid) fn(r, c);
    }
  }
}

void check_step(const Timing & t, int step)
{
  if (step < -t.history_steps || step > t.future_steps) {
    throw ContractError("step " + std::to_string(step) + " outside [" +
                        std::to_string(-t.history_steps) + ", " + std::to_string(t.future_steps) +
                        "]");
  }
}

std::vector<const Trajectory *> by_id(const Scenario & s)
{
  std::vector<const Trajectory *> out;
  for (const auto & a : s.agents) out.push_back(&a);
  std::stable_sort(out.begin(), out.end(),
                   [](const Trajectory * a, const Trajectory * b) { return a->agent_id < b->agent_id; });
  return out;
}

void paint(RoadRaster & raster, int row, int col, const std::array<double, 3> & color)
{
  if (row < 0 || col < 0 || row >= raster.height || col >= raster.width) return;
  for (int ch = 0; ch < 3; ++ch) raster.at(row, col, ch) = std::clamp(color[static_cast<std::size_t>(ch)], 0.0, 1.0);
}

std::array<int, 2> to_cell_index(const GridSpec & g, const std::array<double, 2> & pt)
{
  const auto c = g.to_cell(pt[0], pt[1]);
  return {static_cast<int>(std::floor(c[0])), static_cast<int>(std::floor(c[1]))};
}

}  // namespace

const AgentState * state_at(const Trajectory & agent, const Timing & timing, int step)
{
  if (step <= 0) {
    const int i = timing.history_steps + step;
    if (i < 0 || i >= static_cast<int>(agent.states.size())) return nullptr;
    return &agent.states[static_cast<std::size_t>(i)];
  }
  const int i = step - 1;
  if (i >= static_cast<int>(agent.future_states.size())) return nullptr;
  return &agent.future_states[static_cast<std::size_t>(i)];
}

OccupancyGrid rasterize_occupancy(const Scenario & scenario, int step, AgentSelection include)
{
  check_step(scenario.timing, step);
  const auto & g = scenario.grid;
  OccupancyGrid grid(g.height, g.width,
                     include == AgentSelection::occluded ? OccupancyKind::occluded : OccupancyKind::observed);
  for (const auto & a : scenario.agents) {
    if (!selected(a, include)) continue;
    const AgentState * s = state_at(a, scenario.timing, step);
    if (!s || !s->valid) continue;
    for_each_cell_in_box(cell_pose(a, *s, g), g, [&](int r, int c) { grid.at(r, c) = 1.0; });
  }
  return grid;
}

FlowField compute_flow_between(const Scenario & scenario, int from_step, int to_step,
                               AgentSelection include)
{
  check_step(scenario.timing, from_step);
  check_step(scenario.timing, to_step);
  const auto & g = scenario.grid;
  FlowField flow(g.height, g.width);
  std::vector<char> owned(flow.cells(), 0);
  const double bx = 0.5 * g.width;
  const double by = 0.5 * g.height;
  for (const Trajectory * a : by_id(scenario)) {
    if (!selected(*a, include)) continue;
    const AgentState * cur = state_at(*a, scenario.timing, from_step);
    const AgentState * prev = state_at(*a, scenario.timing, to_step);
    if (!cur || !cur->valid) continue;
    const CellPose pc = cell_pose(*a, *cur, g);
    const bool has_prev = prev && prev->valid;
    const CellPose pp = has_prev ? cell_pose(*a, *prev, g) : pc;
    for_each_cell_in_box(pc, g, [&](int r, int c) {
      const std::size_t idx = static_cast<std::size_t>(r * g.width + c);
      if (owned[idx]) return;
      owned[idx] = 1;
      if (!has_prev) return;
      // Cell centre in the agent frame at from_step, re-placed at to_step.
      const double dx = (c + 0.5) - pc.col;
      const double dy = (r + 0.5) - pc.row;
      const double u = dx * pc.cos_t + dy * pc.sin_t;
      const double v = -dx * pc.sin_t + dy * pc.cos_t;
      const double px = pp.col + u * pp.cos_t - v * pp.sin_t;
      const double py = pp.row + u * pp.sin_t + v * pp.cos_t;
      flow.at(r, c, 0) = std::clamp(px - (c + 0.5), -bx, bx);
      flow.at(r, c, 1) = std::clamp(py - (r + 0.5), -by, by);
    });
  }
  return flow;
}

FlowField compute_backward_flow(const Scenario & scenario, int step)
{
  if (step < -scenario.timing.history_steps + 1) {
    throw ContractError("backward flow needs step >= " +
                        std::to_string(-scenario.timing.history_steps + 1));
  }
  return compute_flow_between(scenario, step, step - 1, AgentSelection::both);
}

std::vector<std::array<int, 2>> bresenham(int c0, int r0, int c1, int r1)
{
  std::vector<std::array<int, 2>> cells;
  const int dc = std::abs(c1 - c0);
  const int dr = -std::abs(r1 - r0);
  const int sc = c0 < c1 ? 1 : -1;
  const int sr = r0 < r1 ? 1 : -1;
  int err = dc + dr;
  int c = c0;
  int r = r0;
  while (true) {
    cells.push_back({c, r});
    if (c == c1 && r == r1) break;
    const int e2 = 2 * err;
    if (e2 >= dr) {
      err += dr;
      c += sc;
    }
    if (e2 <= dc) {
      err += dc;
      r += sr;
    }
  }
  return cells;
}

RoadRaster rasterize_roadmap(const Scenario & scenario)
{
  const auto & g = scenario.grid;
  RoadRaster raster(g.height, g.width);
  for (const auto & line : scenario.road) {
    const auto & color = line.category == RoadCategory::lane        ? RoadPalette::lane
                         : line.category == RoadCategory::road_edge ? RoadPalette::road_edge
                                                                    : RoadPalette::crosswalk;
    if (line.points.size() == 1) {
      const auto p = to_cell_index(g, line.points[0]);
      paint(raster, p[1], p[0], color);
    }
    for (std::size_t i = 1; i < line.points.size(); ++i) {
      const auto a = to_cell_index(g, line.points[i - 1]);
      const auto b = to_cell_index(g, line.points[i]);
      for (const auto & cell : bresenham(a[0], a[1], b[0], b[1])) paint(raster, cell[1], cell[0], color);
    }
  }
  // Light overlays go last so a later stroke never hides a signal.
  for (const auto & line : scenario.road) {
    if (line.category != RoadCategory::lane || line.light == TrafficLight::none || line.points.empty()) {
      continue;
    }
    const auto & color = line.light == TrafficLight::red      ? RoadPalette::red
                         : line.light == TrafficLight::yellow ? RoadPalette::yellow
                                                              : RoadPalette::green;
    const auto p = to_cell_index(g, line.points.back());
    paint(raster, p[1], p[0], color);
  }
  return raster;
}

SceneInputs build_inputs(const Scenario & scenario, int max_agents)
{
  const Timing & t = scenario.timing;
  SceneInputs in;
  for (int step = -t.history_steps; step <= 0; ++step) {
    in.occupancy.push_back(rasterize_occupancy(scenario, step, AgentSelection::observed));
  }
  in.road = rasterize_roadmap(scenario);
  in.history_flow = compute_flow_between(scenario, 0, -t.history_steps, AgentSelection::observed);

  const double half_x = 0.5 * scenario.grid.width * scenario.grid.meters_per_cell;
  const double half_y = 0.5 * scenario.grid.height * scenario.grid.meters_per_cell;
  std::vector<std::pair<double, const Trajectory *>> candidates;
  for (const auto & a : scenario.agents) {
    if (!a.observed) continue;
    const AgentState * cur = state_at(a, t, 0);
    if (!cur || !cur->valid) continue;
    if (std::abs(cur->x) > half_x || std::abs(cur->y) > half_y) continue;
    candidates.emplace_back(std::hypot(cur->x, cur->y), &a);
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const auto & l, const auto & r) {
    if (l.first != r.first) return l.first < r.first;
    return l.second->agent_id < r.second->agent_id;
  });
  if (candidates.size() > static_cast<std::size_t>(max_agents)) {
    candidates.resize(static_cast<std::size_t>(max_agents));
  }
  for (const auto & [dist, a] : candidates) {
    AgentVector v;
    v.agent_id = a->agent_id;
    v.type = a->type;
    for (const auto & s : a->states) {
      v.states.push_back({s.x, s.y, s.vx, s.vy, s.theta});
      v.step_valid.push_back(s.valid);
    }
    in.agents.push_back(std::move(v));
  }
  return in;
}

PredictionSet build_targets(const Scenario & scenario)
{
  PredictionSet gt;
  for (int k = 1; k <= scenario.timing.future_steps; ++k) {
    gt.observed.push_back(rasterize_occupancy(scenario, k, AgentSelection::observed));
    gt.occluded.push_back(rasterize_occupancy(scenario, k, AgentSelection::occluded));
    gt.flow.push_back(compute_backward_flow(scenario, k));
  }
  return gt;
}

}  // namespace occflow
