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

#include <gtest/gtest.h>

#include <cmath>

#include "occflow/rasterizer.hpp"
#include "occflow/scenario_gen.hpp"
#include "occflow/warp.hpp"
#include "test_util.hpp"

namespace occflow
{
namespace
{

using testing::empty_scene;
using testing::make_agent;
using testing::static_agent;

int count_occupied(const OccupancyGrid & g)
{
  int n = 0;
  for (double v : g.data) n += v > 0.5 ? 1 : 0;
  return n;
}

// Cell centre strictly inside an oriented box, evaluated in metres.
bool inside_box(const GridSpec & g, int r, int c, double x, double y, double theta, double length, double width)
{
  const auto m = g.to_meters(c + 0.5, r + 0.5);
  const double dx = m[0] - x, dy = m[1] - y;
  const double u = std::cos(theta) * dx + std::sin(theta) * dy;
  const double v = -std::sin(theta) * dx + std::cos(theta) * dy;
  return std::abs(u) < 0.5 * length && std::abs(v) < 0.5 * width;
}

TEST(RasterizeOccupancy, EmptyScenario)
{
  const Scenario s = empty_scene();
  for (int step = -5; step <= 4; ++step) {
    EXPECT_EQ(count_occupied(rasterize_occupancy(s, step, AgentSelection::both)), 0);
  }
}

TEST(RasterizeOccupancy, CenteredFourByTwoCellVehicle)
{
  Scenario s = empty_scene();
  const double mpc = s.grid.meters_per_cell;
  s.agents.push_back(make_agent(1, s.timing, 4 * mpc, 2 * mpc, [](int) { return std::array<double, 3>{0, 0, 0}; }));
  const OccupancyGrid g = rasterize_occupancy(s, 0, AgentSelection::observed);
  EXPECT_EQ(count_occupied(g), 8);
  for (int r = 0; r < g.height; ++r)
    for (int c = 0; c < g.width; ++c)
      EXPECT_EQ(g.at(r, c) > 0.5, inside_box(s.grid, r, c, 0, 0, 0, 4 * mpc, 2 * mpc)) << r << "," << c;
}

TEST(RasterizeOccupancy, MatchesPointInBoxOracleForRotatedBoxes)
{
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    Scenario s = empty_scene();
    const double x = rng.uniform(-30, 30), y = rng.uniform(-30, 30), th = rng.uniform(-3.1, 3.1);
    const double len = rng.uniform(1, 8), wid = rng.uniform(0.5, 3);
    s.agents.push_back(make_agent(1, s.timing, len, wid, [&](int) { return std::array<double, 3>{x, y, th}; }));
    const OccupancyGrid g = rasterize_occupancy(s, 2, AgentSelection::both);
    int mismatches = 0;
    for (int r = 0; r < g.height; ++r)
      for (int c = 0; c < g.width; ++c) mismatches += (g.at(r, c) > 0.5) != inside_box(s.grid, r, c, x, y, th, len, wid);
    EXPECT_EQ(mismatches, 0);
  }
}

TEST(RasterizeOccupancy, AgentOutsideWindowIsClipped)
{
  Scenario s = empty_scene();
  s.agents.push_back(static_agent(1, s.timing, 60.0, -55.0));
  EXPECT_EQ(count_occupied(rasterize_occupancy(s, 0, AgentSelection::both)), 0);
}

TEST(RasterizeOccupancy, SelectionHonoursObservedFlag)
{
  Scenario s = empty_scene();
  s.agents.push_back(static_agent(1, s.timing, -10.0, 0.0, 0.0, true));
  s.agents.push_back(static_agent(2, s.timing, 10.0, 0.0, 0.0, false));
  const int ob = count_occupied(rasterize_occupancy(s, 1, AgentSelection::observed));
  const int oc = count_occupied(rasterize_occupancy(s, 1, AgentSelection::occluded));
  const OccupancyGrid both = rasterize_occupancy(s, 1, AgentSelection::both);
  EXPECT_GT(ob, 0);
  EXPECT_EQ(ob, oc);
  EXPECT_EQ(count_occupied(both), ob + oc);
  EXPECT_EQ(rasterize_occupancy(s, 1, AgentSelection::occluded).kind, OccupancyKind::occluded);
}

TEST(RasterizeOccupancy, StepOutOfRange)
{
  const Scenario s = empty_scene();
  EXPECT_THROW(rasterize_occupancy(s, -6, AgentSelection::both), ContractError);
  EXPECT_THROW(rasterize_occupancy(s, 5, AgentSelection::both), ContractError);
}

TEST(BackwardFlow, StaticAgentHasZeroFlow)
{
  Scenario s = empty_scene();
  s.agents.push_back(static_agent(1, s.timing, 3.0, -7.0, 0.4));
  for (int k = 1; k <= 4; ++k) {
    const FlowField f = compute_backward_flow(s, k);
    for (double v : f.data) EXPECT_EQ(v, 0.0);
  }
}

TEST(BackwardFlow, TranslationTwoCellsPerStep)
{
  Scenario s = empty_scene();
  const double mpc = s.grid.meters_per_cell;
  s.agents.push_back(make_agent(1, s.timing, 4.5, 2.0, [&](int step) {
    return std::array<double, 3>{step > 0 ? 2.0 * mpc * step : 0.0, 0.0, 0.0};
  }));
  for (int k = 1; k <= 4; ++k) {
    const FlowField f = compute_backward_flow(s, k);
    const OccupancyGrid o = rasterize_occupancy(s, k, AgentSelection::both);
    ASSERT_GT(count_occupied(o), 0);
    for (int r = 0; r < o.height; ++r)
      for (int c = 0; c < o.width; ++c) {
        const double ex = o.at(r, c) > 0.5 ? -2.0 : 0.0;
        EXPECT_NEAR(f.at(r, c, 0), ex, 1e-12);
        EXPECT_EQ(f.at(r, c, 1), 0.0);
      }
  }
}

// Per-cell pose composition: express the cell centre in the agent frame at
// step k, then place that body point with the pose at step k - 1.
TEST(BackwardFlow, QuarterTurnMatchesPoseComposition)
{
  Scenario s = empty_scene();
  const double cx = 2.3, cy = -1.1;
  s.agents.push_back(make_agent(1, s.timing, 6.0, 3.0, [&](int step) {
    return std::array<double, 3>{cx, cy, step >= 1 ? M_PI / 2 : 0.0};
  }));
  const FlowField f = compute_backward_flow(s, 1);
  const OccupancyGrid o = rasterize_occupancy(s, 1, AgentSelection::both);
  const double mpc = s.grid.meters_per_cell;
  int cells = 0;
  for (int r = 0; r < o.height; ++r)
    for (int c = 0; c < o.width; ++c) {
      if (o.at(r, c) < 0.5) {
        EXPECT_EQ(f.at(r, c, 0), 0.0);
        continue;
      }
      ++cells;
      const auto m = s.grid.to_meters(c + 0.5, r + 0.5);
      // rotation by -pi/2 maps the body point back to the heading-0 pose.
      const double lx = m[0] - cx, ly = m[1] - cy;
      const double bx = ly, by = -lx;
      const double px = cx + bx, py = cy + by;
      EXPECT_NEAR(f.at(r, c, 0), (px - m[0]) / mpc, 1e-9);
      EXPECT_NEAR(f.at(r, c, 1), (py - m[1]) / mpc, 1e-9);
    }
  EXPECT_GT(cells, 8);
}

TEST(BackwardFlow, ClampedToHalfExtent)
{
  Scenario s = empty_scene();
  s.agents.push_back(make_agent(1, s.timing, 4.5, 2.0, [&](int step) {
    return std::array<double, 3>{step == 1 ? 0.0 : -200.0, 0.0, 0.0};
  }));
  const FlowField f = compute_backward_flow(s, 1);
  double lo = 0.0;
  for (int i = 0; i < f.height * f.width; ++i) lo = std::min(lo, f.data[2 * i]);
  EXPECT_EQ(lo, -32.0);
}

TEST(BackwardFlow, SmallerIdWinsOnContestedCells)
{
  Scenario s = empty_scene();
  const double mpc = s.grid.meters_per_cell;
  s.agents.push_back(make_agent(5, s.timing, 4.5, 2.0, [&](int step) { return std::array<double, 3>{step * mpc, 0.0, 0.0}; }));
  s.agents.push_back(make_agent(2, s.timing, 4.5, 2.0, [&](int step) { return std::array<double, 3>{0.0, step * mpc, 0.0}; }));
  const FlowField f = compute_backward_flow(s, 0);
  // agent 2 is at the origin at step 0 and moved +1 cell in y per step.
  EXPECT_NEAR(f.at(32, 32, 0), 0.0, 1e-12);
  EXPECT_NEAR(f.at(32, 32, 1), -1.0, 1e-12);
}

TEST(BackwardFlow, RejectsFirstHistoryStep)
{
  const Scenario s = empty_scene();
  EXPECT_THROW(compute_backward_flow(s, -5), ContractError);
  EXPECT_NO_THROW(compute_backward_flow(s, -4));
}

Scenario scene_with_lane(const std::vector<std::array<double, 2>> & pts, TrafficLight light = TrafficLight::none)
{
  Scenario s = empty_scene();
  s.road.push_back({RoadCategory::lane, light, pts});
  return s;
}

TEST(Roadmap, EmptyRoadIsZero)
{
  const RoadRaster r = rasterize_roadmap(empty_scene());
  for (double v : r.data) EXPECT_EQ(v, 0.0);
}

TEST(Roadmap, HorizontalLaneFillsOneRow)
{
  const int row = 20;
  const double y = (row - 32 + 0.5) * 1.25;
  const RoadRaster r = rasterize_roadmap(scene_with_lane({{{-39.9, y}}, {{39.9, y}}}));
  int colored = 0;
  for (int rr = 0; rr < r.height; ++rr)
    for (int c = 0; c < r.width; ++c) {
      const bool lit = r.at(rr, c, 0) != 0.0 || r.at(rr, c, 1) != 0.0 || r.at(rr, c, 2) != 0.0;
      if (rr == row) {
        EXPECT_EQ(r.at(rr, c, 0), 0.5);
        EXPECT_EQ(r.at(rr, c, 1), 0.5);
        EXPECT_EQ(r.at(rr, c, 2), 0.5);
      }
      colored += lit;
    }
  EXPECT_EQ(colored, 64);
}

TEST(Roadmap, GreenLightAtEndpoint)
{
  const RoadRaster r = rasterize_roadmap(scene_with_lane({{{-20.0, 0.1}}, {{5.0, 0.1}}}, TrafficLight::green));
  const auto cell = GridSpec::desk().to_cell(5.0, 0.1);
  const int c = static_cast<int>(std::floor(cell[0])), rr = static_cast<int>(std::floor(cell[1]));
  EXPECT_EQ(r.at(rr, c, 0), 0.0);
  EXPECT_EQ(r.at(rr, c, 1), 1.0);
  EXPECT_EQ(r.at(rr, c, 2), 0.0);
  EXPECT_EQ(r.at(rr, c - 3, 0), 0.5);
}

TEST(Roadmap, LaterStrokeOverwrites)
{
  Scenario s = scene_with_lane({{{-10.0, 0.1}}, {{10.0, 0.1}}});
  s.road.push_back({RoadCategory::crosswalk, TrafficLight::none, {{{0.1, -10.0}}, {{0.1, 10.0}}}});
  const RoadRaster r = rasterize_roadmap(s);
  EXPECT_EQ(r.at(32, 32, 0), 1.0);
  EXPECT_EQ(r.at(32, 32, 1), 1.0);
  EXPECT_EQ(r.at(32, 32, 2), 0.0);
}

TEST(Roadmap, BresenhamCoversDiagonal)
{
  const auto cells = bresenham(0, 0, 5, 5);
  ASSERT_EQ(cells.size(), 6u);
  for (int i = 0; i < 6; ++i) EXPECT_EQ(cells[static_cast<std::size_t>(i)], (std::array<int, 2>{i, i}));
  const auto steep = bresenham(2, 1, 3, 7);
  EXPECT_EQ(steep.size(), 7u);
  EXPECT_EQ(steep.front(), (std::array<int, 2>{2, 1}));
  EXPECT_EQ(steep.back(), (std::array<int, 2>{3, 7}));
}

TEST(BuildInputs, AgentCapKeepsNearest)
{
  Scenario s = empty_scene();
  const int n_max = 8;
  for (int i = 0; i < n_max + 3; ++i) {
    // place agents with distinct distances, farthest first in the list
    const double d = 36.0 - 3.0 * i;
    s.agents.push_back(static_agent(i, s.timing, d * std::cos(i), d * std::sin(i)));
  }
  const SceneInputs in = build_inputs(s, n_max);
  ASSERT_EQ(in.agents.size(), static_cast<std::size_t>(n_max));
  double last = -1.0;
  for (const auto & a : in.agents) {
    const double d = std::hypot(a.states.back()[0], a.states.back()[1]);
    EXPECT_GT(d, last);
    last = d;
    EXPECT_GE(a.agent_id, 3);
  }
  EXPECT_EQ(in.agents.front().agent_id, n_max + 2);
  EXPECT_EQ(in.occupancy.size(), 6u);
}

TEST(BuildInputs, OccludedAgentOnlyInOccludedTargets)
{
  Scenario s = empty_scene();
  s.agents.push_back(static_agent(1, s.timing, -12.0, 0.0));
  s.agents.push_back(static_agent(2, s.timing, 12.0, 0.0, 0.0, false));
  const SceneInputs in = build_inputs(s, 8);
  ASSERT_EQ(in.agents.size(), 1u);
  EXPECT_EQ(in.agents[0].agent_id, 1);
  const auto at = s.grid.to_cell(12.0, 0.0);
  const int r = static_cast<int>(at[1]), c = static_cast<int>(at[0]);
  for (const auto & o : in.occupancy) EXPECT_EQ(o.at(r, c), 0.0);
  const PredictionSet gt = build_targets(s);
  for (int k = 0; k < 4; ++k) {
    EXPECT_EQ(gt.occluded[static_cast<std::size_t>(k)].at(r, c), 1.0);
    EXPECT_EQ(gt.observed[static_cast<std::size_t>(k)].at(r, c), 0.0);
  }
}

TEST(BuildInputs, StaticSceneHasZeroHistoryFlow)
{
  Scenario s = empty_scene();
  s.agents.push_back(static_agent(1, s.timing, -12.0, 4.0, 1.0));
  s.agents.push_back(static_agent(2, s.timing, 12.0, -3.0, -0.3));
  const SceneInputs in = build_inputs(s, 8);
  for (double v : in.history_flow.data) EXPECT_EQ(v, 0.0);
}

TEST(BuildInputs, HistoryFlowSpansWholeWindow)
{
  Scenario s = empty_scene();
  const double mpc = s.grid.meters_per_cell;
  s.agents.push_back(make_agent(1, s.timing, 4.5, 2.0, [&](int step) { return std::array<double, 3>{0.5 * mpc * step, 0.0, 0.0}; }));
  const SceneInputs in = build_inputs(s, 8);
  EXPECT_NEAR(in.history_flow.at(32, 32, 0), -2.5, 1e-12);
}

TEST(Invariants, FlowOnlyOnOccupiedCellsAndDeterministic)
{
  GenSpec spec;
  spec.motion = Motion::mixed;
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const Scenario s = generate(seed, spec);
    const PredictionSet gt = build_targets(s);
    const PredictionSet again = build_targets(s);
    for (std::size_t k = 0; k < gt.steps(); ++k) {
      for (std::size_t i = 0; i < gt.observed[k].data.size(); ++i) {
        const bool nonzero = gt.flow[k].data[2 * i] != 0.0 || gt.flow[k].data[2 * i + 1] != 0.0;
        if (nonzero) { EXPECT_TRUE(gt.observed[k].data[i] > 0.5 || gt.occluded[k].data[i] > 0.5); }
      }
      EXPECT_EQ(gt.flow[k], again.flow[k]);
      EXPECT_EQ(gt.observed[k], again.observed[k]);
    }
    EXPECT_EQ(rasterize_roadmap(s), rasterize_roadmap(s));
  }
}

}  // namespace
}  // namespace occflow
