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

#include "occflow/scenario_gen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

#include "occflow/errors.hpp"
#include "occflow/tensor.hpp"

namespace occflow
{

std::string to_string(Motion motion)
{
  switch (motion) {
    case Motion::static_: return "static";
    case Motion::linear: return "linear";
    case Motion::turning: return "turning";
    case Motion::mixed: return "mixed";
  }
  return "mixed";
}

std::string to_string(RoadLayout layout)
{
  switch (layout) {
    case RoadLayout::straight: return "straight";
    case RoadLayout::cross: return "cross";
    case RoadLayout::t_junction: return "t-junction";
  }
  return "cross";
}

Motion motion_from_string(const std::string & name)
{
  for (Motion m : {Motion::static_, Motion::linear, Motion::turning, Motion::mixed}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown motion '" + name + "'");
}

RoadLayout road_layout_from_string(const std::string & name)
{
  for (RoadLayout r : {RoadLayout::straight, RoadLayout::cross, RoadLayout::t_junction}) {
    if (to_string(r) == name) return r;
  }
  throw ConfigError("unknown road layout '" + name + "'");
}

namespace
{

constexpr double kPi = std::numbers::pi;

struct Kinematics
{
  double x0, y0, theta0, speed, omega;

  AgentState at(double t) const
  {
    AgentState s;
    const double th = theta0 + omega * t;
    if (omega == 0.0) {
      s.x = x0 + speed * std::cos(theta0) * t;
      s.y = y0 + speed * std::sin(theta0) * t;
    } else {
      s.x = x0 + speed / omega * (std::sin(th) - std::sin(theta0));
      s.y = y0 - speed / omega * (std::cos(th) - std::cos(theta0));
    }
    s.vx = speed * std::cos(th);
    s.vy = speed * std::sin(th);
    s.theta = wrap_angle(th);
    s.valid = true;
    return s;
  }
};

// Axis-aligned unit vectors without the rounding of cos/sin at multiples of pi/2.
const std::array<std::array<double, 3>, 4> kAxisHeadings{{
  {0.0, 1.0, 0.0},
  {kPi / 2, 0.0, 1.0},
  {kPi, -1.0, 0.0},
  {-kPi / 2, 0.0, -1.0},
}};

void add_road(std::vector<Polyline> & road, const GenSpec & spec, Rng & rng)
{
  const double half = 0.5 * spec.grid.meters_per_cell * spec.grid.width;
  const double lane_off = 2.0;
  const double edge_off = 6.0;
  auto lights = [&rng]() {
    const int pick = static_cast<int>(rng.below(4));
    return static_cast<TrafficLight>(pick);
  };
  // Horizontal road, optionally only on one side of the origin.
  auto horizontal = [&](double x0, double x1) {
    road.push_back({RoadCategory::lane, lights(), {{x0, -lane_off}, {x1, -lane_off}}});
    road.push_back({RoadCategory::lane, lights(), {{x1, lane_off}, {x0, lane_off}}});
    road.push_back({RoadCategory::road_edge, TrafficLight::none, {{x0, -edge_off}, {x1, -edge_off}}});
    road.push_back({RoadCategory::road_edge, TrafficLight::none, {{x0, edge_off}, {x1, edge_off}}});
  };
  auto vertical = [&](double y0, double y1) {
    road.push_back({RoadCategory::lane, lights(), {{lane_off, y0}, {lane_off, y1}}});
    road.push_back({RoadCategory::lane, lights(), {{-lane_off, y1}, {-lane_off, y0}}});
    road.push_back({RoadCategory::road_edge, TrafficLight::none, {{-edge_off, y0}, {-edge_off, y1}}});
    road.push_back({RoadCategory::road_edge, TrafficLight::none, {{edge_off, y0}, {edge_off, y1}}});
  };
  horizontal(-half, half);
  if (spec.road_layout == RoadLayout::cross) vertical(-half, half);
  if (spec.road_layout == RoadLayout::t_junction) vertical(edge_off, half);
  const double cw = 10.0 + rng.uniform(0.0, 5.0);
  road.push_back({RoadCategory::crosswalk, TrafficLight::none, {{cw, -edge_off}, {cw, edge_off}}});
}

AgentType sample_type(Rng & rng, bool vehicles_only)
{
  if (vehicles_only) return AgentType::vehicle;
  const double u = rng.uniform();
  if (u < 0.6) return AgentType::vehicle;
  if (u < 0.8) return AgentType::cyclist;
  return AgentType::pedestrian;
}

double type_speed_cap(AgentType type)
{
  switch (type) {
    case AgentType::pedestrian: return 2.0;
    case AgentType::cyclist: return 8.0;
    case AgentType::vehicle: return 15.0;
  }
  return 15.0;
}

}  // namespace

Scenario generate(std::uint64_t seed, const GenSpec & spec)
{
  if (spec.n_agents < 0 || spec.n_occluded < 0 || spec.n_occluded > spec.n_agents) {
    throw ConfigError("generator: need 0 <= n_occluded <= n_agents");
  }
  if (spec.n_agents > spec.max_agents) {
    throw ConfigError("generator: n_agents " + std::to_string(spec.n_agents) + " exceeds capacity " +
                      std::to_string(spec.max_agents));
  }
  if (!(spec.max_speed >= 0.0) || !(spec.max_turn_rate >= 0.0)) {
    throw ConfigError("generator: speed and turn-rate bounds must be non-negative");
  }
  if (spec.grid.height <= 0 || spec.grid.width <= 0 || !(spec.grid.meters_per_cell > 0.0) ||
      spec.timing.history_steps < 1 || spec.timing.future_steps < 1) {
    throw ConfigError("generator: invalid grid or timing");
  }

  Rng rng(seed ^ 0x6f63636666c6f77ULL);
  Scenario sc;
  sc.grid = spec.grid;
  sc.timing = spec.timing;
  sc.seed = seed;
  add_road(sc.road, spec, rng);

  const double mpc = spec.grid.meters_per_cell;
  const double inner = 0.25 * mpc * std::min(spec.grid.width, spec.grid.height);
  const int T_h = spec.timing.history_steps;
  const int T_f = spec.timing.future_steps;
  std::vector<double> times;
  for (int j = 0; j <= T_h; ++j) times.push_back((j - T_h) * spec.timing.history_dt);
  for (int k = 1; k <= T_f; ++k) times.push_back(k * spec.timing.future_dt);

  struct Placed
  {
    Kinematics kin;
    double radius;
  };
  std::vector<Placed> placed;
  constexpr int kAttempts = 400;
  for (int i = 0; i < spec.n_agents; ++i) {
    const AgentType type = sample_type(rng, spec.integer_motion);
    const auto extent = default_extent(type);
    const double radius = 0.5 * std::hypot(extent[0], extent[1]);
    bool ok = false;
    Kinematics kin{};
    for (int attempt = 0; attempt < kAttempts && !ok; ++attempt) {
      Motion m = spec.motion;
      if (m == Motion::mixed) m = static_cast<Motion>(rng.below(3));
      const double cap = std::min(spec.max_speed, type_speed_cap(type));
      kin.x0 = rng.uniform(-inner, inner);
      kin.y0 = rng.uniform(-inner, inner);
      kin.theta0 = rng.uniform(-kPi, kPi);
      kin.speed = m == Motion::static_ ? 0.0 : rng.uniform(0.0, cap);
      kin.omega = m == Motion::turning ? rng.uniform(-spec.max_turn_rate, spec.max_turn_rate) : 0.0;
      if (spec.integer_motion) {
        kin.x0 = std::round(kin.x0 / mpc * 4.0) / 4.0 * mpc;
        kin.y0 = std::round(kin.y0 / mpc * 4.0) / 4.0 * mpc;
        kin.theta0 = kAxisHeadings[rng.below(4)][0];
        kin.omega = 0.0;
        const int max_cells = static_cast<int>(std::floor(cap * spec.timing.future_dt / mpc));
        const int cells = m == Motion::static_ ? 0 : static_cast<int>(rng.below(static_cast<std::uint64_t>(max_cells) + 1));
        kin.speed = cells * mpc / spec.timing.future_dt;
      }
      if (spec.velocity) {
        const auto & v = *spec.velocity;
        kin.speed = std::hypot(v[0], v[1]);
        kin.theta0 = kin.speed > 0.0 ? std::atan2(v[1], v[0]) : 0.0;
        kin.omega = 0.0;
      }
      ok = true;
      for (const Placed & other : placed) {
        for (double t : times) {
          const AgentState a = kin.at(t);
          const AgentState b = other.kin.at(t);
          if (std::hypot(a.x - b.x, a.y - b.y) < radius + other.radius + 0.5) {
            ok = false;
            break;
          }
        }
        if (!ok) break;
      }
    }
    if (!ok) {
      throw ConfigError("generator: could not place agent " + std::to_string(i + 1) +
                        " without overlap; reduce n_agents");
    }
    placed.push_back({kin, radius});

    Trajectory tr;
    tr.agent_id = i + 1;
    tr.type = type;
    tr.length = extent[0];
    tr.width = extent[1];
    tr.observed = i < spec.n_agents - spec.n_occluded;
    for (std::size_t j = 0; j < times.size(); ++j) {
      AgentState s = kin.at(times[j]);
      if (spec.integer_motion && !spec.velocity) {
        // Exact axis-aligned kinematics.
        for (const auto & h : kAxisHeadings) {
          if (h[0] != kin.theta0) continue;
          s.x = kin.x0 + kin.speed * h[1] * times[j];
          s.y = kin.y0 + kin.speed * h[2] * times[j];
          s.vx = kin.speed * h[1];
          s.vy = kin.speed * h[2];
          s.theta = wrap_angle(kin.theta0);
        }
      }
      (static_cast<int>(j) <= T_h ? tr.states : tr.future_states).push_back(s);
    }
    sc.agents.push_back(std::move(tr));
  }
  return sc;
}

Sample make_sample(const Scenario & scenario, int max_agents)
{
  Sample s;
  s.scenario = scenario;
  s.inputs = build_inputs(scenario, max_agents);
  s.targets = build_targets(scenario);
  s.current = s.inputs.occupancy.back();
  return s;
}

std::vector<Sample> make_dataset(const std::vector<std::uint64_t> & seeds, const GenSpec & spec,
                                 int threads)
{
  std::vector<Sample> out(seeds.size());
  const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1,
                                                      std::max<std::size_t>(seeds.size(), 1));
  auto work = [&](std::size_t w) {
    for (std::size_t i = w; i < seeds.size(); i += workers) {
      out[i] = make_sample(generate(seeds[i], spec), spec.max_agents);
    }
  };
  if (workers == 1) {
    work(0);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        work(w);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto & t : pool) t.join();
  for (const auto & e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace occflow
