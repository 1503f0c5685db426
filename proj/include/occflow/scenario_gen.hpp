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

#ifndef OCCFLOW__SCENARIO_GEN_HPP_
#define OCCFLOW__SCENARIO_GEN_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "occflow/rasterizer.hpp"
#include "occflow/scene.hpp"

namespace occflow
{

enum class Motion
{
  static_,
  linear,
  turning,
  mixed,
};

enum class RoadLayout
{
  straight,
  cross,
  t_junction,
};

std::string to_string(Motion motion);
std::string to_string(RoadLayout layout);
Motion motion_from_string(const std::string & name);
RoadLayout road_layout_from_string(const std::string & name);

struct GenSpec
{
  int n_agents = 4;
  int n_occluded = 1;
  Motion motion = Motion::mixed;
  RoadLayout road_layout = RoadLayout::cross;
  GridSpec grid = GridSpec::desk();
  Timing timing;
  /// Upper bound on sampled speeds (m/s); per-type caps also apply.
  double max_speed = 15.0;
  double max_turn_rate = 0.3;
  /// Largest agent count accepted (the model's agent capacity).
  int max_agents = 8;
  /// Vehicles only, axis-aligned headings, start positions on a quarter-cell
  /// lattice and a whole number of cells travelled per future step. Keeps
  /// rasterised motion exact.
  bool integer_motion = false;
  /// Forces every agent's velocity (m/s) and heading when set.
  std::optional<std::array<double, 2>> velocity;
};

/// Deterministic scenario for `seed`. Throws ConfigError when the spec
/// cannot be satisfied.
Scenario generate(std::uint64_t seed, const GenSpec & spec);

/// One training/evaluation example.
struct Sample
{
  Scenario scenario;
  SceneInputs inputs;
  PredictionSet targets;
  /// Observed occupancy at t = 0.
  OccupancyGrid current;
};

Sample make_sample(const Scenario & scenario, int max_agents);

/// Samples for every seed, in seed order. Generation fans out over at most
/// `threads` workers; the result does not depend on the worker count.
std::vector<Sample> make_dataset(const std::vector<std::uint64_t> & seeds, const GenSpec & spec,
                                 int threads = 1);

}  // namespace occflow

#endif  // OCCFLOW__SCENARIO_GEN_HPP_
