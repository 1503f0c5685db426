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

#ifndef OCCFLOW__IO_HPP_
#define OCCFLOW__IO_HPP_

#include <cstdint>
#include <string>

#include "occflow/metrics.hpp"
#include "occflow/model.hpp"
#include "occflow/scene.hpp"

namespace occflow
{

inline constexpr char kCheckpointMagic[4] = {'O', 'F', 'K', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr int kScenarioVersion = 1;

std::string scenario_to_json(const Scenario & scenario);
Scenario scenario_from_json(const std::string & text);
void save_scenario(const Scenario & scenario, const std::string & path);
Scenario load_scenario(const std::string & path);

std::string config_to_json(const ModelConfig & config);
/// Keys present in `text` override `base`; unknown keys are rejected.
ModelConfig config_from_json(const std::string & text, const ModelConfig & base);
void save_config(const ModelConfig & config, const std::string & path);
ModelConfig load_config(const std::string & path, const ModelConfig & base);

std::string report_to_json(const MetricsReport & report);
MetricsReport report_from_json(const std::string & text);

std::string predictions_to_json(const PredictionSet & preds);

/// Binary checkpoint: magic, u32 version, u64 config digest, u64 tensor
/// count, then per tensor name, rank, extents and f64 values, all
/// little-endian.
void save_weights(const OccFlowModel & model, const std::string & path);
/// Loads every tensor into a staging area first; the model is only
/// modified when the whole file is valid.
void load_weights(OccFlowModel & model, const std::string & path);

std::string read_file(const std::string & path);
void write_file(const std::string & path, const std::string & contents);

}  // namespace occflow

#endif  // OCCFLOW__IO_HPP_
