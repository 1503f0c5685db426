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

#ifndef OCCFLOW__PIPELINE_HPP_
#define OCCFLOW__PIPELINE_HPP_

#include <functional>
#include <string>
#include <vector>

#include "occflow/losses.hpp"
#include "occflow/metrics.hpp"
#include "occflow/model.hpp"
#include "occflow/scenario_gen.hpp"

namespace occflow
{

/// Learning rate during `epoch` (0-based): lr * decay^(epoch / every).
double learning_rate(const ModelConfig & config, int epoch);

/// Loss terms of one sample under the model's current parameters.
LossTerms sample_loss(const OccFlowModel & model, const Sample & sample, const ForwardContext & ctx);

struct TrainOptions
{
  /// Stop after this many optimizer steps; non-positive runs config.epochs epochs.
  long max_steps = 0;
  /// Directory for per-epoch checkpoints; empty disables them.
  std::string checkpoint_dir;
  /// Called after every optimizer step with (step, epoch, loss).
  std::function<void(long, int, double)> on_step;
};

struct TrainResult
{
  /// Mean total loss of the samples in each optimizer step.
  std::vector<double> losses;
  /// Global gradient norm of each optimizer step before clipping.
  std::vector<double> grad_norms;
  int epochs = 0;
  std::vector<std::string> checkpoints;
  AdamState optimizer;
};

/// Adam over `dataset` in a seeded per-epoch order. One optimizer step per
/// `config.accumulate` samples. Throws TrainingError on a non-finite loss.
TrainResult train(OccFlowModel & model, const std::vector<Sample> & dataset,
                  const TrainOptions & options = {});

/// Predictions for every sample, computed by up to `threads` workers.
std::vector<PredictionSet> predict_all(const OccFlowModel & model, const std::vector<Sample> & dataset,
                                       int threads = 1);

/// Seven-metric report over the dataset. Aggregation order is the sample order.
MetricsReport evaluate(const OccFlowModel & model, const std::vector<Sample> & dataset, int threads = 1);
MetricsReport evaluate(const std::vector<PredictionSet> & preds, const std::vector<Sample> & dataset);

/// Worker cap from OFK_THREADS (default 1).
int worker_threads();

}  // namespace occflow

#endif  // OCCFLOW__PIPELINE_HPP_
