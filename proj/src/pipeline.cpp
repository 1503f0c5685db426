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

#include "occflow/pipeline.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <thread>

#include "occflow/errors.hpp"
#include "occflow/io.hpp"

namespace occflow
{

double learning_rate(const ModelConfig & config, int epoch)
{
  const int every = std::max(config.lr_decay_every, 1);
  return config.lr * std::pow(config.lr_decay, epoch / every);
}

LossTerms sample_loss(const OccFlowModel & model, const Sample & sample, const ForwardContext & ctx)
{
  const ModelOutput out = model.forward(sample.inputs, ctx);
  const TargetTensors targets = make_target_tensors(sample.targets, sample.current);
  return total_loss(out.occupancy_logits, out.flow, targets, LossWeights::from(model.config()));
}

TrainResult train(OccFlowModel & model, const std::vector<Sample> & dataset, const TrainOptions & options)
{
  if (dataset.empty()) throw ConfigError("train: dataset is empty");
  const ModelConfig & cfg = model.config();
  const std::size_t accumulate = static_cast<std::size_t>(std::max(cfg.accumulate, 1));
  const long steps_per_epoch =
    static_cast<long>((dataset.size() + accumulate - 1) / accumulate);
  const int epochs = options.max_steps > 0
                       ? static_cast<int>((options.max_steps + steps_per_epoch - 1) / steps_per_epoch)
                       : cfg.epochs;
  if (!options.checkpoint_dir.empty()) std::filesystem::create_directories(options.checkpoint_dir);

  TrainResult result;
  result.epochs = epochs;
  Rng order_rng(cfg.seed ^ 0x5eed0fda7aULL);
  Rng drop_rng(cfg.seed ^ 0xd20b07ULL);
  auto & params = model.parameters().all();
  long step = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    AdamOptions adam;
    adam.lr = learning_rate(cfg, epoch);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);

    for (std::size_t start = 0; start < order.size(); start += accumulate) {
      if (options.max_steps > 0 && step >= options.max_steps) break;
      model.parameters().zero_grad();
      double loss_sum = 0.0;
      const std::size_t end = std::min(order.size(), start + accumulate);
      for (std::size_t i = start; i < end; ++i) {
        ForwardContext ctx{true, cfg.dropout, &drop_rng};
        const LossTerms terms = sample_loss(model, dataset[order[i]], ctx);
        const double value = terms.total.item();
        if (!std::isfinite(value)) {
          throw TrainingError("non-finite loss at step " + std::to_string(step), step);
        }
        loss_sum += value;
        backward(terms.total);
      }
      double norm2 = 0.0;
      for (const auto & p : params) {
        if (!p.tensor.has_grad()) continue;
        for (double g : p.tensor.grad()) norm2 += g * g;
      }
      const double norm = std::sqrt(norm2);
      result.grad_norms.push_back(norm);
      if (cfg.grad_clip > 0.0 && norm > cfg.grad_clip) {
        const double factor = cfg.grad_clip / norm;
        for (auto & p : params) {
          if (!p.tensor.has_grad()) continue;
          double * g = grad_sink(p.tensor);
          for (std::size_t i = 0; i < p.tensor.numel(); ++i) g[i] *= factor;
        }
      }
      adam_step(params, result.optimizer, adam);
      const double mean_loss = loss_sum / static_cast<double>(end - start);
      result.losses.push_back(mean_loss);
      if (options.on_step) options.on_step(step, epoch, mean_loss);
      ++step;
    }
    if (!options.checkpoint_dir.empty()) {
      const std::string path =
        (std::filesystem::path(options.checkpoint_dir) / ("epoch_" + std::to_string(epoch + 1) + ".ofk"))
          .string();
      save_weights(model, path);
      result.checkpoints.push_back(path);
    }
  }
  return result;
}

int worker_threads()
{
  const char * env = std::getenv("OFK_THREADS");
  if (!env || !*env) return 1;
  char * end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw ConfigError(std::string("OFK_THREADS must be a positive integer, got '") + env + "'");
  return static_cast<int>(std::min<long>(v, 256));
}

std::vector<PredictionSet> predict_all(const OccFlowModel & model, const std::vector<Sample> & dataset,
                                       int threads)
{
  std::vector<PredictionSet> out(dataset.size());
  const std::size_t workers =
    std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), dataset.size()));
  auto work = [&](std::size_t w) {
    for (std::size_t i = w; i < dataset.size(); i += workers) out[i] = model.predict(dataset[i].inputs);
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

MetricsReport evaluate(const std::vector<PredictionSet> & preds, const std::vector<Sample> & dataset)
{
  if (preds.size() != dataset.size()) throw DimensionError("evaluate: prediction and sample counts differ");
  MetricAccumulator acc;
  for (std::size_t i = 0; i < dataset.size(); ++i) acc.add_scene(preds[i], dataset[i].targets, dataset[i].current);
  return acc.report();
}

MetricsReport evaluate(const OccFlowModel & model, const std::vector<Sample> & dataset, int threads)
{
  return evaluate(predict_all(model, dataset, threads), dataset);
}

}  // namespace occflow
