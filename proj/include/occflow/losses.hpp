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

#ifndef OCCFLOW__LOSSES_HPP_
#define OCCFLOW__LOSSES_HPP_

#include "occflow/scene.hpp"
#include "occflow/tensor.hpp"

namespace occflow
{

/// Warped-occupancy probabilities are clamped to [eps, 1 - eps] before the log.
inline constexpr double kWarpEps = 1e-7;

/// Summed binary cross-entropy from logits: t softplus(-z) + (1 - t) softplus(z).
Tensor bce_loss(const Tensor & logits, const Tensor & targets);

/// Summed focal loss -alpha_t (1 - p_t)^gamma ln p_t from logits.
Tensor focal_loss(const Tensor & logits, const Tensor & targets, double gamma, double alpha);

/// Summed cross-entropy of probabilities against targets (no clamping).
Tensor bce_prob(const Tensor & probs, const Tensor & targets);

/// Flow-warped loss of one step. `prev_gt`, `gt` and `obs_logits` are
/// [H,W,1]; `flow` is [H,W,2].
Tensor warp_loss(const Tensor & prev_gt, const Tensor & gt, const Tensor & flow,
                 const Tensor & obs_logits);

/// Ground truth of one scene as tensors.
struct TargetTensors
{
  Tensor observed;  // [T_f, H, W, 1]
  Tensor occluded;  // [T_f, H, W, 1]
  Tensor flow;      // [T_f, H, W, 2]
  Tensor current;   // [H, W, 1], observed occupancy at t = 0
};

TargetTensors make_target_tensors(const PredictionSet & gt, const OccupancyGrid & current);

struct LossWeights
{
  double obs = 1000.0;
  double occ = 1000.0;
  double warp = 1000.0;
  double focal = 1.0;
  double gamma = 2.0;
  double alpha = 0.25;

  static LossWeights from(const ModelConfig & config);
};

/// Unweighted per-term sums and the normalised weighted total.
struct LossTerms
{
  Tensor total;
  Tensor obs;
  Tensor occ;
  Tensor warp;
  Tensor focal;
};

/// (w_obs L_obs + w_occ L_occ + w_W L_W + w_F L_F) / (h w T_f).
/// `occupancy_logits` and `flow` are [T_f, H, W, 2].
LossTerms total_loss(const Tensor & occupancy_logits, const Tensor & flow,
                     const TargetTensors & targets, const LossWeights & weights);

}  // namespace occflow

#endif  // OCCFLOW__LOSSES_HPP_
