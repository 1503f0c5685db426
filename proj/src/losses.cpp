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

#include "occflow/losses.hpp"

#include <cmath>

#include "occflow/errors.hpp"
#include "occflow/warp.hpp"

namespace occflow
{

namespace
{

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid_of(double z)
{
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_same(const Tensor & a, const Tensor & b, const char * what)
{
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " differ");
  }
}

// [T, H, W, C] -> [H, W, n] slice of step k, channels [c0, c0 + n).
Tensor step_channels(const Tensor & x, std::size_t k, std::size_t c0, std::size_t n)
{
  const Tensor s = slice(slice(x, 0, k, 1), -1, c0, n);
  return reshape(s, {x.dim(1), x.dim(2), n});
}

}  // namespace

Tensor bce_loss(const Tensor & logits, const Tensor & targets)
{
  check_same(logits, targets, "bce_loss");
  const auto z = logits.values();
  const auto t = targets.values();
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) total += t[i] * softplus(-z[i]) + (1.0 - t[i]) * softplus(z[i]);
  return make_result({}, {total}, {logits}, [logits, targets](std::span<const double> g) {
    double * gz = grad_sink(logits);
    if (!gz) return;
    const auto z = logits.values();
    const auto t = targets.values();
    for (std::size_t i = 0; i < z.size(); ++i) gz[i] += g[0] * (sigmoid_of(z[i]) - t[i]);
  });
}

Tensor focal_loss(const Tensor & logits, const Tensor & targets, double gamma, double alpha)
{
  check_same(logits, targets, "focal_loss");
  if (gamma < 0.0 || alpha <= 0.0 || alpha >= 1.0) {
    throw ConfigError("focal loss needs gamma >= 0 and alpha in (0, 1)");
  }
  const auto z = logits.values();
  const auto t = targets.values();
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double p = sigmoid_of(z[i]);
    const double pos = alpha * std::pow(1.0 - p, gamma) * softplus(-z[i]);
    const double neg = (1.0 - alpha) * std::pow(p, gamma) * softplus(z[i]);
    total += t[i] * pos + (1.0 - t[i]) * neg;
  }
  return make_result({}, {total}, {logits}, [logits, targets, gamma, alpha](std::span<const double> g) {
    double * gz = grad_sink(logits);
    if (!gz) return;
    const auto z = logits.values();
    const auto t = targets.values();
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double p = sigmoid_of(z[i]);
      const double log_p = -softplus(-z[i]);
      const double log_q = -softplus(z[i]);
      const double dpos = -alpha * std::pow(1.0 - p, gamma) * ((1.0 - p) - gamma * p * log_p);
      const double dneg = (1.0 - alpha) * std::pow(p, gamma) * (p - gamma * (1.0 - p) * log_q);
      gz[i] += g[0] * (t[i] * dpos + (1.0 - t[i]) * dneg);
    }
  });
}

Tensor bce_prob(const Tensor & probs, const Tensor & targets)
{
  check_same(probs, targets, "bce_prob");
  const Tensor one_minus_t = add_scalar(scale(targets, -1.0), 1.0);
  const Tensor one_minus_p = add_scalar(scale(probs, -1.0), 1.0);
  return scale(sum(add(mul(targets, log(probs)), mul(one_minus_t, log(one_minus_p)))), -1.0);
}

Tensor warp_loss(const Tensor & prev_gt, const Tensor & gt, const Tensor & flow, const Tensor & obs_logits)
{
  check_same(prev_gt, gt, "warp_loss");
  check_same(gt, obs_logits, "warp_loss");
  const Tensor warped = flow_warp(prev_gt, flow);
  const Tensor p = clamp(mul(warped, sigmoid(obs_logits)), kWarpEps, 1.0 - kWarpEps);
  return bce_prob(p, gt);
}

TargetTensors make_target_tensors(const PredictionSet & gt, const OccupancyGrid & current)
{
  const std::size_t T = gt.steps();
  if (T == 0 || gt.occluded.size() != T || gt.flow.size() != T) {
    throw DimensionError("ground truth needs matching observed/occluded/flow steps");
  }
  const std::size_t H = static_cast<std::size_t>(gt.observed[0].height);
  const std::size_t W = static_cast<std::size_t>(gt.observed[0].width);
  std::vector<double> obs, occ, flow;
  obs.reserve(T * H * W);
  occ.reserve(T * H * W);
  flow.reserve(T * H * W * 2);
  for (std::size_t k = 0; k < T; ++k) {
    obs.insert(obs.end(), gt.observed[k].data.begin(), gt.observed[k].data.end());
    occ.insert(occ.end(), gt.occluded[k].data.begin(), gt.occluded[k].data.end());
    flow.insert(flow.end(), gt.flow[k].data.begin(), gt.flow[k].data.end());
  }
  return {Tensor({T, H, W, 1}, std::move(obs)), Tensor({T, H, W, 1}, std::move(occ)),
          Tensor({T, H, W, 2}, std::move(flow)), to_tensor(current)};
}

LossWeights LossWeights::from(const ModelConfig & config)
{
  LossWeights w;
  w.obs = config.weight_obs;
  w.occ = config.weight_occ;
  w.warp = config.weight_warp;
  w.focal = config.weight_focal;
  w.gamma = config.focal_gamma;
  w.alpha = config.focal_alpha;
  return w;
}

LossTerms total_loss(const Tensor & occupancy_logits, const Tensor & flow,
                     const TargetTensors & targets, const LossWeights & weights)
{
  if (occupancy_logits.rank() != 4 || occupancy_logits.dim(-1) != 2) {
    throw DimensionError("occupancy logits must be [T, H, W, 2], got " +
                         shape_str(occupancy_logits.shape()));
  }
  check_same(occupancy_logits, flow, "total_loss");
  const std::size_t T = occupancy_logits.dim(0);
  const std::size_t H = occupancy_logits.dim(1);
  const std::size_t W = occupancy_logits.dim(2);
  if (targets.observed.shape() != Shape{T, H, W, 1} || targets.flow.shape() != flow.shape()) {
    throw DimensionError("targets " + shape_str(targets.observed.shape()) + " do not match logits " +
                         shape_str(occupancy_logits.shape()));
  }
  const Tensor obs_logits = slice(occupancy_logits, -1, 0, 1);
  const Tensor occ_logits = slice(occupancy_logits, -1, 1, 1);

  LossTerms terms;
  terms.obs = bce_loss(obs_logits, targets.observed);
  terms.occ = bce_loss(occ_logits, targets.occluded);
  terms.focal = add(focal_loss(obs_logits, targets.observed, weights.gamma, weights.alpha),
                    focal_loss(occ_logits, targets.occluded, weights.gamma, weights.alpha));

  Tensor warp = Tensor::scalar(0.0);
  for (std::size_t k = 0; k < T; ++k) {
    const Tensor prev = k == 0 ? targets.current : step_channels(targets.observed, k - 1, 0, 1);
    warp = add(warp, warp_loss(prev, step_channels(targets.observed, k, 0, 1),
                               step_channels(flow, k, 0, 2), step_channels(occupancy_logits, k, 0, 1)));
  }
  terms.warp = warp;

  Tensor total = add(add(scale(terms.obs, weights.obs), scale(terms.occ, weights.occ)),
                     add(scale(terms.warp, weights.warp), scale(terms.focal, weights.focal)));
  terms.total = scale(total, 1.0 / static_cast<double>(H * W * T));
  return terms;
}

}  // namespace occflow
