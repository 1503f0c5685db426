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

#include "occflow/encoders.hpp"

#include <cmath>
#include <numbers>

#include "occflow/errors.hpp"

namespace occflow
{

namespace
{

std::size_t u(int v) { return static_cast<std::size_t>(v); }

Tensor as_batch(const Tensor & x) { return reshape(x, {1, x.dim(0), x.dim(1), x.dim(2)}); }

Tensor drop_batch(const Tensor & x) { return reshape(x, {x.dim(1), x.dim(2), x.dim(3)}); }

}  // namespace

PatchEmbed::PatchEmbed(const Scope & scope, std::size_t history_channels, std::size_t channels)
: history_channels_(history_channels)
{
  occupancy = Conv2d(scope.child("occupancy"), 4, history_channels, channels, 4, 0);
  road = Conv2d(scope.child("road"), 4, 3, channels, 4, 0);
  flow = Conv2d(scope.child("flow"), 4, 2, channels, 4, 0);
}

Embeddings PatchEmbed::operator()(const Tensor & occ, const Tensor & map, const Tensor & fl) const
{
  auto check = [](const Tensor & t, std::size_t ch, const char * what) {
    if (t.rank() != 3 || t.dim(2) != ch) {
      throw ConfigError(std::string("patch_embed.") + what + ": expected " + std::to_string(ch) +
                        " channels, got " + shape_str(t.shape()));
    }
    if (t.dim(0) % 4 != 0 || t.dim(1) % 4 != 0) {
      throw ConfigError(std::string("patch_embed.") + what + ": extent not divisible by 4");
    }
  };
  check(occ, history_channels_, "occupancy");
  check(map, 3, "road");
  check(fl, 2, "flow");
  return {drop_batch(occupancy(as_batch(occ))), drop_batch(road(as_batch(map))),
          drop_batch(flow(as_batch(fl)))};
}

SwinLayer::SwinLayer(const Scope & scope, std::size_t height, std::size_t width, std::size_t dim,
                     const ModelConfig & config, std::size_t heads, std::size_t shift)
{
  const double eps = config.layer_norm_eps;
  norm1 = LayerNorm(scope.child("norm1"), dim, eps);
  attn = WindowAttention(scope.child("attn"), height, width, dim, u(config.window), heads,
                         u(config.head_dim), shift);
  norm2 = LayerNorm(scope.child("norm2"), dim, eps);
  mlp = Mlp(scope.child("mlp"), dim, dim * u(config.mlp_ratio), dim);
}

Tensor SwinLayer::operator()(const Tensor & x, const ForwardContext & ctx) const
{
  const Tensor y = add(x, attn(norm1(x), ctx));
  return add(y, mlp(norm2(y), ctx));
}

SwinBlock::SwinBlock(const Scope & scope, std::size_t height, std::size_t width, std::size_t dim,
                     const ModelConfig & config, std::size_t heads)
{
  regular = SwinLayer(scope.child("wsa"), height, width, dim, config, heads, 0);
  shifted = SwinLayer(scope.child("swsa"), height, width, dim, config, heads, u(config.window) / 2);
}

Tensor SwinBlock::operator()(const Tensor & x, const ForwardContext & ctx) const
{
  return shifted(regular(x, ctx), ctx);
}

PatchMerging::PatchMerging(const Scope & scope, std::size_t dim, double eps)
{
  norm = LayerNorm(scope.child("norm"), 4 * dim, eps);
  reduction = Linear(scope.child("reduction"), 4 * dim, 2 * dim, false);
}

Tensor PatchMerging::operator()(const Tensor & x) const
{
  if (x.rank() != 3 || x.dim(0) % 2 != 0 || x.dim(1) % 2 != 0) {
    throw DimensionError("patch merging needs an even [H,W,C] map, got " + shape_str(x.shape()));
  }
  const std::size_t H = x.dim(0), W = x.dim(1), C = x.dim(2);
  // Concatenation order (0,0), (1,0), (0,1), (1,1) as (row, col) offsets.
  const Tensor t = permute(reshape(x, {H / 2, 2, W / 2, 2, C}), {0, 2, 3, 1, 4});
  return reduction(norm(reshape(t, {H / 2, W / 2, 4 * C})));
}

VisualEncoder::VisualEncoder(const Scope & scope, const ModelConfig & config)
{
  const std::size_t C = u(config.channels);
  std::size_t h = u(config.grid.height) / 4;
  std::size_t w = u(config.grid.width) / 4;
  flow_block = SwinBlock(scope.child("flow_block"), h, w, C, config, u(config.stage_heads[0]));
  for (std::size_t s = 0; s < 3; ++s) {
    const std::size_t dim = C << s;
    stages[s] = SwinBlock(scope.child("stage" + std::to_string(s + 1)), h, w, dim, config,
                          u(config.stage_heads[s]));
    if (s < 2) {
      merges[s] = PatchMerging(scope.child("merge" + std::to_string(s + 1)), dim,
                               config.layer_norm_eps);
      h /= 2;
      w /= 2;
    }
  }
}

VisualFeatures VisualEncoder::operator()(const Embeddings & e, const ForwardContext & ctx) const
{
  VisualFeatures out;
  out.h1 = add(stages[0](add(e.occupancy, e.road), ctx), flow_block(e.flow, ctx));
  out.h2 = stages[1](merges[0](out.h1), ctx);
  out.h3 = stages[2](merges[1](out.h2), ctx);
  return out;
}

Tensor sinusoidal_encoding(std::size_t steps, std::size_t dim)
{
  std::vector<double> v(steps * dim);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      const double a = static_cast<double>(t) * freq;
      v[t * dim + i] = (i % 2 == 0) ? std::sin(a) : std::cos(a);
    }
  }
  return Tensor({steps, dim}, std::move(v));
}

TrajectoryEncoder::TrajectoryEncoder(const Scope & scope, const ModelConfig & config)
: steps_(u(config.timing.history_steps) + 1), dim_(4 * u(config.channels))
{
  const std::size_t heads = u(config.trajectory_heads);
  input = Linear(scope.child("input"), 5, dim_);
  attention = MultiHeadAttention(scope.child("attention"), dim_, dim_, dim_, heads,
                                 resolve_head_dim(dim_, heads, u(config.head_dim)));
  type_embed = Linear(scope.child("type_embed"), 3, dim_);
  head = Linear(scope.child("head"), 2 * dim_, dim_);
  position_scale_ = 0.5 * config.grid.meters_per_cell * config.grid.width;
  positional_ = sinusoidal_encoding(steps_, dim_);
}

std::pair<Tensor, Tensor> TrajectoryEncoder::features(const std::vector<AgentVector> & agents) const
{
  constexpr double kSpeedScale = 10.0;
  const std::size_t n = agents.size();
  std::vector<double> f(n * steps_ * 5, 0.0);
  std::vector<double> m(n * steps_, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    const AgentVector & agent = agents[a];
    if (agent.states.size() != steps_ || agent.step_valid.size() != steps_) {
      throw DimensionError("trajectory encoder expects " + std::to_string(steps_) +
                           " history steps, agent " + std::to_string(agent.agent_id) + " has " +
                           std::to_string(agent.states.size()));
    }
    for (std::size_t t = 0; t < steps_; ++t) {
      if (!agent.step_valid[t]) {
        m[a * steps_ + t] = kMaskValue;
        continue;
      }
      const auto & s = agent.states[t];
      double * row = &f[(a * steps_ + t) * 5];
      row[0] = s[0] / position_scale_;
      row[1] = s[1] / position_scale_;
      row[2] = s[2] / kSpeedScale;
      row[3] = s[3] / kSpeedScale;
      row[4] = s[4] / std::numbers::pi;
    }
  }
  return {Tensor({n, steps_, 5}, std::move(f)), Tensor({n, 1, 1, steps_}, std::move(m))};
}

Tensor TrajectoryEncoder::operator()(const std::vector<AgentVector> & agents,
                                     const ForwardContext & ctx) const
{
  const std::size_t n = agents.size();
  if (n == 0) return Tensor(Shape{0, dim_});
  auto [feat, mask] = features(agents);
  const Tensor tokens = add(input(feat), positional_);
  const Tensor attended = attention(tokens, tokens, mask, ctx);
  // Max-pool over valid steps only.
  const Tensor pooled = max_axis(add(attended, reshape(mask, {n, steps_, 1})), 1);
  std::vector<double> onehot(n * 3, 0.0);
  for (std::size_t a = 0; a < n; ++a) onehot[a * 3 + static_cast<std::size_t>(agents[a].type)] = 1.0;
  const Tensor type = type_embed(Tensor({n, 3}, std::move(onehot)));
  return gelu(head(concat({pooled, type}, -1)));
}

Tensor key_mask(const std::vector<bool> & valid)
{
  std::vector<double> m(valid.size());
  for (std::size_t i = 0; i < valid.size(); ++i) m[i] = valid[i] ? 0.0 : kMaskValue;
  return Tensor({1, 1, valid.size()}, std::move(m));
}

InteractionTransformer::InteractionTransformer(const Scope & scope, const ModelConfig & config)
{
  const std::size_t dim = 4 * u(config.channels);
  const std::size_t heads = u(config.interaction_heads);
  norm = LayerNorm(scope.child("norm"), dim, config.layer_norm_eps);
  attention = MultiHeadAttention(scope.child("attention"), dim, dim, dim, heads,
                                 resolve_head_dim(dim, heads, u(config.head_dim)));
}

Tensor InteractionTransformer::operator()(const Tensor & embeddings, const std::vector<bool> & valid,
                                          const ForwardContext & ctx) const
{
  const std::size_t n = valid.size();
  if (embeddings.rank() != 2 || embeddings.dim(0) != n) {
    throw DimensionError("interaction transformer: " + shape_str(embeddings.shape()) + " vs " +
                         std::to_string(n) + " validity flags");
  }
  if (n == 0) return embeddings;
  const Tensor x = norm(embeddings);
  const Tensor h = add(embeddings, attention(x, x, key_mask(valid), ctx));
  std::vector<double> keep(n);
  for (std::size_t i = 0; i < n; ++i) keep[i] = valid[i] ? 1.0 : 0.0;
  return mul(h, Tensor({n, 1}, std::move(keep)));
}

}  // namespace occflow
