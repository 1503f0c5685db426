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

#include "occflow/fusion.hpp"

#include "occflow/encoders.hpp"
#include "occflow/errors.hpp"
#include "occflow/warp.hpp"

namespace occflow
{

namespace
{

std::size_t u(int v) { return static_cast<std::size_t>(v); }

}  // namespace

FlowGuidedAttention::FlowGuidedAttention(const Scope & scope, const ModelConfig & config)
: height_(u(config.feature_height())),
  width_(u(config.feature_width())),
  steps_(u(config.future_steps())),
  rho_(config.resolved_offset_scale()),
  guided_(config.use_flow_guidance)
{
  const std::size_t dim = 4 * u(config.channels);
  head_dim_ = resolve_head_dim(dim, steps_, u(config.head_dim));
  const double eps = config.layer_norm_eps;
  // Zero last layer: training starts from the identity warp.
  offset_ffn = Mlp(scope.child("offset_ffn"), dim, dim, 2 * steps_, Init::zeros);
  norm = LayerNorm(scope.child("norm"), dim, eps);
  query = Linear(scope.child("query"), dim, steps_ * head_dim_);
  for (std::size_t k = 0; k < steps_; ++k) {
    const std::string id = std::to_string(k + 1);
    keys.emplace_back(scope.child("key" + id), dim, head_dim_);
    values.emplace_back(scope.child("value" + id), dim, head_dim_);
    outputs.emplace_back(scope.child("out" + id), head_dim_, dim);
  }
  bias = RelPosBias(scope.child("rel_bias"), height_, width_, steps_);
  ffn_norm = LayerNorm(scope.child("ffn_norm"), dim, eps);
  ffn = Mlp(scope.child("ffn"), dim, dim * u(config.mlp_ratio), dim);
}

std::vector<Tensor> FlowGuidedAttention::make_offsets(const Tensor & h3,
                                                      const ForwardContext & ctx) const
{
  const Tensor raw = scale(tanh(offset_ffn(h3, ctx)), rho_);
  std::vector<Tensor> out;
  out.reserve(steps_);
  for (std::size_t k = 0; k < steps_; ++k) out.push_back(slice(raw, -1, 2 * k, 2));
  return out;
}

std::vector<Tensor> FlowGuidedAttention::attend(const Tensor & h3, const std::vector<Tensor> & offsets,
                                                const ForwardContext & ctx) const
{
  if (h3.rank() != 3 || h3.dim(0) != height_ || h3.dim(1) != width_) {
    throw DimensionError("fg_msa built for " + std::to_string(height_) + "x" +
                         std::to_string(width_) + ", got " + shape_str(h3.shape()));
  }
  if (offsets.size() != steps_) {
    throw DimensionError("fg_msa expects " + std::to_string(steps_) + " offset fields, got " +
                         std::to_string(offsets.size()));
  }
  const std::size_t n = height_ * width_;
  const std::size_t dim = h3.dim(2);
  const Tensor x = norm(h3);
  const Tensor q_all = reshape(query(x), {n, steps_ * head_dim_});
  const Tensor b = bias();
  const Tensor mesh = guided_ ? mesh_grid(height_, width_) : Tensor();
  std::vector<Tensor> out;
  out.reserve(steps_);
  for (std::size_t k = 0; k < steps_; ++k) {
    const Tensor src = guided_ ? bilinear_warp(x, add(mesh, offsets[k])) : x;
    const Tensor flat = reshape(src, {n, dim});
    const Tensor q = slice(q_all, -1, k * head_dim_, head_dim_);
    const Tensor head = attention_heads(q, keys[k](flat), values[k](flat), 1, slice(b, 0, k, 1));
    const Tensor o = ctx.drop(outputs[k](head));
    out.push_back(add(h3, reshape(o, {height_, width_, dim})));
  }
  return out;
}

std::vector<Tensor> FlowGuidedAttention::forward(const Tensor & h3, const std::vector<Tensor> & offsets,
                                                 const ForwardContext & ctx) const
{
  std::vector<Tensor> out = attend(h3, offsets, ctx);
  for (Tensor & h : out) h = add(h, ffn(ffn_norm(h), ctx));
  return out;
}

TrajectoryCrossAttention::TrajectoryCrossAttention(const Scope & scope, const ModelConfig & config)
: flow_term(config.use_flow_guidance)
{
  const std::size_t dim = 4 * u(config.channels);
  const std::size_t heads = u(config.cross_heads);
  offset_proj = Linear(scope.child("offset_proj"), 2, dim);
  norm = LayerNorm(scope.child("norm"), dim, config.layer_norm_eps);
  attention = MultiHeadAttention(scope.child("attention"), dim, dim, dim, heads,
                                 resolve_head_dim(dim, heads, u(config.head_dim)));
}

Tensor TrajectoryCrossAttention::queries(const Tensor & occupancy_features, const Tensor & offsets) const
{
  if (!flow_term) return occupancy_features;
  return add(occupancy_features, offset_proj(offsets));
}

Tensor TrajectoryCrossAttention::operator()(const Tensor & occupancy_features, const Tensor & offsets,
                                            const Tensor & agents, const std::vector<bool> & valid,
                                            const ForwardContext & ctx) const
{
  const Tensor q = queries(occupancy_features, offsets);
  bool any = false;
  for (bool v : valid) any = any || v;
  if (!any) return q;
  if (agents.rank() != 2 || agents.dim(0) != valid.size() || agents.dim(1) != q.dim(2)) {
    throw DimensionError("cross attention: agent tokens " + shape_str(agents.shape()) +
                         " do not match " + std::to_string(valid.size()) + " x " +
                         std::to_string(q.dim(2)));
  }
  const std::size_t h = q.dim(0), w = q.dim(1), dim = q.dim(2);
  const Tensor flat = reshape(q, {h * w, dim});
  const Tensor attended = attention(norm(flat), agents, key_mask(valid), ctx);
  return reshape(add(flat, attended), {h, w, dim});
}

}  // namespace occflow
