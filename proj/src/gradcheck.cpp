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

#include "occflow/gradcheck.hpp"

#include <cmath>

#include "occflow/attention.hpp"
#include "occflow/fusion.hpp"
#include "occflow/losses.hpp"
#include "occflow/model.hpp"
#include "occflow/pipeline.hpp"
#include "occflow/scenario_gen.hpp"
#include "occflow/warp.hpp"

namespace occflow
{

namespace
{

// Fractional parts kept away from integer sample positions, where the
// bilinear kernel has kinks.
Tensor smooth_offsets(Shape shape, Rng & rng, double span)
{
  std::vector<double> v(shape_numel(shape));
  for (double & x : v) {
    const double whole = std::floor(rng.uniform(-span, span));
    x = whole + rng.uniform(0.15, 0.85);
  }
  return Tensor(std::move(shape), std::move(v));
}

void randomize(Tensor & t, Rng & rng, double scale)
{
  for (double & v : t.data()) v = rng.uniform(-scale, scale);
}

}  // namespace

std::vector<GradCheckResult> gradient_suite(std::uint64_t seed)
{
  std::vector<GradCheckResult> out;
  auto record = [&out](const std::string & name, double err, std::size_t n) { out.push_back({name, err, n}); };

  Rng rng(seed);
  {
    ParameterStore store;
    const Scope scope(store, rng);
    const std::size_t heads = 2, N = 5, M = 4, width = 6;
    const Linear proj(scope.child("proj"), width, 5);
    Tensor q = uniform_tensor({N, width}, rng, -1, 1);
    Tensor k = uniform_tensor({M, width}, rng, -1, 1);
    Tensor v = uniform_tensor({M, width}, rng, -1, 1);
    Tensor bias = uniform_tensor({heads, N, M}, rng, -0.5, 0.5);
    const Tensor r = uniform_tensor({N, 5}, rng, -1, 1);
    auto f = [&]() { return sum(mul(msa(q, k, v, heads, proj, bias), r)); };
    record("msa/query", finite_difference_check(f, q), q.numel());
    record("msa/key", finite_difference_check(f, k), k.numel());
    record("msa/value", finite_difference_check(f, v), v.numel());
    record("msa/bias", finite_difference_check(f, bias), bias.numel());
    Tensor w = proj.weight;
    record("msa/output_projection", finite_difference_check(f, w), w.numel());
  }
  {
    ParameterStore store;
    const Scope scope(store, rng);
    WindowAttention attn(scope, 8, 8, 4, 4, 2, 2, 2);
    randomize(attn.bias.table, rng, 0.5);
    Tensor x = uniform_tensor({8, 8, 4}, rng, -1, 1);
    const Tensor r = uniform_tensor({8, 8, 4}, rng, -1, 1);
    auto f = [&]() { return sum(mul(attn(x, ForwardContext{}), r)); };
    record("shifted_window_attention/input", finite_difference_check(f, x), x.numel());
    Tensor w = attn.qkv.weight;
    record("shifted_window_attention/qkv", finite_difference_check(f, w), w.numel());
    record("shifted_window_attention/relative_bias", finite_difference_check(f, attn.bias.table),
           attn.bias.table.numel());
  }
  {
    Tensor field = uniform_tensor({5, 6, 3}, rng, -1, 1);
    Tensor idx = add(mesh_grid(5, 6), smooth_offsets({5, 6, 2}, rng, 2.0));
    const Tensor r = uniform_tensor({5, 6, 3}, rng, -1, 1);
    auto f = [&]() { return sum(mul(bilinear_warp(field, idx), r)); };
    record("bilinear_warp/field", finite_difference_check(f, field), field.numel());
    record("bilinear_warp/indices", finite_difference_check(f, idx), idx.numel());
  }
  {
    ModelConfig cfg = ModelConfig::micro();
    cfg.grid = {64, 64, 1.25};
    cfg.dropout = 0.0;
    ParameterStore store;
    const Scope scope(store, rng);
    FlowGuidedAttention fg(scope, cfg);
    // Move off the identity start so offset gradients are exercised.
    randomize(fg.offset_ffn.fc2.weight, rng, 0.5);
    randomize(fg.offset_ffn.fc2.bias, rng, 0.5);
    randomize(fg.bias.table, rng, 0.5);
    const std::size_t D = 4 * static_cast<std::size_t>(cfg.channels);
    Tensor h3 = uniform_tensor({4, 4, D}, rng, -1, 1);
    const Tensor r = uniform_tensor({4, 4, D}, rng, -1, 1);
    auto f = [&]() {
      const ForwardContext ctx;
      Tensor total = Tensor::scalar(0.0);
      for (const Tensor & h : fg.forward(h3, fg.make_offsets(h3, ctx), ctx)) total = add(total, sum(mul(h, r)));
      return total;
    };
    record("fg_msa/input", finite_difference_check(f, h3), h3.numel());
    record("fg_msa/offset_ffn.fc1", finite_difference_check(f, fg.offset_ffn.fc1.weight),
           fg.offset_ffn.fc1.weight.numel());
    record("fg_msa/offset_ffn.fc2", finite_difference_check(f, fg.offset_ffn.fc2.weight),
           fg.offset_ffn.fc2.weight.numel());
    record("fg_msa/key1", finite_difference_check(f, fg.keys[0].weight), fg.keys[0].weight.numel());
    record("fg_msa/out2", finite_difference_check(f, fg.outputs[1].weight), fg.outputs[1].weight.numel());
  }
  {
    const std::size_t T = 2, H = 6, W = 6;
    Tensor logits = uniform_tensor({T, H, W, 2}, rng, -3, 3);
    Tensor flow = smooth_offsets({T, H, W, 2}, rng, 2.0);
    std::vector<double> obs(T * H * W), occ(T * H * W), cur(H * W);
    for (double & v : obs) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
    for (double & v : occ) v = rng.uniform() < 0.2 ? 1.0 : 0.0;
    for (double & v : cur) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
    TargetTensors t{Tensor({T, H, W, 1}, obs), Tensor({T, H, W, 1}, occ), uniform_tensor({T, H, W, 2}, rng, -2, 2),
                    Tensor({H, W, 1}, cur)};
    Tensor z = slice(logits, -1, 0, 1).detach();
    auto bce = [&]() { return bce_loss(z, t.observed); };
    auto focal = [&]() { return focal_loss(z, t.observed, 2.0, 0.25); };
    record("loss/bce", finite_difference_check(bce, z), z.numel());
    record("loss/focal", finite_difference_check(focal, z), z.numel());
    Tensor fk = reshape(slice(flow, 0, 0, 1), {H, W, 2}).detach();
    Tensor zk = reshape(slice(logits, 0, 0, 1), {H, W, 2}).detach();
    Tensor zobs = slice(zk, -1, 0, 1).detach();
    const Tensor gt1 = reshape(slice(t.observed, 0, 0, 1), {H, W, 1});
    auto warp = [&]() { return warp_loss(t.current, gt1, fk, zobs); };
    record("loss/warp.flow", finite_difference_check(warp, fk), fk.numel());
    record("loss/warp.logits", finite_difference_check(warp, zobs), zobs.numel());
    LossWeights weights;
    auto total = [&]() { return total_loss(logits, flow, t, weights).total; };
    record("loss/total.logits", finite_difference_check(total, logits), logits.numel());
    record("loss/total.flow", finite_difference_check(total, flow), flow.numel());
  }
  {
    ModelConfig cfg = ModelConfig::micro();
    cfg.seed = seed;
    OccFlowModel model(cfg);
    // Non-zero offsets so the warp path contributes.
    randomize(model.fg_msa.offset_ffn.fc2.weight, rng, 0.3);
    randomize(model.fg_msa.offset_ffn.fc2.bias, rng, 0.3);
    GenSpec spec;
    spec.grid = cfg.grid;
    spec.timing = cfg.timing;
    spec.max_agents = cfg.max_agents;
    spec.n_agents = 3;
    spec.n_occluded = 1;
    spec.motion = Motion::linear;
    spec.max_speed = 4.0;
    const Sample sample = make_sample(generate(seed, spec), cfg.max_agents);
    auto f = [&]() { return sample_loss(model, sample, ForwardContext{}).total; };
    const char * names[] = {"embed.occupancy.kernel",
                            "visual.stage1.wsa.attn.qkv.weight",
                            "visual.flow_block.swsa.mlp.fc1.weight",
                            "visual.stage3.wsa.attn.proj.weight",
                            "trajectory.input.weight",
                            "interaction.attention.v.weight",
                            "fg_msa.offset_ffn.fc1.weight",
                            "fg_msa.query.weight",
                            "cross1.offset_proj.weight",
                            "cross2.attention.q.weight",
                            "decoder.level1.kernel",
                            "decoder.lateral1.kernel",
                            "decoder.flow_head.kernel",
                            "decoder.occupancy_head.bias"};
    for (const char * name : names) {
      const Parameter * p = model.parameters().find(name);
      if (!p) {
        record(std::string("micro_model/") + name + " (missing)", INFINITY, 0);
        continue;
      }
      Tensor leaf = p->tensor;
      record(std::string("micro_model/") + name, finite_difference_check(f, leaf, 1e-5), leaf.numel());
    }
  }
  return out;
}

}  // namespace occflow
