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

#include "occflow/decoder.hpp"

#include "occflow/errors.hpp"

namespace occflow
{

FpnDecoder::FpnDecoder(const Scope & scope, const ModelConfig & config)
{
  const auto & d = config.decoder_dims;
  const std::size_t C = static_cast<std::size_t>(config.channels);
  const std::size_t widths[5] = {4 * C, static_cast<std::size_t>(d[0]), static_cast<std::size_t>(d[1]),
                                 static_cast<std::size_t>(d[2]), static_cast<std::size_t>(d[2])};
  for (std::size_t l = 0; l < 4; ++l) {
    levels.emplace_back(scope.child("level" + std::to_string(l + 1)), 3, widths[l], widths[l + 1], 1, 1);
  }
  lateral2 = Conv2d(scope.child("lateral2"), 1, 2 * C, widths[1]);
  lateral1 = Conv2d(scope.child("lateral1"), 1, C, widths[2]);
  const std::size_t out = static_cast<std::size_t>(d[3]);
  occupancy_head = Conv2d(scope.child("occupancy_head"), 1, widths[4], out);
  for (double & b : occupancy_head.bias.data()) b = config.occupancy_prior_logit;
  flow_head = Conv2d(scope.child("flow_head"), 1, widths[4], out);
}

DecoderOutput FpnDecoder::operator()(const Tensor & fused, const Tensor & h2, const Tensor & h1) const
{
  if (fused.rank() != 4) throw DimensionError("decoder expects [T, h, w, c], got " + shape_str(fused.shape()));
  const std::size_t h = fused.dim(1), w = fused.dim(2);
  auto lateral = [](const Conv2d & conv, const Tensor & r, std::size_t rh, std::size_t rw,
                    const char * name) {
    if (r.rank() != 3 || r.dim(0) != rh || r.dim(1) != rw || r.dim(2) != conv.kernel.dim(2)) {
      throw ConfigError(std::string("decoder.") + name + ": residual " + shape_str(r.shape()) +
                        " does not match " + std::to_string(rh) + "x" + std::to_string(rw) + "x" +
                        std::to_string(conv.kernel.dim(2)));
    }
    return conv(reshape(r, {1, rh, rw, r.dim(2)}));
  };
  Tensor x = fused;
  for (std::size_t l = 0; l < 4; ++l) {
    x = elu(levels[l](upsample_nearest(x, 2)));
    if (l == 0) x = add(x, lateral(lateral2, h2, 2 * h, 2 * w, "lateral2"));
    if (l == 1) x = add(x, lateral(lateral1, h1, 4 * h, 4 * w, "lateral1"));
  }
  return {occupancy_head(x), flow_head(x)};
}

PredictionSet to_predictions(const DecoderOutput & out)
{
  const Tensor prob = sigmoid(out.occupancy_logits);
  const std::size_t T = prob.dim(0), H = prob.dim(1), W = prob.dim(2);
  const auto p = prob.values();
  const auto f = out.flow.values();
  PredictionSet set;
  for (std::size_t k = 0; k < T; ++k) {
    OccupancyGrid obs(static_cast<int>(H), static_cast<int>(W), OccupancyKind::observed);
    OccupancyGrid occ(static_cast<int>(H), static_cast<int>(W), OccupancyKind::occluded);
    FlowField flow(static_cast<int>(H), static_cast<int>(W));
    for (std::size_t i = 0; i < H * W; ++i) {
      obs.data[i] = p[(k * H * W + i) * 2];
      occ.data[i] = p[(k * H * W + i) * 2 + 1];
      flow.data[2 * i] = f[(k * H * W + i) * 2];
      flow.data[2 * i + 1] = f[(k * H * W + i) * 2 + 1];
    }
    set.observed.push_back(std::move(obs));
    set.occluded.push_back(std::move(occ));
    set.flow.push_back(std::move(flow));
  }
  return set;
}

}  // namespace occflow
