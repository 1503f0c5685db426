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

#include "occflow/warp.hpp"

#include <algorithm>
#include <cmath>

namespace occflow
{

double interp_kernel(double i, double j) { return std::max(0.0, 1.0 - std::abs(i - j)); }

Tensor bilinear_warp(const Tensor & field, const Tensor & indices)
{
  const Shape & sf = field.shape();
  const Shape & si = indices.shape();
  if (sf.size() != 3 || si.size() != 3 || si[2] != 2 || si[0] != sf[0] || si[1] != sf[1]) {
    throw DimensionError("bilinear_warp expects field[H,W,C] and indices[H,W,2], got " +
                         shape_str(sf) + " and " + shape_str(si));
  }
  const std::size_t H = sf[0], W = sf[1], C = sf[2];
  const auto vf = field.values();
  const auto vi = indices.values();
  std::vector<double> out(H * W * C, 0.0);

  // Visits the (up to) four in-range neighbours of a sample point.
  auto neighbours = [H, W](double sx, double sy, auto && fn) {
    const double fx = std::floor(sx);
    const double fy = std::floor(sy);
    const double ax = sx - fx;
    const double ay = sy - fy;
    const long x0 = static_cast<long>(fx);
    const long y0 = static_cast<long>(fy);
    for (int dy = 0; dy < 2; ++dy) {
      const long y = y0 + dy;
      if (y < 0 || y >= static_cast<long>(H)) continue;
      const double wy = dy ? ay : 1.0 - ay;
      const double dwy = dy ? 1.0 : -1.0;
      for (int dx = 0; dx < 2; ++dx) {
        const long x = x0 + dx;
        if (x < 0 || x >= static_cast<long>(W)) continue;
        const double wx = dx ? ax : 1.0 - ax;
        const double dwx = dx ? 1.0 : -1.0;
        fn(static_cast<std::size_t>(y) * W + static_cast<std::size_t>(x), wx, wy, dwx, dwy);
      }
    }
  };

  for (std::size_t p = 0; p < H * W; ++p) {
    const double sx = vi[2 * p];
    const double sy = vi[2 * p + 1];
    if (!std::isfinite(sx) || !std::isfinite(sy)) {
      throw ContractError("bilinear_warp: non-finite sample position");
    }
    double * o = out.data() + p * C;
    neighbours(sx, sy, [&](std::size_t q, double wx, double wy, double, double) {
      const double w = wx * wy;
      const double * src = vf.data() + q * C;
      for (std::size_t c = 0; c < C; ++c) o[c] += w * src[c];
    });
  }
  return make_result(sf, std::move(out), {field, indices}, [=](std::span<const double> g) {
    double * gf = grad_sink(field);
    double * gi = grad_sink(indices);
    const auto vf = field.values();
    const auto vi = indices.values();
    for (std::size_t p = 0; p < H * W; ++p) {
      const double * gp = g.data() + p * C;
      double gsx = 0.0;
      double gsy = 0.0;
      neighbours(vi[2 * p], vi[2 * p + 1],
                 [&](std::size_t q, double wx, double wy, double dwx, double dwy) {
                   const double * src = vf.data() + q * C;
                   double dot = 0.0;
                   for (std::size_t c = 0; c < C; ++c) dot += gp[c] * src[c];
                   gsx += dot * dwx * wy;
                   gsy += dot * wx * dwy;
                   if (gf) {
                     const double w = wx * wy;
                     double * dst = gf + q * C;
                     for (std::size_t c = 0; c < C; ++c) dst[c] += w * gp[c];
                   }
                 });
      if (gi) {
        gi[2 * p] += gsx;
        gi[2 * p + 1] += gsy;
      }
    }
  });
}

Tensor mesh_grid(std::size_t height, std::size_t width)
{
  std::vector<double> v(height * width * 2);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      v[2 * (r * width + c)] = static_cast<double>(c);
      v[2 * (r * width + c) + 1] = static_cast<double>(r);
    }
  }
  return Tensor(Shape{height, width, 2}, std::move(v));
}

Tensor flow_warp(const Tensor & field, const Tensor & flow)
{
  return bilinear_warp(field, add(mesh_grid(field.dim(0), field.dim(1)), flow));
}

Tensor to_tensor(const OccupancyGrid & grid)
{
  return Tensor(Shape{static_cast<std::size_t>(grid.height), static_cast<std::size_t>(grid.width), 1},
                grid.data);
}

Tensor to_tensor(const FlowField & flow)
{
  return Tensor(Shape{static_cast<std::size_t>(flow.height), static_cast<std::size_t>(flow.width), 2},
                flow.data);
}

OccupancyGrid to_occupancy(const Tensor & t, OccupancyKind kind)
{
  if (t.rank() != 3 || t.dim(2) != 1) {
    throw DimensionError("occupancy tensor must be [H,W,1], got " + shape_str(t.shape()));
  }
  OccupancyGrid g(static_cast<int>(t.dim(0)), static_cast<int>(t.dim(1)), kind);
  g.data.assign(t.values().begin(), t.values().end());
  return g;
}

OccupancyGrid flow_warp_occupancy(const OccupancyGrid & previous, const FlowField & flow)
{
  if (previous.height != flow.height || previous.width != flow.width) {
    throw DimensionError("flow_warp_occupancy: occupancy and flow extents differ");
  }
  NoGradGuard guard;
  return to_occupancy(flow_warp(to_tensor(previous), to_tensor(flow)), previous.kind);
}

std::vector<OccupancyGrid> flow_trace(const OccupancyGrid & current, const PredictionSet & preds)
{
  std::vector<OccupancyGrid> traced;
  OccupancyGrid prev = current;
  for (std::size_t k = 0; k < preds.steps(); ++k) {
    OccupancyGrid w = flow_warp_occupancy(prev, preds.flow[k]);
    const auto & occ = preds.observed[k];
    for (std::size_t i = 0; i < w.data.size(); ++i) {
      w.data[i] = std::clamp(w.data[i] * occ.data[i], 0.0, 1.0);
    }
    traced.push_back(w);
    prev = std::move(w);
  }
  return traced;
}

}  // namespace occflow
