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

#ifndef OCCFLOW__WARP_HPP_
#define OCCFLOW__WARP_HPP_

#include <vector>

#include "occflow/scene.hpp"
#include "occflow/tensor.hpp"

namespace occflow
{

/// Bilinear interpolation kernel max(0, 1 - |i - j|).
double interp_kernel(double i, double j);

/// Samples field[H,W,C] at continuous positions indices[H,W,2] given as
/// (x = column, y = row). Samples falling outside the field read zero.
/// Differentiable with respect to both arguments.
Tensor bilinear_warp(const Tensor & field, const Tensor & indices);

/// Identity sampling positions [H,W,2]: (col, row) per cell.
Tensor mesh_grid(std::size_t height, std::size_t width);

/// Warps a [H,W,C] tensor by backward flow [H,W,2]: samples at mesh + flow.
Tensor flow_warp(const Tensor & field, const Tensor & flow);

Tensor to_tensor(const OccupancyGrid & grid);
Tensor to_tensor(const FlowField & flow);
OccupancyGrid to_occupancy(const Tensor & t, OccupancyKind kind = OccupancyKind::observed);

/// f_W(O_prev, F): previous occupancy transported by backward flow.
OccupancyGrid flow_warp_occupancy(const OccupancyGrid & previous, const FlowField & flow);

/// Flow-traced occupancy: W_1 = f_W(O_0, F_1) * O_1, W_k = f_W(W_{k-1}, F_k) * O_k,
/// using the observed occupancy and flow of `preds`.
std::vector<OccupancyGrid> flow_trace(const OccupancyGrid & current, const PredictionSet & preds);

}  // namespace occflow

#endif  // OCCFLOW__WARP_HPP_
