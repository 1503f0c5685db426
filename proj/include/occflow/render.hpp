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

#ifndef OCCFLOW__RENDER_HPP_
#define OCCFLOW__RENDER_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "occflow/scene.hpp"

namespace occflow
{

/// 8-bit RGB image, row-major.
struct Image
{
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w * h * 3), 0) {}
};

/// Binary P6 encoding ("P6\n<w> <h>\n255\n" followed by the pixels).
std::string encode_ppm(const Image & image);
void write_ppm(const Image & image, const std::string & path);

/// Observed occupancy in red and occluded in green over the dimmed road raster.
Image render_occupancy(const OccupancyGrid & observed, const OccupancyGrid & occluded, const RoadRaster & road);
/// Direction as hue and magnitude (relative to `max_magnitude`, or the field's
/// maximum when 0) as value.
Image render_flow(const FlowField & flow, double max_magnitude = 0.0);
Image render_grayscale(const OccupancyGrid & grid);

/// Writes <prefix>occupancy_k.ppm, <prefix>flow_k.ppm and
/// <prefix>traced_k.ppm for every step. Returns the paths written.
std::vector<std::string> render_predictions(const PredictionSet & preds, const RoadRaster & road,
                                            const OccupancyGrid & current, const std::string & dir,
                                            const std::string & prefix);

}  // namespace occflow

#endif  // OCCFLOW__RENDER_HPP_
