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

#include "occflow/render.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "occflow/errors.hpp"
#include "occflow/io.hpp"
#include "occflow/warp.hpp"

namespace occflow
{

namespace
{

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

void set(Image & img, std::size_t i, double r, double g, double b)
{
  img.rgb[3 * i] = to_byte(r);
  img.rgb[3 * i + 1] = to_byte(g);
  img.rgb[3 * i + 2] = to_byte(b);
}

}  // namespace

std::string encode_ppm(const Image & image)
{
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(reinterpret_cast<const char *>(image.rgb.data()), image.rgb.size());
  return out;
}

void write_ppm(const Image & image, const std::string & path) { write_file(path, encode_ppm(image)); }

Image render_occupancy(const OccupancyGrid & observed, const OccupancyGrid & occluded, const RoadRaster & road)
{
  Image img(observed.width, observed.height);
  for (std::size_t i = 0; i < observed.cells(); ++i) {
    const double o = observed.data[i];
    const double c = occluded.data[i];
    const double keep = 0.4 * (1.0 - std::max(o, c));
    set(img, i, keep * road.data[3 * i] + o, keep * road.data[3 * i + 1] + c, keep * road.data[3 * i + 2]);
  }
  return img;
}

Image render_flow(const FlowField & flow, double max_magnitude)
{
  Image img(flow.width, flow.height);
  double top = max_magnitude;
  if (top <= 0.0) {
    for (std::size_t i = 0; i < flow.cells(); ++i) top = std::max(top, std::hypot(flow.data[2 * i], flow.data[2 * i + 1]));
  }
  for (std::size_t i = 0; i < flow.cells(); ++i) {
    const double dx = flow.data[2 * i];
    const double dy = flow.data[2 * i + 1];
    const double mag = std::hypot(dx, dy);
    const double value = top > 0.0 ? std::min(mag / top, 1.0) : 0.0;
    double hue = std::atan2(dy, dx) / (2.0 * std::numbers::pi);
    if (hue < 0.0) hue += 1.0;
    // HSV with full saturation.
    const double h6 = hue * 6.0;
    const int sector = static_cast<int>(h6) % 6;
    const double f = h6 - std::floor(h6);
    const double p = 0.0, q = value * (1.0 - f), t = value * f;
    switch (sector) {
      case 0: set(img, i, value, t, p); break;
      case 1: set(img, i, q, value, p); break;
      case 2: set(img, i, p, value, t); break;
      case 3: set(img, i, p, q, value); break;
      case 4: set(img, i, t, p, value); break;
      default: set(img, i, value, p, q); break;
    }
  }
  return img;
}

Image render_grayscale(const OccupancyGrid & grid)
{
  Image img(grid.width, grid.height);
  for (std::size_t i = 0; i < grid.cells(); ++i) set(img, i, grid.data[i], grid.data[i], grid.data[i]);
  return img;
}

std::vector<std::string> render_predictions(const PredictionSet & preds, const RoadRaster & road,
                                            const OccupancyGrid & current, const std::string & dir,
                                            const std::string & prefix)
{
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir + "': " + ec.message());
  const auto traced = flow_trace(current, preds);
  std::vector<std::string> paths;
  for (std::size_t k = 0; k < preds.steps(); ++k) {
    const std::string step = std::to_string(k + 1);
    const auto base = std::filesystem::path(dir);
    const std::string occ = (base / (prefix + "occupancy_" + step + ".ppm")).string();
    const std::string flow = (base / (prefix + "flow_" + step + ".ppm")).string();
    const std::string tr = (base / (prefix + "traced_" + step + ".ppm")).string();
    write_ppm(render_occupancy(preds.observed[k], preds.occluded[k], road), occ);
    write_ppm(render_flow(preds.flow[k]), flow);
    write_ppm(render_grayscale(traced[k]), tr);
    paths.insert(paths.end(), {occ, flow, tr});
  }
  return paths;
}

}  // namespace occflow
