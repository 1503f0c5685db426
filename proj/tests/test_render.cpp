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

#include <gtest/gtest.h>

#include <filesystem>

#include "occflow/io.hpp"
#include "occflow/rasterizer.hpp"
#include "occflow/render.hpp"
#include "test_util.hpp"

namespace occflow
{
namespace
{

namespace fs = std::filesystem;

std::array<std::uint8_t, 3> pixel(const Image & img, int r, int c)
{
  const std::size_t i = 3 * static_cast<std::size_t>(r * img.width + c);
  return {img.rgb[i], img.rgb[i + 1], img.rgb[i + 2]};
}

TEST(Ppm, HeaderAndPayload)
{
  Image img(64, 64);
  img.rgb[0] = 200;
  const std::string bytes = encode_ppm(img);
  ASSERT_EQ(bytes.substr(0, 13), "P6\n64 64\n255\n");
  EXPECT_EQ(bytes.size(), 13u + 64 * 64 * 3);
  EXPECT_EQ(static_cast<unsigned char>(bytes[13]), 200);
  EXPECT_EQ(encode_ppm(Image(3, 2)).substr(0, 11), "P6\n3 2\n255\n");
}

TEST(RenderFlow, ZeroFieldIsUniform)
{
  const Image img = render_flow(FlowField(64, 64));
  for (std::size_t i = 0; i < img.rgb.size(); ++i) EXPECT_EQ(img.rgb[i], img.rgb[i % 3]);
}

TEST(RenderFlow, HueFollowsDirection)
{
  FlowField f(1, 4);
  f.data = {1, 0, 0, 1, -1, 0, 0, -1};
  const Image img = render_flow(f);
  EXPECT_EQ(pixel(img, 0, 0), (std::array<std::uint8_t, 3>{255, 0, 0}));    // hue 0
  EXPECT_EQ(pixel(img, 0, 1), (std::array<std::uint8_t, 3>{128, 255, 0}));  // hue 1/4
  EXPECT_EQ(pixel(img, 0, 2), (std::array<std::uint8_t, 3>{0, 255, 255}));  // hue 1/2
  EXPECT_EQ(pixel(img, 0, 3), (std::array<std::uint8_t, 3>{128, 0, 255}));  // hue 3/4
  // value scales with magnitude against the given maximum
  const Image half = render_flow(f, 2.0);
  EXPECT_EQ(pixel(half, 0, 0), (std::array<std::uint8_t, 3>{128, 0, 0}));
}

TEST(RenderOccupancy, ChannelsAndRoadDimming)
{
  OccupancyGrid obs(1, 3), occ(1, 3, OccupancyKind::occluded);
  RoadRaster road(1, 3);
  for (double & v : road.data) v = 1.0;
  obs.data[0] = 1.0;
  occ.data[1] = 1.0;
  const Image img = render_occupancy(obs, occ, road);
  EXPECT_EQ(pixel(img, 0, 0), (std::array<std::uint8_t, 3>{255, 0, 0}));
  EXPECT_EQ(pixel(img, 0, 1), (std::array<std::uint8_t, 3>{0, 255, 0}));
  EXPECT_EQ(pixel(img, 0, 2), (std::array<std::uint8_t, 3>{102, 102, 102}));
}

TEST(RenderGrayscale, Levels)
{
  OccupancyGrid g(1, 3);
  g.data = {0.0, 0.5, 1.0};
  const Image img = render_grayscale(g);
  EXPECT_EQ(pixel(img, 0, 0), (std::array<std::uint8_t, 3>{0, 0, 0}));
  EXPECT_EQ(pixel(img, 0, 1), (std::array<std::uint8_t, 3>{128, 128, 128}));
  EXPECT_EQ(pixel(img, 0, 2), (std::array<std::uint8_t, 3>{255, 255, 255}));
}

TEST(RenderPredictions, TranslatingBoxMatchesRasterizer)
{
  Scenario sc = testing::empty_scene();
  const double mpc = sc.grid.meters_per_cell;
  // +2 cells per step along x
  sc.agents.push_back(testing::make_agent(1, sc.timing, 4 * mpc, 2 * mpc, [&](int step) {
    return std::array<double, 3>{-10.0 + 2.0 * mpc * step, 5.0, 0.0};
  }));
  const PredictionSet gt = build_targets(sc);
  const RoadRaster road = rasterize_roadmap(sc);
  const fs::path dir = fs::temp_directory_path() / "occflow_render_test";
  fs::remove_all(dir);
  const OccupancyGrid current = rasterize_occupancy(sc, 0, AgentSelection::observed);
  const auto paths = render_predictions(gt, road, current, dir.string(), "gt_");
  ASSERT_EQ(paths.size(), 12u);
  double last_centroid = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(paths[3 * k], (dir / ("gt_occupancy_" + std::to_string(k + 1) + ".ppm")).string());
    const std::string bytes = read_file(paths[3 * k]);
    ASSERT_EQ(bytes.substr(0, 13), "P6\n64 64\n255\n");
    // red pixels are exactly the rasterised footprint
    double sum = 0.0;
    int n = 0;
    for (int r = 0; r < 64; ++r)
      for (int c = 0; c < 64; ++c) {
        const auto red = static_cast<unsigned char>(bytes[13 + 3 * static_cast<std::size_t>(r * 64 + c)]);
        const bool on = gt.observed[k].at(r, c) > 0.5;
        EXPECT_EQ(red == 255, on) << k << " " << r << "," << c;
        if (on) {
          sum += c;
          ++n;
        }
      }
    ASSERT_EQ(n, 8);
    const double centroid = sum / n;
    if (k > 0) EXPECT_DOUBLE_EQ(centroid - last_centroid, 2.0);
    last_centroid = centroid;
    EXPECT_TRUE(fs::exists(paths[3 * k + 1]));
    EXPECT_TRUE(fs::exists(paths[3 * k + 2]));
  }
  fs::remove_all(dir);
}

TEST(RenderPredictions, UnwritableDirectory)
{
  const fs::path blocker = fs::temp_directory_path() / "occflow_render_blocker";
  fs::remove_all(blocker);
  write_file(blocker.string(), "x");
  PredictionSet p;
  p.observed.emplace_back(2, 2);
  p.occluded.emplace_back(2, 2, OccupancyKind::occluded);
  p.flow.emplace_back(2, 2);
  EXPECT_THROW(render_predictions(p, RoadRaster(2, 2), OccupancyGrid(2, 2), (blocker / "sub").string(), ""), IoError);
  fs::remove(blocker);
}

}  // namespace
}  // namespace occflow
