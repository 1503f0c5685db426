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

#ifndef OCCFLOW__METRICS_HPP_
#define OCCFLOW__METRICS_HPP_

#include <array>
#include <span>
#include <string>
#include <vector>

#include "occflow/scene.hpp"

namespace occflow
{

inline constexpr int kAucThresholds = 100;

/// Threshold grid: -1e-7, 1/99, ..., 98/99, 1 + 1e-7. A prediction counts
/// as positive at threshold t when it is strictly greater than t.
std::array<double, kAucThresholds> auc_thresholds();

struct AucResult
{
  double value = 0.0;
  /// Ground truth without positives; the value is 0.
  bool degenerate = false;
};

/// Precision-recall AUC with interpolated precision between adjacent
/// thresholds (the summation rule of the Waymo occupancy-flow metrics).
AucResult auc_pr(std::span<const double> pred, std::span<const double> gt);
AucResult auc_pr(const std::vector<OccupancyGrid> & pred, const std::vector<OccupancyGrid> & gt);

/// Sum(p g) / (Sum p + Sum g - Sum(p g)); 0 when the denominator is 0.
double soft_iou(std::span<const double> pred, std::span<const double> gt);
double soft_iou(const std::vector<OccupancyGrid> & pred, const std::vector<OccupancyGrid> & gt);

/// Mean end-point error over cells where `mask` > 0.5; 0 with no such cell.
double epe(const FlowField & pred, const FlowField & gt, const OccupancyGrid & mask);
/// EPE over cells occupied in either ground-truth stream.
double epe(const FlowField & pred, const FlowField & gt, const OccupancyGrid & observed,
           const OccupancyGrid & occluded);

struct FlowTracedMetrics
{
  double auc = 0.0;
  double soft_iou = 0.0;
};

/// Flow-traced occupancy scored against observed ground truth, averaged over steps.
FlowTracedMetrics ft_metrics(const PredictionSet & preds, const OccupancyGrid & current,
                             const PredictionSet & gt);

/// The seven reported metrics.
struct MetricsReport
{
  double observed_auc = 0.0;
  double observed_soft_iou = 0.0;
  double occluded_auc = 0.0;
  double occluded_soft_iou = 0.0;
  double flow_epe = 0.0;
  double ft_auc = 0.0;
  double ft_soft_iou = 0.0;

  static constexpr std::array<const char *, 7> keys{"observed_auc",      "observed_soft_iou",
                                                    "occluded_auc",      "occluded_soft_iou",
                                                    "flow_epe",          "ft_auc",
                                                    "ft_soft_iou"};
  std::array<double, 7> values() const;

  bool operator==(const MetricsReport &) const = default;
};

/// Running per-(scene, step) means. Steps whose ground truth is empty are
/// left out of the corresponding AUC, Soft-IOU and EPE means.
class MetricAccumulator
{
public:
  void add_scene(const PredictionSet & preds, const PredictionSet & gt, const OccupancyGrid & current);
  void merge(const MetricAccumulator & other);
  MetricsReport report() const;

private:
  void add(std::size_t index, double value);
  std::array<double, 7> sum_{};
  std::array<long, 7> count_{};
};

}  // namespace occflow

#endif  // OCCFLOW__METRICS_HPP_
