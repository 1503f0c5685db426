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

#include "occflow/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "occflow/errors.hpp"
#include "occflow/warp.hpp"

namespace occflow
{

namespace
{

std::vector<double> flatten(const std::vector<OccupancyGrid> & grids)
{
  std::vector<double> out;
  for (const auto & g : grids) out.insert(out.end(), g.data.begin(), g.data.end());
  return out;
}

void check_sizes(std::size_t a, std::size_t b, const char * what)
{
  if (a != b) {
    throw DimensionError(std::string(what) + ": " + std::to_string(a) + " predictions vs " +
                         std::to_string(b) + " ground-truth cells");
  }
}

bool has_positive(const OccupancyGrid & g)
{
  return std::any_of(g.data.begin(), g.data.end(), [](double v) { return v > 0.5; });
}

}  // namespace

std::array<double, kAucThresholds> auc_thresholds()
{
  std::array<double, kAucThresholds> t{};
  constexpr double eps = 1e-7;
  for (int i = 1; i < kAucThresholds - 1; ++i) t[i] = static_cast<double>(i) / (kAucThresholds - 1);
  t.front() = -eps;
  t.back() = 1.0 + eps;
  return t;
}

AucResult auc_pr(std::span<const double> pred, std::span<const double> gt)
{
  check_sizes(pred.size(), gt.size(), "auc_pr");
  const auto thr = auc_thresholds();
  // bucket b holds predictions exceeding exactly the first b thresholds.
  std::array<double, kAucThresholds + 1> pos{}, neg{};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto b = static_cast<std::size_t>(std::lower_bound(thr.begin(), thr.end(), pred[i]) - thr.begin());
    (gt[i] > 0.5 ? pos : neg)[b] += 1.0;
  }
  std::array<double, kAucThresholds> tp{}, fp{};
  double run_p = 0.0, run_n = 0.0;
  for (int i = kAucThresholds - 1; i >= 0; --i) {
    run_p += pos[static_cast<std::size_t>(i) + 1];
    run_n += neg[static_cast<std::size_t>(i) + 1];
    tp[static_cast<std::size_t>(i)] = run_p;
    fp[static_cast<std::size_t>(i)] = run_n;
  }
  double total_pos = 0.0;
  for (double v : pos) total_pos += v;
  if (total_pos == 0.0) return {0.0, true};

  double area = 0.0;
  for (std::size_t i = 0; i + 1 < kAucThresholds; ++i) {
    const double dtp = tp[i] - tp[i + 1];
    const double p0 = tp[i] + fp[i];
    const double p1 = tp[i + 1] + fp[i + 1];
    const double dp = p0 - p1;
    const double slope = dp > 0.0 ? dtp / dp : 0.0;
    const double intercept = tp[i + 1] - slope * p1;
    const double ratio = (p0 > 0.0 && p1 > 0.0) ? p0 / p1 : 1.0;
    area += slope * (dtp + intercept * std::log(ratio)) / total_pos;
  }
  return {area, false};
}

AucResult auc_pr(const std::vector<OccupancyGrid> & pred, const std::vector<OccupancyGrid> & gt)
{
  const auto p = flatten(pred);
  const auto g = flatten(gt);
  return auc_pr(p, g);
}

double soft_iou(std::span<const double> pred, std::span<const double> gt)
{
  check_sizes(pred.size(), gt.size(), "soft_iou");
  double inter = 0.0, sp = 0.0, sg = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    inter += pred[i] * gt[i];
    sp += pred[i];
    sg += gt[i];
  }
  const double denom = sp + sg - inter;
  return denom > 0.0 ? inter / denom : 0.0;
}

double soft_iou(const std::vector<OccupancyGrid> & pred, const std::vector<OccupancyGrid> & gt)
{
  const auto p = flatten(pred);
  const auto g = flatten(gt);
  return soft_iou(p, g);
}

double epe(const FlowField & pred, const FlowField & gt, const OccupancyGrid & mask)
{
  check_sizes(pred.data.size(), gt.data.size(), "epe");
  check_sizes(mask.data.size() * 2, gt.data.size(), "epe mask");
  double total = 0.0;
  long n = 0;
  for (std::size_t i = 0; i < mask.data.size(); ++i) {
    if (mask.data[i] <= 0.5) continue;
    const double dx = pred.data[2 * i] - gt.data[2 * i];
    const double dy = pred.data[2 * i + 1] - gt.data[2 * i + 1];
    total += std::hypot(dx, dy);
    ++n;
  }
  return n > 0 ? total / static_cast<double>(n) : 0.0;
}

double epe(const FlowField & pred, const FlowField & gt, const OccupancyGrid & observed,
           const OccupancyGrid & occluded)
{
  OccupancyGrid mask = observed;
  for (std::size_t i = 0; i < mask.data.size(); ++i) {
    mask.data[i] = std::max(observed.data[i], occluded.data[i]);
  }
  return epe(pred, gt, mask);
}

FlowTracedMetrics ft_metrics(const PredictionSet & preds, const OccupancyGrid & current,
                             const PredictionSet & gt)
{
  check_sizes(preds.steps(), gt.steps(), "ft_metrics steps");
  const auto traced = flow_trace(current, preds);
  FlowTracedMetrics out;
  int auc_steps = 0;
  int iou_steps = 0;
  for (std::size_t k = 0; k < traced.size(); ++k) {
    const AucResult a = auc_pr(traced[k].data, gt.observed[k].data);
    if (!a.degenerate) {
      out.auc += a.value;
      ++auc_steps;
    }
    if (has_positive(gt.observed[k])) {
      out.soft_iou += soft_iou(traced[k].data, gt.observed[k].data);
      ++iou_steps;
    }
  }
  if (auc_steps) out.auc /= auc_steps;
  if (iou_steps) out.soft_iou /= iou_steps;
  return out;
}

std::array<double, 7> MetricsReport::values() const
{
  return {observed_auc, observed_soft_iou, occluded_auc, occluded_soft_iou,
          flow_epe,     ft_auc,            ft_soft_iou};
}

void MetricAccumulator::add(std::size_t index, double value)
{
  sum_[index] += value;
  ++count_[index];
}

void MetricAccumulator::add_scene(const PredictionSet & preds, const PredictionSet & gt,
                                  const OccupancyGrid & current)
{
  check_sizes(preds.steps(), gt.steps(), "metrics steps");
  const auto traced = flow_trace(current, preds);
  for (std::size_t k = 0; k < gt.steps(); ++k) {
    const auto & go = gt.observed[k];
    const auto & gc = gt.occluded[k];
    if (has_positive(go)) {
      add(0, auc_pr(preds.observed[k].data, go.data).value);
      add(1, soft_iou(preds.observed[k].data, go.data));
      add(5, auc_pr(traced[k].data, go.data).value);
      add(6, soft_iou(traced[k].data, go.data));
    }
    if (has_positive(gc)) {
      add(2, auc_pr(preds.occluded[k].data, gc.data).value);
      add(3, soft_iou(preds.occluded[k].data, gc.data));
    }
    if (has_positive(go) || has_positive(gc)) add(4, epe(preds.flow[k], gt.flow[k], go, gc));
  }
}

void MetricAccumulator::merge(const MetricAccumulator & other)
{
  for (std::size_t i = 0; i < 7; ++i) {
    sum_[i] += other.sum_[i];
    count_[i] += other.count_[i];
  }
}

MetricsReport MetricAccumulator::report() const
{
  std::array<double, 7> m{};
  for (std::size_t i = 0; i < 7; ++i) m[i] = count_[i] ? sum_[i] / static_cast<double>(count_[i]) : 0.0;
  return {m[0], m[1], m[2], m[3], m[4], m[5], m[6]};
}

}  // namespace occflow
