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

// Acceptance run: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "occflow/gradcheck.hpp"
#include "occflow/io.hpp"
#include "occflow/pipeline.hpp"
#include "occflow/warp.hpp"

using namespace occflow;

namespace
{

// ------------------------------------------------------------- tolerances

constexpr double kGradTol = 1e-4;
constexpr double kGradSeconds = 300.0;
constexpr double kWarpSeconds = 60.0;
constexpr int kAucCases = 50;
constexpr double kAucTol = 1e-10;
constexpr double kLoopTol = 1e-12;
constexpr double kOracleAuc = 0.999;
constexpr double kOracleFtIou = 0.999;
constexpr double kLossDrop = 0.90;
constexpr double kOverfitAuc = 0.95;
constexpr double kOverfitEpe = 1.0;
constexpr double kOverfitSeconds = 900.0;
constexpr long kOverfitSteps = 500;
constexpr double kAblationSlack = 1.05;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double max_abs_diff_all(const Tensor & a, const Tensor & b)
{
  double m = a.shape() == b.shape() ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < a.numel() && std::isfinite(m); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

int failures = 0;

void report(bool pass, const char * name, const std::string & detail)
{
  std::printf("%s %-22s %s\n", pass ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  failures += pass ? 0 : 1;
}

std::string fmt(const char * f, double a = 0, double b = 0, double c = 0, double d = 0, double e = 0)
{
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a, b, c, d, e);
  return buf;
}

// --------------------------------------------------------------- benchmark

// Overfit benchmark: 4 desk scenes with whole-cell linear motion, all agents
// visible in history.
ModelConfig benchmark_config(bool guided)
{
  ModelConfig cfg = ModelConfig::desk();
  cfg.lr = 1e-3;
  cfg.lr_decay_every = 1000;
  cfg.dropout = 0.0;
  cfg.grad_clip = 10.0;
  cfg.use_flow_guidance = guided;
  return cfg;
}

std::vector<Sample> benchmark_data(const ModelConfig & cfg)
{
  GenSpec spec;
  spec.grid = cfg.grid;
  spec.timing = cfg.timing;
  spec.max_agents = cfg.max_agents;
  spec.n_agents = 4;
  spec.n_occluded = 0;
  spec.motion = Motion::linear;
  spec.integer_motion = true;
  spec.max_speed = 4.0;
  return make_dataset({1, 2, 3, 4}, spec);
}

double dataset_loss(const OccFlowModel & model, const std::vector<Sample> & data)
{
  double total = 0.0;
  for (const auto & s : data) total += sample_loss(model, s, ForwardContext{}).total.item();
  return total / static_cast<double>(data.size());
}

struct OverfitRun
{
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double first_step = 0.0;
  double last_step = 0.0;
  MetricsReport metrics;
  double seconds = 0.0;
};

OverfitRun overfit(OccFlowModel & model, const std::vector<Sample> & data)
{
  OverfitRun r;
  const auto t0 = Clock::now();
  r.initial_loss = dataset_loss(model, data);
  TrainOptions opt;
  opt.max_steps = kOverfitSteps;
  const TrainResult res = train(model, data, opt);
  r.first_step = res.losses.front();
  r.last_step = res.losses.back();
  r.final_loss = dataset_loss(model, data);
  r.metrics = evaluate(model, data);
  r.seconds = seconds_since(t0);
  return r;
}

// ----------------------------------------------------------------- oracles

// out[y,x] = field[y + dy, x + dx] for integer offsets, zero outside.
Tensor index_shift(const Tensor & field, const std::vector<int> & dx, const std::vector<int> & dy)
{
  const int h = static_cast<int>(field.dim(0)), w = static_cast<int>(field.dim(1));
  const std::size_t c = field.dim(2);
  Tensor out(field.shape());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y * w + x);
      const int sy = y + dy[i], sx = x + dx[i];
      if (sy < 0 || sx < 0 || sy >= h || sx >= w) continue;
      for (std::size_t ch = 0; ch < c; ++ch)
        out.data()[i * c + ch] = field.values()[static_cast<std::size_t>(sy * w + sx) * c + ch];
    }
  return out;
}

double simpson(const std::function<double(double)> & f, double a, double b, double fa, double fm, double fb,
               double whole, double tol, int depth)
{
  const double m = 0.5 * (a + b);
  const double lm = f(0.5 * (a + m)), rm = f(0.5 * (m + b));
  const double left = (m - a) / 6 * (fa + 4 * lm + fm), right = (b - m) / 6 * (fm + 4 * rm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15 * tol) return left + right + (left + right - whole) / 15;
  return simpson(f, a, m, fa, lm, fm, left, tol / 2, depth - 1) + simpson(f, m, b, fm, rm, fb, right, tol / 2, depth - 1);
}

// Exhaustive per-threshold counts, precision integrated over recall along
// straight tp/fp segments between neighbouring thresholds.
double auc_oracle(const std::vector<double> & pred, const std::vector<double> & gt)
{
  std::vector<double> thr{-1e-7};
  for (int i = 1; i < 99; ++i) thr.push_back(i / 99.0);
  thr.push_back(1.0 + 1e-7);
  std::vector<double> tp(thr.size()), fp(thr.size());
  double positives = 0;
  for (double g : gt) positives += g > 0.5;
  for (std::size_t j = 0; j < thr.size(); ++j)
    for (std::size_t i = 0; i < pred.size(); ++i)
      if (pred[i] > thr[j]) (gt[i] > 0.5 ? tp[j] : fp[j]) += 1.0;
  double area = 0.0;
  for (std::size_t j = 0; j + 1 < thr.size(); ++j) {
    const double dtp = tp[j] - tp[j + 1], dfp = fp[j] - fp[j + 1];
    if (dtp == 0.0) continue;
    auto precision = [&](double s) {
      const double a = tp[j + 1] + s * dtp, d = a + fp[j + 1] + s * dfp;
      return d > 0.0 ? a / d : dtp / (dtp + dfp);
    };
    const double f0 = precision(0), f1 = precision(1), fm = precision(0.5);
    area += simpson(precision, 0, 1, f0, fm, f1, (f0 + 4 * fm + f1) / 6, 1e-15, 40) * dtp / positives;
  }
  return area;
}

double pearson(const std::vector<double> & a, const std::vector<double> & b)
{
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i] / n;
    mb += b[i] / n;
  }
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return saa > 0 && sbb > 0 ? sab / std::sqrt(saa * sbb) : 0.0;
}

// --------------------------------------------------------------- criteria

void gradient_criterion()
{
  const auto t0 = Clock::now();
  const auto results = gradient_suite(7);
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::string worst_name;
  std::set<std::string> groups;
  for (const auto & r : results) {
    groups.insert(r.name.substr(0, r.name.find('/')));
    if (!(r.error <= worst)) {
      worst = r.error;
      worst_name = r.name;
    }
  }
  const std::set<std::string> required{"msa", "shifted_window_attention", "bilinear_warp", "fg_msa", "loss", "micro_model"};
  const bool covered = std::includes(groups.begin(), groups.end(), required.begin(), required.end());
  report(covered && worst < kGradTol && secs < kGradSeconds, "gradient_suite",
         fmt("%.0f checks, max rel err %.2e (", static_cast<double>(results.size()), worst) + worst_name +
           fmt("), tol %.0e, %.1f s", kGradTol, secs));
}

void warp_criterion()
{
  const auto t0 = Clock::now();
  Rng rng(17);
  Tensor field(Shape{24, 20, 3});
  for (double & v : field.data()) v = rng.uniform(-1, 1);
  const double identity_err = max_abs_diff_all(bilinear_warp(field, mesh_grid(24, 20)), field);

  double shift_err = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> dx(24 * 20), dy(24 * 20);
    Tensor idx = mesh_grid(24, 20);
    for (std::size_t i = 0; i < dx.size(); ++i) {
      dx[i] = static_cast<int>(rng.below(11)) - 5;
      dy[i] = static_cast<int>(rng.below(11)) - 5;
      idx.data()[2 * i] += dx[i];
      idx.data()[2 * i + 1] += dy[i];
    }
    shift_err = std::max(shift_err, max_abs_diff_all(bilinear_warp(field, idx), index_shift(field, dx, dy)));
  }

  // previous occupancy warped by ground-truth flow reproduces the next step
  GenSpec spec;
  spec.n_agents = 5;
  spec.n_occluded = 0;
  spec.motion = Motion::linear;
  spec.integer_motion = true;
  spec.max_speed = 8.0;
  double rigid_err = 0.0;
  long checked = 0;
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const Sample s = make_sample(generate(seed, spec), spec.max_agents);
    for (std::size_t k = 0; k < s.targets.steps(); ++k) {
      const OccupancyGrid & prev = k == 0 ? s.current : s.targets.observed[k - 1];
      const OccupancyGrid & cur = s.targets.observed[k];
      const FlowField & f = s.targets.flow[k];
      const Tensor warped = flow_warp(to_tensor(prev), to_tensor(f));
      for (int r = 0; r < cur.height; ++r)
        for (int c = 0; c < cur.width; ++c) {
          const double sx = c + f.at(r, c, 0), sy = r + f.at(r, c, 1);
          if (sx < 0 || sy < 0 || sx > cur.width - 1 || sy > cur.height - 1) continue;
          const std::size_t i = static_cast<std::size_t>(r * cur.width + c);
          rigid_err = std::max(rigid_err, std::abs(warped.values()[i] * cur.data[i] - cur.data[i]));
          checked += cur.data[i] > 0.5;
        }
    }
  }
  const double secs = seconds_since(t0);
  report(identity_err == 0.0 && shift_err == 0.0 && rigid_err == 0.0 && checked > 0 && secs < kWarpSeconds,
         "warp_oracles",
         fmt("identity err %.1e, integer shift err %.1e, rigid-scene err %.1e over %.0f cells, %.1f s", identity_err,
             shift_err, rigid_err, static_cast<double>(checked), secs));
}

void metric_criterion(const std::vector<Sample> & bench)
{
  Rng rng(23);
  double auc_err = 0.0, iou_err = 0.0, epe_err = 0.0;
  for (int trial = 0; trial < kAucCases; ++trial) {
    std::vector<double> pred(64), gt(64);
    for (std::size_t i = 0; i < 64; ++i) {
      gt[i] = rng.uniform(0, 1) < 0.3 ? 1.0 : 0.0;
      const double u = rng.uniform(0, 1);
      pred[i] = trial % 2 ? std::round(u * 99) / 99.0 : std::clamp(0.5 * gt[i] + 0.7 * u, 0.0, 1.0);
    }
    gt[static_cast<std::size_t>(trial) % 64] = 1.0;
    auc_err = std::max(auc_err, std::abs(auc_pr(pred, gt).value - auc_oracle(pred, gt)));

    long double inter = 0, sp = 0, sg = 0;
    for (std::size_t i = 0; i < 64; ++i) {
      inter += pred[i] * gt[i];
      sp += pred[i];
      sg += gt[i];
    }
    iou_err = std::max(iou_err, std::abs(soft_iou(pred, gt) - static_cast<double>(inter / (sp + sg - inter))));

    FlowField fp(8, 8), fg(8, 8);
    OccupancyGrid mask(8, 8);
    for (double & v : fp.data) v = rng.uniform(-6, 6);
    for (double & v : fg.data) v = rng.uniform(-6, 6);
    for (std::size_t i = 0; i < 64; ++i) mask.data[i] = gt[i];
    double total = 0;
    int n = 0;
    for (int r = 0; r < 8; ++r)
      for (int c = 0; c < 8; ++c)
        if (mask.at(r, c) > 0.5) {
          total += std::sqrt(std::pow(fp.at(r, c, 0) - fg.at(r, c, 0), 2) + std::pow(fp.at(r, c, 1) - fg.at(r, c, 1), 2));
          ++n;
        }
    epe_err = std::max(epe_err, std::abs(epe(fp, fg, mask) - total / n));
  }
  std::vector<PredictionSet> oracle;
  for (const auto & s : bench) oracle.push_back(s.targets);
  const MetricsReport gt = evaluate(oracle, bench);
  const bool pass = auc_err < kAucTol && iou_err < kLoopTol && epe_err < kLoopTol && gt.observed_auc >= kOracleAuc &&
                    gt.flow_epe == 0.0 && gt.ft_soft_iou >= kOracleFtIou;
  report(pass, "metric_oracles",
         fmt("auc err %.1e, soft-iou err %.1e, epe err %.1e; gt-as-pred auc %.4f epe %.1e", auc_err, iou_err, epe_err,
             gt.observed_auc, gt.flow_epe) +
           fmt(" ft-soft-iou %.4f", gt.ft_soft_iou));
}

void structural_criterion()
{
  const ModelConfig cfg = ModelConfig::desk();
  OccFlowModel model(cfg);
  const auto & params = model.parameters().all();
  std::map<std::string, const Parameter *> by_name;
  for (const auto & p : params) by_name[p.name] = &p;

  // one set of 3x3 decoder kernels serves every step
  std::size_t level_params = 0;
  bool level_3x3 = true;
  for (const auto & p : params)
    if (p.name.rfind("decoder.level", 0) == 0) {
      ++level_params;
      if (p.name.find("kernel") != std::string::npos) level_3x3 &= p.tensor.dim(0) == 3 && p.tensor.dim(1) == 3;
    }
  const bool decoder_shared = level_params == 8 && level_3x3 && model.decoder.levels.size() == 4;

  // per-step cross-attention and output projections, each with its own values
  const std::size_t T = static_cast<std::size_t>(cfg.future_steps());
  bool per_step = model.cross.size() == T && model.fg_msa.outputs.size() == T;
  for (std::size_t k = 1; k <= T; ++k) {
    per_step &= by_name.count("cross" + std::to_string(k) + ".attention.q.weight") == 1;
    per_step &= by_name.count("fg_msa.out" + std::to_string(k) + ".weight") == 1;
  }
  for (std::size_t a = 0; a < T && per_step; ++a)
    for (std::size_t b = a + 1; b < T; ++b) {
      per_step &= model.fg_msa.outputs[a].weight.node() != model.fg_msa.outputs[b].weight.node();
      per_step &= model.cross[a].attention.q.weight.node() != model.cross[b].attention.q.weight.node();
    }

  const std::size_t heads[3] = {3, 6, 12};
  bool stage_heads = true;
  for (std::size_t s = 0; s < 3; ++s)
    stage_heads &= model.visual.stages[s].regular.attn.heads() == heads[s] &&
                   model.visual.stages[s].shifted.attn.heads() == heads[s];

  // vector branch keeps width 4C end to end
  const std::size_t D = 4 * static_cast<std::size_t>(cfg.channels);
  GenSpec spec;
  spec.n_agents = 5;
  const Sample s = make_sample(generate(3, spec), cfg.max_agents);
  const Tensor tokens = model.trajectory(s.inputs.agents, ForwardContext{});
  const std::vector<bool> valid(s.inputs.agents.size(), true);
  const Tensor inter = model.interaction(tokens, valid, ForwardContext{});
  const bool dims = tokens.dim(1) == D && inter.dim(1) == D && model.trajectory.head.out_features() == D &&
                    model.cross[0].attention.k.in_features() == D;

  report(decoder_shared && per_step && stage_heads && dims, "structural_audits",
         fmt("decoder shared %.0f, per-step modules %.0f, heads [3,6,12] %.0f, vector width %.0f == 4C %.0f",
             decoder_shared, per_step, stage_heads, static_cast<double>(tokens.dim(1)), static_cast<double>(D)));
}

void determinism_criterion(const OccFlowModel & trained, const std::vector<Sample> & bench)
{
  // short seeded runs with dropout, twice
  ModelConfig cfg = ModelConfig::desk();
  cfg.dropout = 0.1;
  cfg.lr = 1e-3;
  std::vector<Sample> data(bench.begin(), bench.begin() + 2);
  TrainOptions opt;
  opt.max_steps = 4;
  OccFlowModel a(cfg), b(cfg);
  const TrainResult ra = train(a, data, opt), rb = train(b, data, opt);
  bool same = ra.losses == rb.losses;
  for (std::size_t i = 0; i < a.parameters().all().size(); ++i) {
    const auto va = a.parameters().all()[i].tensor.values(), vb = b.parameters().all()[i].tensor.values();
    same &= std::memcmp(va.data(), vb.data(), va.size() * sizeof(double)) == 0;
  }
  const auto regenerated = benchmark_data(cfg);
  for (std::size_t i = 0; i < bench.size(); ++i) {
    same &= regenerated[i].targets.flow == bench[i].targets.flow;
    same &= regenerated[i].targets.observed == bench[i].targets.observed;
  }

  const auto path = std::filesystem::temp_directory_path() / "occflow_acceptance.ofk";
  save_weights(trained, path.string());
  OccFlowModel reloaded(trained.config());
  load_weights(reloaded, path.string());
  std::filesystem::remove(path);
  const MetricsReport before = evaluate(trained, bench), after = evaluate(reloaded, bench);
  const bool round_trip = before == after;
  report(same && round_trip, "determinism_serdes",
         fmt("same-seed runs identical %.0f, checkpoint round-trip metrics identical %.0f (epe %.6f)", same,
             round_trip, after.flow_epe));
}

}  // namespace

int main()
{
  std::printf("acceptance: desk config, %ld-step overfit benchmark on 4 scenes\n", kOverfitSteps);
  gradient_criterion();
  warp_criterion();

  const ModelConfig full_cfg = benchmark_config(true);
  const auto bench = benchmark_data(full_cfg);
  metric_criterion(bench);

  OccFlowModel full(full_cfg);
  const OverfitRun run = overfit(full, bench);
  const double drop = 1.0 - run.final_loss / run.initial_loss;
  report(drop >= kLossDrop && run.metrics.observed_auc >= kOverfitAuc && run.metrics.flow_epe <= kOverfitEpe &&
           run.seconds < kOverfitSeconds,
         "overfit",
         fmt("train-set loss %.2f -> %.3f (drop %.1f%%), observed auc %.4f, epe %.3f", run.initial_loss, run.final_loss,
             100 * drop, run.metrics.observed_auc, run.metrics.flow_epe) +
           fmt(", step loss %.2f -> %.3f, %.0f s", run.first_step, run.last_step, run.seconds));

  OccFlowModel ablated(benchmark_config(false));
  const OverfitRun abl = overfit(ablated, bench);
  report(run.metrics.flow_epe <= kAblationSlack * abl.metrics.flow_epe, "fgmsa_ablation",
         fmt("epe full %.3f vs plain msa %.3f (limit %.3f), %.0f s", run.metrics.flow_epe, abl.metrics.flow_epe,
             kAblationSlack * abl.metrics.flow_epe, abl.seconds));

  // per (scene, step, axis): mean offset over the feature map against mean
  // ground-truth backward flow over occupied cells
  std::vector<double> offs, flows;
  double largest = 0.0;
  for (const auto & s : bench) {
    const ModelOutput out = full.forward(s.inputs, ForwardContext{});
    for (std::size_t k = 0; k < out.offsets.size(); ++k) {
      const auto o = out.offsets[k].values();
      const auto & g = s.targets;
      for (std::size_t axis = 0; axis < 2; ++axis) {
        double mo = 0, mf = 0;
        long n = 0;
        for (std::size_t i = axis; i < o.size(); i += 2) mo += o[i];
        mo /= static_cast<double>(o.size() / 2);
        for (std::size_t i = 0; i < g.observed[k].data.size(); ++i)
          if (g.observed[k].data[i] > 0.5 || g.occluded[k].data[i] > 0.5) {
            mf += g.flow[k].data[2 * i + axis];
            ++n;
          }
        if (n == 0) continue;
        offs.push_back(mo);
        flows.push_back(mf / static_cast<double>(n));
        largest = std::max(largest, std::abs(mo));
      }
    }
  }
  const double r = pearson(offs, flows);
  report(r > 0.0, "offset_flow_pearson",
         fmt("r = %.4f over %.0f (scene, step, axis) pairs, max |mean offset| %.2e", r, static_cast<double>(offs.size()),
             largest));

  structural_criterion();
  determinism_criterion(full, bench);

  std::printf("%d criteria failed\n", failures);
  return failures;
}
