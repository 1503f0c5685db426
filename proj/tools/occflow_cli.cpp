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

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "occflow/errors.hpp"
#include "occflow/gradcheck.hpp"
#include "occflow/io.hpp"
#include "occflow/pipeline.hpp"
#include "occflow/render.hpp"
#include "occflow/scenario_gen.hpp"

namespace fs = std::filesystem;
using namespace occflow;

namespace
{

struct Common
{
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  std::string scale = "desk";
};

ModelConfig resolve_config(const Common & c, const std::string & fallback_dir = {})
{
  const ModelConfig base = c.scale == "paper" ? ModelConfig::paper() : ModelConfig::desk();
  ModelConfig cfg = base;
  if (!c.config.empty()) {
    cfg = load_config(c.config, base);
  } else if (!fallback_dir.empty() && fs::exists(fs::path(fallback_dir) / "config.json")) {
    cfg = load_config((fs::path(fallback_dir) / "config.json").string(), base);
  }
  if (c.seed_set) cfg.seed = c.seed;
  cfg.check();
  return cfg;
}

std::vector<std::string> scenario_files(const std::string & dir)
{
  if (!fs::is_directory(dir)) throw IoError("'" + dir + "' is not a directory");
  std::vector<std::string> files;
  for (const auto & e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json" && e.path().filename() != "config.json") {
      files.push_back(e.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no scenario files in '" + dir + "'");
  return files;
}

std::vector<Sample> load_dataset(const std::string & dir, const ModelConfig & cfg)
{
  std::vector<Sample> data;
  for (const auto & f : scenario_files(dir)) {
    const Scenario sc = load_scenario(f);
    const auto violations = validate(sc);
    if (!violations.empty()) throw ContractError(f + ": " + violations.front().message);
    if (!(sc.grid == cfg.grid) || !(sc.timing == cfg.timing)) {
      throw ConfigError(f + ": grid or timing differ from the model configuration");
    }
    data.push_back(make_sample(sc, cfg.max_agents));
  }
  return data;
}

void add_common(CLI::App * cmd, Common & c)
{
  cmd->add_option("--config", c.config, "Model configuration (JSON)");
  cmd->add_option_function<std::uint64_t>(
    "--seed", [&c](const std::uint64_t & s) { c.seed = s; c.seed_set = true; }, "Seed");
  cmd->add_option("--out", c.out, "Output directory or file");
  cmd->add_option("--scale", c.scale, "Preset scale")->check(CLI::IsMember({"desk", "paper"}));
}

int run_gen(const Common & c, int count, int agents, int occluded, const std::string & motion,
            const std::string & layout, bool integer_motion)
{
  if (c.out.empty()) throw ConfigError("gen: --out is required");
  const ModelConfig cfg = resolve_config(c);
  GenSpec spec;
  spec.grid = cfg.grid;
  spec.timing = cfg.timing;
  spec.max_agents = cfg.max_agents;
  spec.n_agents = agents;
  spec.n_occluded = occluded;
  spec.motion = motion_from_string(motion);
  spec.road_layout = road_layout_from_string(layout);
  spec.integer_motion = integer_motion;
  for (int i = 0; i < count; ++i) {
    const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(i);
    const Scenario sc = generate(seed, spec);
    char name[64];
    std::snprintf(name, sizeof name, "scenario_%06llu.json", static_cast<unsigned long long>(seed));
    const std::string path = (fs::path(c.out) / name).string();
    save_scenario(sc, path);
    std::cout << path << "\n";
  }
  return 0;
}

int run_train(const Common & c, const std::string & data_dir, long steps, int epochs)
{
  if (c.out.empty()) throw ConfigError("train: --out is required");
  ModelConfig cfg = resolve_config(c);
  if (epochs > 0) cfg.epochs = epochs;
  const auto data = load_dataset(data_dir, cfg);
  OccFlowModel model(cfg);
  fs::create_directories(c.out);
  save_config(cfg, (fs::path(c.out) / "config.json").string());
  std::ofstream log((fs::path(c.out) / "loss.csv").string());
  if (!log) throw IoError("cannot write loss log in '" + c.out + "'");
  log << "step,epoch,loss\n";
  TrainOptions opt;
  opt.max_steps = steps;
  opt.checkpoint_dir = c.out;
  opt.on_step = [&log](long step, int epoch, double loss) {
    log << step << "," << epoch << "," << loss << "\n";
    std::cout << "step " << step << " epoch " << epoch << " loss " << loss << "\n";
  };
  const TrainResult res = train(model, data, opt);
  save_weights(model, (fs::path(c.out) / "final.ofk").string());
  std::cout << "trained " << res.losses.size() << " steps over " << res.epochs << " epochs\n";
  return 0;
}

std::unique_ptr<OccFlowModel> load_model(const Common & c, const std::string & checkpoint)
{
  const ModelConfig cfg = resolve_config(c, fs::path(checkpoint).parent_path().string());
  auto model = std::make_unique<OccFlowModel>(cfg);
  load_weights(*model, checkpoint);
  return model;
}

int run_eval(const Common & c, const std::string & checkpoint, const std::string & data_dir)
{
  const auto model = load_model(c, checkpoint);
  const auto data = load_dataset(data_dir, model->config());
  const MetricsReport report = evaluate(*model, data, worker_threads());
  const std::string text = report_to_json(report);
  if (!c.out.empty()) write_file(c.out, text + "\n");
  std::cout << text << "\n";
  return 0;
}

int run_predict(const Common & c, const std::string & checkpoint, const std::string & scenario)
{
  if (c.out.empty()) throw ConfigError("predict: --out is required");
  const auto model = load_model(c, checkpoint);
  const Sample s = make_sample(load_scenario(scenario), model->config().max_agents);
  const PredictionSet preds = model->predict(s.inputs);
  write_file((fs::path(c.out) / "predictions.json").string(), predictions_to_json(preds));
  render_predictions(preds, s.inputs.road, s.current, c.out, "pred_");
  std::cout << "wrote predictions for " << preds.steps() << " steps to " << c.out << "\n";
  return 0;
}

int run_render(const Common & c, const std::string & scenario, const std::string & checkpoint)
{
  if (c.out.empty()) throw ConfigError("render: --out is required");
  const Scenario sc = load_scenario(scenario);
  const auto violations = validate(sc);
  if (!violations.empty()) throw ContractError(scenario + ": " + violations.front().message);
  const Sample s = make_sample(sc, 64);
  auto paths = render_predictions(s.targets, s.inputs.road, s.current, c.out, "gt_");
  if (!checkpoint.empty()) {
    const auto model = load_model(c, checkpoint);
    const PredictionSet preds = model->predict(make_sample(sc, model->config().max_agents).inputs);
    const auto more = render_predictions(preds, s.inputs.road, s.current, c.out, "pred_");
    paths.insert(paths.end(), more.begin(), more.end());
  }
  for (const auto & p : paths) std::cout << p << "\n";
  return 0;
}

int run_gradcheck(std::uint64_t seed)
{
  bool ok = true;
  for (const auto & r : gradient_suite(seed)) {
    const bool pass = r.error < kGradTolerance;
    ok = ok && pass;
    std::printf("%-60s %.3e %s\n", r.name.c_str(), r.error, pass ? "ok" : "FAIL");
  }
  return ok ? 0 : 1;
}

int run_selftest(const Common & c)
{
  const ModelConfig cfg = resolve_config(c);
  GenSpec spec;
  spec.grid = cfg.grid;
  spec.timing = cfg.timing;
  spec.max_agents = cfg.max_agents;
  spec.integer_motion = true;
  spec.motion = Motion::linear;
  const auto data = make_dataset({c.seed, c.seed + 1}, spec, worker_threads());
  bool ok = true;
  auto check = [&ok](bool cond, const std::string & what) {
    std::cout << (cond ? "ok   " : "FAIL ") << what << "\n";
    ok = ok && cond;
  };
  for (const auto & s : data) {
    check(validate(s.scenario).empty() && validate(s.targets, s.scenario.grid).empty(), "scenario validates");
  }
  std::vector<PredictionSet> oracle;
  for (const auto & s : data) oracle.push_back(s.targets);
  const MetricsReport gt = evaluate(oracle, data);
  check(gt.observed_auc >= 0.999 && gt.flow_epe == 0.0, "ground truth scores as a perfect predictor");
  OccFlowModel model(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const PredictionSet a = model.predict(data[0].inputs);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const PredictionSet b = model.predict(data[0].inputs);
  check(a.observed == b.observed && a.flow == b.flow, "eval forward is deterministic");
  std::cout << "forward " << secs << " s\n";
  const fs::path tmp = fs::temp_directory_path() / ("occflow_selftest_" + std::to_string(c.seed) + ".ofk");
  save_weights(model, tmp.string());
  OccFlowModel other(cfg);
  load_weights(other, tmp.string());
  fs::remove(tmp);
  const PredictionSet d = other.predict(data[0].inputs);
  check(a.observed == d.observed && a.flow == d.flow, "checkpoint round trip");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Occupancy and flow field prediction"};
  app.require_subcommand(1);
  Common common;

  auto * gen = app.add_subcommand("gen", "Generate synthetic scenarios");
  add_common(gen, common);
  int count = 1, agents = 4, occluded = 1;
  std::string motion = "mixed", layout = "cross";
  bool integer_motion = false;
  gen->add_option("--count", count, "Number of scenarios")->check(CLI::PositiveNumber);
  gen->add_option("--agents", agents, "Agents per scenario");
  gen->add_option("--occluded", occluded, "Occluded agents per scenario");
  gen->add_option("--motion", motion, "static, linear, turning or mixed");
  gen->add_option("--layout", layout, "straight, cross or t-junction");
  gen->add_flag("--integer-motion", integer_motion, "Axis-aligned whole-cell motion");

  auto * tr = app.add_subcommand("train", "Train a model");
  add_common(tr, common);
  std::string data_dir;
  long steps = 0;
  int epochs = 0;
  tr->add_option("--data", data_dir, "Directory of scenario files")->required();
  tr->add_option("--steps", steps, "Optimizer step budget");
  tr->add_option("--epochs", epochs, "Epoch count override");

  auto * ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(ev, common);
  std::string checkpoint;
  ev->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  ev->add_option("--data", data_dir, "Directory of scenario files")->required();

  auto * pr = app.add_subcommand("predict", "Predict one scenario");
  add_common(pr, common);
  std::string scenario;
  pr->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  pr->add_option("--scenario", scenario, "Scenario file")->required();

  auto * rd = app.add_subcommand("render", "Render ground truth (and predictions)");
  add_common(rd, common);
  rd->add_option("--scenario", scenario, "Scenario file")->required();
  rd->add_option("--checkpoint", checkpoint, "Optional checkpoint for predictions");

  auto * gc = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  add_common(gc, common);

  auto * st = app.add_subcommand("selftest", "Quick end-to-end consistency checks");
  add_common(st, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*gen) return run_gen(common, count, agents, occluded, motion, layout, integer_motion);
    if (*tr) return run_train(common, data_dir, steps, epochs);
    if (*ev) return run_eval(common, checkpoint, data_dir);
    if (*pr) return run_predict(common, checkpoint, scenario);
    if (*rd) return run_render(common, scenario, checkpoint);
    if (*gc) return run_gradcheck(common.seed_set ? common.seed : 7);
    if (*st) return run_selftest(common);
  } catch (const IoError & e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const CorruptionError & e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error & e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
