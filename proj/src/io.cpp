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

#include "occflow/io.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "json.hpp"
#include "occflow/errors.hpp"

namespace occflow
{

using nlohmann::json;

std::string read_file(const std::string & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading '" + path + "'");
  return ss.str();
}

void write_file(const std::string & path, const std::string & contents)
{
  const auto parent = std::filesystem::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty()) std::filesystem::create_directories(parent, ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  out.close();
  if (!out) throw IoError("error writing '" + path + "'");
}

// ------------------------------------------------------------------ scenario

namespace
{

json state_json(const AgentState & s) { return json::array({s.x, s.y, s.vx, s.vy, s.theta, s.valid}); }

AgentState state_from(const json & j)
{
  if (!j.is_array() || j.size() != 6) throw CorruptionError("agent state must be [x, y, vx, vy, theta, valid]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
          j[3].get<double>(), j[4].get<double>(), j[5].get<bool>()};
}

json parse(const std::string & text, const char * what)
{
  try {
    return json::parse(text);
  } catch (const json::parse_error & e) {
    throw CorruptionError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

std::string scenario_to_json(const Scenario & sc)
{
  json j;
  j["format"] = "occflow-scenario";
  j["version"] = kScenarioVersion;
  j["seed"] = sc.seed;
  j["grid"] = {{"height", sc.grid.height}, {"width", sc.grid.width},
               {"meters_per_cell", sc.grid.meters_per_cell}};
  j["timing"] = {{"history_steps", sc.timing.history_steps}, {"future_steps", sc.timing.future_steps},
                 {"history_dt", sc.timing.history_dt}, {"future_dt", sc.timing.future_dt}};
  json agents = json::array();
  for (const auto & a : sc.agents) {
    json states = json::array();
    for (const auto & s : a.states) states.push_back(state_json(s));
    json future = json::array();
    for (const auto & s : a.future_states) future.push_back(state_json(s));
    agents.push_back({{"id", a.agent_id}, {"type", to_string(a.type)}, {"length", a.length},
                      {"width", a.width}, {"observed", a.observed}, {"states", states},
                      {"future", future}});
  }
  j["agents"] = agents;
  json road = json::array();
  for (const auto & p : sc.road) {
    json pts = json::array();
    for (const auto & pt : p.points) pts.push_back({pt[0], pt[1]});
    road.push_back({{"category", to_string(p.category)}, {"light", to_string(p.light)}, {"points", pts}});
  }
  j["road"] = road;
  return j.dump(1);
}

Scenario scenario_from_json(const std::string & text)
{
  const json j = parse(text, "scenario");
  try {
    if (j.at("format").get<std::string>() != "occflow-scenario") {
      throw CorruptionError("not an occflow scenario document");
    }
    const int version = j.at("version").get<int>();
    if (version != kScenarioVersion) {
      throw VersionError("scenario version " + std::to_string(version) + " unsupported (expected " +
                         std::to_string(kScenarioVersion) + ")");
    }
    Scenario sc;
    sc.seed = j.at("seed").get<std::uint64_t>();
    const auto & g = j.at("grid");
    sc.grid = {g.at("height").get<int>(), g.at("width").get<int>(), g.at("meters_per_cell").get<double>()};
    if (j.contains("timing")) {
      const auto & t = j.at("timing");
      sc.timing = {t.at("history_steps").get<int>(), t.at("future_steps").get<int>(),
                   t.at("history_dt").get<double>(), t.at("future_dt").get<double>()};
    }
    for (const auto & a : j.at("agents")) {
      Trajectory tr;
      tr.agent_id = a.at("id").get<int>();
      tr.type = agent_type_from_string(a.at("type").get<std::string>());
      tr.length = a.at("length").get<double>();
      tr.width = a.at("width").get<double>();
      tr.observed = a.at("observed").get<bool>();
      for (const auto & s : a.at("states")) tr.states.push_back(state_from(s));
      if (a.contains("future")) {
        for (const auto & s : a.at("future")) tr.future_states.push_back(state_from(s));
      }
      sc.agents.push_back(std::move(tr));
    }
    for (const auto & p : j.at("road")) {
      Polyline line;
      line.category = road_category_from_string(p.at("category").get<std::string>());
      line.light = traffic_light_from_string(p.value("light", std::string("none")));
      for (const auto & pt : p.at("points")) line.points.push_back({pt.at(0).get<double>(), pt.at(1).get<double>()});
      sc.road.push_back(std::move(line));
    }
    return sc;
  } catch (const json::exception & e) {
    throw CorruptionError(std::string("scenario: ") + e.what());
  } catch (const ConfigError & e) {
    throw CorruptionError(std::string("scenario: ") + e.what());
  }
}

void save_scenario(const Scenario & scenario, const std::string & path)
{
  write_file(path, scenario_to_json(scenario));
}

Scenario load_scenario(const std::string & path) { return scenario_from_json(read_file(path)); }

// -------------------------------------------------------------------- config

std::string config_to_json(const ModelConfig & c)
{
  json j;
  j["grid"] = {{"height", c.grid.height}, {"width", c.grid.width}, {"meters_per_cell", c.grid.meters_per_cell}};
  j["timing"] = {{"history_steps", c.timing.history_steps}, {"future_steps", c.timing.future_steps},
                 {"history_dt", c.timing.history_dt}, {"future_dt", c.timing.future_dt}};
  j["channels"] = c.channels;
  j["max_agents"] = c.max_agents;
  j["window"] = c.window;
  j["stage_heads"] = c.stage_heads;
  j["head_dim"] = c.head_dim;
  j["mlp_ratio"] = c.mlp_ratio;
  j["trajectory_heads"] = c.trajectory_heads;
  j["interaction_heads"] = c.interaction_heads;
  j["cross_heads"] = c.cross_heads;
  j["offset_scale"] = c.offset_scale;
  j["decoder_dims"] = c.decoder_dims;
  j["use_flow_guidance"] = c.use_flow_guidance;
  j["dropout"] = c.dropout;
  j["layer_norm_eps"] = c.layer_norm_eps;
  j["focal_gamma"] = c.focal_gamma;
  j["focal_alpha"] = c.focal_alpha;
  j["weight_obs"] = c.weight_obs;
  j["weight_occ"] = c.weight_occ;
  j["weight_warp"] = c.weight_warp;
  j["weight_focal"] = c.weight_focal;
  j["lr"] = c.lr;
  j["lr_decay"] = c.lr_decay;
  j["lr_decay_every"] = c.lr_decay_every;
  j["epochs"] = c.epochs;
  j["accumulate"] = c.accumulate;
  j["grad_clip"] = c.grad_clip;
  j["occupancy_prior_logit"] = c.occupancy_prior_logit;
  j["seed"] = c.seed;
  return j.dump(2);
}

ModelConfig config_from_json(const std::string & text, const ModelConfig & base)
{
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error & e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be an object");
  ModelConfig c = base;
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string & k = it.key();
      const json & v = it.value();
      if (k == "scale") {
        continue;
      } else if (k == "grid") {
        c.grid.height = v.value("height", c.grid.height);
        c.grid.width = v.value("width", c.grid.width);
        c.grid.meters_per_cell = v.value("meters_per_cell", c.grid.meters_per_cell);
      } else if (k == "timing") {
        c.timing.history_steps = v.value("history_steps", c.timing.history_steps);
        c.timing.future_steps = v.value("future_steps", c.timing.future_steps);
        c.timing.history_dt = v.value("history_dt", c.timing.history_dt);
        c.timing.future_dt = v.value("future_dt", c.timing.future_dt);
      } else if (k == "channels") c.channels = v.get<int>();
      else if (k == "max_agents") c.max_agents = v.get<int>();
      else if (k == "window") c.window = v.get<int>();
      else if (k == "stage_heads") c.stage_heads = v.get<std::array<int, 3>>();
      else if (k == "head_dim") c.head_dim = v.get<int>();
      else if (k == "mlp_ratio") c.mlp_ratio = v.get<int>();
      else if (k == "trajectory_heads") c.trajectory_heads = v.get<int>();
      else if (k == "interaction_heads") c.interaction_heads = v.get<int>();
      else if (k == "cross_heads") c.cross_heads = v.get<int>();
      else if (k == "offset_scale") c.offset_scale = v.get<double>();
      else if (k == "decoder_dims") c.decoder_dims = v.get<std::array<int, 4>>();
      else if (k == "use_flow_guidance") c.use_flow_guidance = v.get<bool>();
      else if (k == "dropout") c.dropout = v.get<double>();
      else if (k == "layer_norm_eps") c.layer_norm_eps = v.get<double>();
      else if (k == "focal_gamma") c.focal_gamma = v.get<double>();
      else if (k == "focal_alpha") c.focal_alpha = v.get<double>();
      else if (k == "weight_obs") c.weight_obs = v.get<double>();
      else if (k == "weight_occ") c.weight_occ = v.get<double>();
      else if (k == "weight_warp") c.weight_warp = v.get<double>();
      else if (k == "weight_focal") c.weight_focal = v.get<double>();
      else if (k == "lr") c.lr = v.get<double>();
      else if (k == "lr_decay") c.lr_decay = v.get<double>();
      else if (k == "lr_decay_every") c.lr_decay_every = v.get<int>();
      else if (k == "epochs") c.epochs = v.get<int>();
      else if (k == "accumulate") c.accumulate = v.get<int>();
      else if (k == "grad_clip") c.grad_clip = v.get<double>();
      else if (k == "occupancy_prior_logit") c.occupancy_prior_logit = v.get<double>();
      else if (k == "seed") c.seed = v.get<std::uint64_t>();
      else throw ConfigError("config: unknown key '" + k + "'");
    }
  } catch (const json::exception & e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.check();
  return c;
}

void save_config(const ModelConfig & config, const std::string & path)
{
  write_file(path, config_to_json(config));
}

ModelConfig load_config(const std::string & path, const ModelConfig & base)
{
  return config_from_json(read_file(path), base);
}

// -------------------------------------------------------------------- report

std::string report_to_json(const MetricsReport & r)
{
  json j = json::object();
  const auto v = r.values();
  for (std::size_t i = 0; i < v.size(); ++i) j[MetricsReport::keys[i]] = v[i];
  return j.dump(2);
}

MetricsReport report_from_json(const std::string & text)
{
  const json j = parse(text, "report");
  if (!j.is_object() || j.size() != MetricsReport::keys.size()) {
    throw CorruptionError("report must hold exactly the seven metric fields");
  }
  std::array<double, 7> v{};
  try {
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = j.at(MetricsReport::keys[i]).get<double>();
  } catch (const json::exception & e) {
    throw CorruptionError(std::string("report: ") + e.what());
  }
  return {v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
}

std::string predictions_to_json(const PredictionSet & preds)
{
  json steps = json::array();
  for (std::size_t k = 0; k < preds.steps(); ++k) {
    steps.push_back({{"step", k + 1},
                     {"height", preds.observed[k].height},
                     {"width", preds.observed[k].width},
                     {"observed", preds.observed[k].data},
                     {"occluded", preds.occluded[k].data},
                     {"flow", preds.flow[k].data}});
  }
  return json{{"format", "occflow-predictions"}, {"steps", steps}}.dump();
}

// ---------------------------------------------------------------- checkpoint

namespace
{

void put_u32(std::string & out, std::uint32_t v)
{
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string & out, std::uint64_t v)
{
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string & out, double d)
{
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof bits);
  put_u64(out, bits);
}

class Reader
{
public:
  explicit Reader(const std::string & data) : data_(data) {}

  std::uint64_t uint(int bytes)
  {
    need(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }
  double f64()
  {
    const std::uint64_t bits = uint(8);
    double d;
    std::memcpy(&d, &bits, sizeof d);
    return d;
  }
  std::string bytes(std::uint64_t n)
  {
    need(n);
    std::string s = data_.substr(pos_, static_cast<std::size_t>(n));
    pos_ += static_cast<std::size_t>(n);
    return s;
  }
  std::size_t remaining() const { return data_.size() - pos_; }

private:
  void need(std::uint64_t n) const
  {
    if (n > data_.size() - pos_) throw CorruptionError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  const std::string & data_;
  std::size_t pos_ = 0;
};

std::string hex(std::uint64_t v)
{
  std::ostringstream ss;
  ss << "0x" << std::hex << std::setw(16) << std::setfill('0') << v;
  return ss.str();
}

}  // namespace

void save_weights(const OccFlowModel & model, const std::string & path)
{
  std::string out(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u64(out, model.config().digest());
  const auto & params = model.parameters().all();
  put_u64(out, params.size());
  for (const auto & p : params) {
    put_u64(out, p.name.size());
    out += p.name;
    const Shape & s = p.tensor.shape();
    put_u64(out, s.size());
    for (std::size_t e : s) put_u64(out, e);
    for (double v : p.tensor.values()) put_f64(out, v);
  }
  write_file(path, out);
}

void load_weights(OccFlowModel & model, const std::string & path)
{
  const std::string data = read_file(path);
  Reader in(data);
  if (data.size() < 4 || std::memcmp(data.data(), kCheckpointMagic, 4) != 0) {
    throw CorruptionError("'" + path + "' is not a checkpoint (bad magic)");
  }
  in.bytes(4);
  const auto version = static_cast<std::uint32_t>(in.uint(4));
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint format version " + std::to_string(version) + " unsupported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint64_t digest = in.uint(8);
  const std::uint64_t expected = model.config().digest();
  if (digest != expected) {
    throw VersionError("checkpoint config digest " + hex(digest) + " does not match model digest " +
                       hex(expected));
  }
  const std::uint64_t count = in.uint(8);
  std::map<std::string, std::pair<Shape, std::vector<double>>> staged;
  for (std::uint64_t t = 0; t < count; ++t) {
    const std::uint64_t name_len = in.uint(8);
    std::string name = in.bytes(name_len);
    const std::uint64_t rank = in.uint(8);
    if (rank > 8) throw CorruptionError("checkpoint tensor '" + name + "' has implausible rank");
    Shape shape;
    std::uint64_t numel = 1;
    for (std::uint64_t r = 0; r < rank; ++r) {
      shape.push_back(static_cast<std::size_t>(in.uint(8)));
      numel *= shape.back();
    }
    if (numel > in.remaining() / 8) throw CorruptionError("checkpoint truncated in tensor '" + name + "'");
    std::vector<double> values(static_cast<std::size_t>(numel));
    for (double & v : values) v = in.f64();
    if (!staged.emplace(std::move(name), std::make_pair(std::move(shape), std::move(values))).second) {
      throw CorruptionError("checkpoint repeats a tensor name");
    }
  }
  if (in.remaining() != 0) throw CorruptionError("checkpoint has trailing bytes");
  auto & params = model.parameters().all();
  if (staged.size() != params.size()) {
    throw CorruptionError("checkpoint holds " + std::to_string(staged.size()) + " tensors, model has " +
                          std::to_string(params.size()));
  }
  for (const auto & p : params) {
    const auto it = staged.find(p.name);
    if (it == staged.end()) throw CorruptionError("checkpoint lacks tensor '" + p.name + "'");
    if (it->second.first != p.tensor.shape()) {
      throw CorruptionError("checkpoint tensor '" + p.name + "' has shape " + shape_str(it->second.first) +
                            ", model expects " + shape_str(p.tensor.shape()));
    }
  }
  for (auto & p : params) {
    const auto & values = staged.at(p.name).second;
    std::copy(values.begin(), values.end(), p.tensor.data().begin());
  }
}

}  // namespace occflow
