#include "sgraph/harness.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "sgraph/error.hpp"
#include "sgraph/text.hpp"

namespace sgraph {

namespace {

using json = nlohmann::ordered_json;

struct Key {
  std::string name;
  std::function<void(HarnessConfig&, std::string_view)> set;
  std::function<std::string(const HarnessConfig&)> get;
};

int to_int(std::string_view v, const std::string& name) {
  const std::int64_t x = text::parse_int(v, name);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
    throw Error(ErrorCode::ParseError, name + " is out of range");
  }
  return static_cast<int>(x);
}

std::vector<Key> make_keys() {
  std::vector<Key> keys;
  auto real = [&](const std::string& name, std::function<double&(HarnessConfig&)> ref) {
    keys.push_back({name, [=](HarnessConfig& c, std::string_view v) { ref(c) = text::parse_double(v, name); },
                    [=](const HarnessConfig& c) { return text::format_double(ref(const_cast<HarnessConfig&>(c))); }});
  };
  auto integer = [&](const std::string& name, std::function<int&(HarnessConfig&)> ref) {
    keys.push_back({name, [=](HarnessConfig& c, std::string_view v) { ref(c) = to_int(v, name); },
                    [=](const HarnessConfig& c) { return std::to_string(ref(const_cast<HarnessConfig&>(c))); }});
  };

  keys.push_back({"seed", [](HarnessConfig& c, std::string_view v) { c.world.seed = text::parse_uint(v, "seed"); },
                  [](const HarnessConfig& c) { return std::to_string(c.world.seed); }});
  integer("rows", [](HarnessConfig& c) -> int& { return c.world.rows; });
  integer("cols", [](HarnessConfig& c) -> int& { return c.world.cols; });
  real("room_size_min", [](HarnessConfig& c) -> double& { return c.world.room_size_min; });
  real("room_size_max", [](HarnessConfig& c) -> double& { return c.world.room_size_max; });
  real("corridor_width", [](HarnessConfig& c) -> double& { return c.world.corridor_width; });
  real("cell_size", [](HarnessConfig& c) -> double& { return c.world.cell_size; });
  real("spacing", [](HarnessConfig& c) -> double& { return c.world.spacing; });
  const char* odom_names[6] = {"odometry_sigma_rx", "odometry_sigma_ry", "odometry_sigma_rz",
                               "odometry_sigma_tx", "odometry_sigma_ty", "odometry_sigma_tz"};
  for (int i = 0; i < 6; ++i) {
    real(odom_names[i], [i](HarnessConfig& c) -> double& { return c.world.odometry_sigma[i]; });
  }
  keys.push_back({"odometry_sigma_rot",
                  [](HarnessConfig& c, std::string_view v) {
                    c.world.odometry_sigma.head<3>().setConstant(text::parse_double(v, "odometry_sigma_rot"));
                  },
                  nullptr});
  keys.push_back({"odometry_sigma_trans",
                  [](HarnessConfig& c, std::string_view v) {
                    c.world.odometry_sigma.tail<3>().setConstant(text::parse_double(v, "odometry_sigma_trans"));
                  },
                  nullptr});
  real("plane_sigma_n1", [](HarnessConfig& c) -> double& { return c.world.plane_sigma[0]; });
  real("plane_sigma_n2", [](HarnessConfig& c) -> double& { return c.world.plane_sigma[1]; });
  real("plane_sigma_d", [](HarnessConfig& c) -> double& { return c.world.plane_sigma[2]; });
  keys.push_back({"plane_sigma",
                  [](HarnessConfig& c, std::string_view v) {
                    c.world.plane_sigma.setConstant(text::parse_double(v, "plane_sigma"));
                  },
                  nullptr});
  real("plane_range", [](HarnessConfig& c) -> double& { return c.world.plane_range; });
  real("revisit_radius", [](HarnessConfig& c) -> double& { return c.world.revisit_radius; });
  integer("laps", [](HarnessConfig& c) -> int& { return c.world.laps; });
  real("room_loop_standoff", [](HarnessConfig& c) -> double& { return c.world.room_loop_standoff; });
  real("center_jitter", [](HarnessConfig& c) -> double& { return c.world.center_jitter; });
  integer("loop_min_age", [](HarnessConfig& c) -> int& { return c.world.loop_min_age; });
  integer("loop_min_gap", [](HarnessConfig& c) -> int& { return c.world.loop_min_gap; });

  integer("window_size", [](HarnessConfig& c) -> int& { return c.backend.window_size; });
  integer("local_trigger_every", [](HarnessConfig& c) -> int& { return c.backend.local_trigger_every; });
  keys.push_back({"mode", [](HarnessConfig& c, std::string_view v) { c.backend.mode = parse_mode(std::string(v)); },
                  [](const HarnessConfig& c) { return to_string(c.backend.mode); }});
  keys.push_back({"reconnection_measurement_source",
                  [](HarnessConfig& c, std::string_view v) {
                    if (v == "estimates") {
                      c.backend.reconnection_source = ReconnectionSource::Estimates;
                    } else if (v == "composed_odometry") {
                      c.backend.reconnection_source = ReconnectionSource::ComposedOdometry;
                    } else {
                      throw Error(ErrorCode::ParseError, "expected 'estimates' or 'composed_odometry'");
                    }
                  },
                  [](const HarnessConfig& c) {
                    return std::string(c.backend.reconnection_source == ReconnectionSource::Estimates
                                           ? "estimates"
                                           : "composed_odometry");
                  }});
  real("room_information", [](HarnessConfig& c) -> double& { return c.backend.room_information; });
  real("floor_information", [](HarnessConfig& c) -> double& { return c.backend.floor_information; });
  integer("timing_repeats", [](HarnessConfig& c) -> int& { return c.backend.timing_repeats; });

  using Stage = OptimizeConfig BackendConfig::*;
  const std::pair<std::string, Stage> stages[3] = {
      {"local.", &BackendConfig::local}, {"global.", &BackendConfig::global}, {"room_local.", &BackendConfig::room_local}};
  for (const auto& [prefix, member] : stages) {
    const Stage m = member;
    integer(prefix + "max_iterations", [m](HarnessConfig& c) -> int& { return (c.backend.*m).max_iterations; });
    real(prefix + "initial_lambda", [m](HarnessConfig& c) -> double& { return (c.backend.*m).initial_lambda; });
    real(prefix + "lambda_up", [m](HarnessConfig& c) -> double& { return (c.backend.*m).lambda_up; });
    real(prefix + "lambda_down", [m](HarnessConfig& c) -> double& { return (c.backend.*m).lambda_down; });
    real(prefix + "convergence_tol", [m](HarnessConfig& c) -> double& { return (c.backend.*m).convergence_tol; });
    real(prefix + "step_tol", [m](HarnessConfig& c) -> double& { return (c.backend.*m).step_tol; });
  }
  return keys;
}

const std::vector<Key>& key_table() {
  static const std::vector<Key> keys = make_keys();
  return keys;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

Trajectory from_graph(const SGraph& g, bool include_marginalized) {
  Trajectory t;
  for (const auto& [i, k] : g.keyframes()) {
    if (include_marginalized || !k.marginalized) t.push_back({k.stamp, k.pose});
  }
  return t;
}

json stage_json(const PipelineResult& r) {
  json j = json::object();
  for (const auto& [stage, s] : r.stage_summary()) {
    j[stage] = {{"count", s.count}, {"mean_time_ms", s.mean_ms}, {"max_time_ms", s.max_ms},
                {"total_time_ms", s.total_ms}};
  }
  return j;
}

json ate_json(const std::optional<AteResult>& a) {
  if (!a) return nullptr;
  return {{"rmse", a->rmse}, {"mean", a->mean}, {"median", a->median}, {"max", a->max}, {"num_poses", a->num_poses}};
}

json mode_json(const PipelineResult& r) {
  json j;
  j["mode"] = to_string(r.mode);
  j["ate_active"] = ate_json(r.ate_active);
  j["ate_all_keyframes"] = ate_json(r.ate_all);
  j["keyframes_total"] = r.graph.keyframes().size();
  j["keyframes_marginalized"] = r.marginalized_count();
  j["factors"] = r.graph.factor_count();
  j["vertices"] = r.graph.vertex_count();
  j["rooms_detected"] = r.counters.rooms_detected;
  j["loop_closures_added"] = r.counters.loop_closures_added;
  j["loop_closures_retargeted"] = r.counters.loop_closures_retargeted;
  int global_count = 0;
  long free_sum = 0;
  double chi2_final = 0.0;
  for (const StageRecord& s : r.records) {
    if (s.stage != "global") continue;
    ++global_count;
    free_sum += s.stats.num_free_vertices;
    chi2_final = s.stats.chi2_final;
  }
  j["global_optimizations"] = global_count;
  j["global_free_vertices_mean"] = global_count ? static_cast<double>(free_sum) / global_count : 0.0;
  j["last_global_chi2_final"] = chi2_final;
  j["stages"] = stage_json(r);
  const auto summary = r.stage_summary();
  const auto g = summary.find("global");
  j["global_mean_time_ms"] = g == summary.end() ? 0.0 : g->second.mean_ms;
  return j;
}

std::string pct(double v) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(2);
  s << v;
  return s.str();
}

}  // namespace

HarnessConfig parse_config(const std::string& contents, HarnessConfig cfg) {
  std::map<std::string, const Key*> index;
  for (const Key& k : key_table()) index[k.name] = &k;
  static const char* shared[] = {"max_iterations", "initial_lambda", "lambda_up",
                                 "lambda_down",    "convergence_tol", "step_tol"};

  std::istringstream in(contents);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    const std::string body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    try {
      const auto eq = body.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::ParseError, "expected key = value");
      const std::string key = trim(std::string_view(body).substr(0, eq));
      const std::string value = trim(std::string_view(body).substr(eq + 1));
      if (value.empty()) throw Error(ErrorCode::ParseError, "missing value for '" + key + "'");
      if (std::find(std::begin(shared), std::end(shared), key) != std::end(shared)) {
        for (const char* prefix : {"local.", "global.", "room_local."}) index.at(prefix + key)->set(cfg, value);
        continue;
      }
      const auto it = index.find(key);
      if (it == index.end()) throw Error(ErrorCode::ParseError, "unknown key '" + key + "'");
      it->second->set(cfg, value);
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(number) + ": " + e.detail());
    }
  }
  return cfg;
}

std::string describe_config(const HarnessConfig& cfg) {
  std::string out;
  for (const Key& k : key_table()) {
    if (k.get) out += k.name + " = " + k.get(cfg) + "\n";
  }
  return out;
}

std::map<std::string, StageSummary> PipelineResult::stage_summary() const {
  std::map<std::string, StageSummary> out;
  for (const StageRecord& r : records) {
    StageSummary& s = out[r.stage];
    ++s.count;
    s.total_ms += r.wall_time_ms;
    s.max_ms = std::max(s.max_ms, r.wall_time_ms);
  }
  for (auto& [name, s] : out) s.mean_ms = s.total_ms / s.count;
  return out;
}

int PipelineResult::marginalized_count() const {
  int n = 0;
  for (const auto& [i, k] : graph.keyframes()) n += k.marginalized ? 1 : 0;
  return n;
}

std::string PipelineResult::trajectory_text() const {
  std::string out;
  for (const auto& [i, k] : graph.keyframes()) {
    if (k.marginalized) out += "# marginalized ";
    out += format_pose_line(k.stamp, k.pose);
    out += '\n';
  }
  return out;
}

std::string PipelineResult::report_text() const {
  std::string out;
  for (const StageRecord& r : records) {
    out += to_json_line(r);
    out += '\n';
  }
  return out;
}

PipelineResult run_pipeline(const std::vector<Event>& events, const BackendConfig& cfg) {
  Backend backend(cfg);
  PipelineResult result;
  result.mode = cfg.mode;
  for (std::size_t i = 0; i < events.size(); ++i) {
    try {
      std::vector<StageRecord> recs = backend.ingest(events[i]);
      for (StageRecord& r : recs) result.records.push_back(std::move(r));
    } catch (const Error& e) {
      throw Error(e.code(), "event " + std::to_string(i + 1) + ": " + e.detail());
    }
  }
  result.graph = backend.graph();
  result.counters = backend.counters();
  for (const auto& [stamp, pose] : backend.ground_truth()) result.ground_truth.push_back({stamp, pose});
  result.active_trajectory = from_graph(result.graph, false);
  result.full_trajectory = from_graph(result.graph, true);
  if (result.ground_truth.size() >= 2) {
    try {
      result.ate_active = ate(result.active_trajectory, result.ground_truth, Alignment::RigidUmeyama);
      result.ate_all = ate(result.full_trajectory, result.ground_truth, Alignment::RigidUmeyama);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::TooFewPoses) throw;
    }
  }
  return result;
}

double CompareReport::global_time_reduction_pct() const {
  const auto f = full.stage_summary(), c = compressed.stage_summary();
  const auto fg = f.find("global"), cg = c.find("global");
  if (fg == f.end() || cg == c.end() || fg->second.mean_ms <= 0.0) return 0.0;
  return (fg->second.mean_ms - cg->second.mean_ms) / fg->second.mean_ms * 100.0;
}

double CompareReport::total_time_reduction_pct() const {
  double f = 0.0, c = 0.0;
  for (const auto& [name, s] : full.stage_summary()) f += s.total_ms;
  for (const auto& [name, s] : compressed.stage_summary()) c += s.total_ms;
  return f > 0.0 ? (f - c) / f * 100.0 : 0.0;
}

std::optional<double> CompareReport::ate_relative_diff_pct() const {
  if (!full.ate_active || !compressed.ate_active || full.ate_active->rmse <= 0.0) return std::nullopt;
  return (compressed.ate_active->rmse - full.ate_active->rmse) / full.ate_active->rmse * 100.0;
}

std::string CompareReport::to_json() const {
  json j;
  j["dataset_checksum"] = dataset_checksum;
  j["full"] = mode_json(full);
  j["compressed"] = mode_json(compressed);
  j["global_time_reduction_pct"] = global_time_reduction_pct();
  j["total_time_reduction_pct"] = total_time_reduction_pct();
  const auto ate_diff = ate_relative_diff_pct();
  j["ate_relative_diff_pct"] = ate_diff ? json(*ate_diff) : json(nullptr);
  return j.dump(2);
}

std::string CompareReport::to_table() const {
  std::ostringstream out;
  auto row = [&](const std::string& label, const std::string& a, const std::string& b) {
    out << std::left;
    out.width(34);
    out << label;
    out.width(16);
    out << a;
    out << b << '\n';
  };
  auto cm = [](const std::optional<AteResult>& a) { return a ? pct(a->rmse * 100.0) : std::string("n/a"); };
  const auto fs = full.stage_summary(), cs = compressed.stage_summary();
  row("", "full", "compressed");
  row("ATE rmse, active keyframes [cm]", cm(full.ate_active), cm(compressed.ate_active));
  row("ATE rmse, all keyframes [cm]", cm(full.ate_all), cm(compressed.ate_all));
  for (const std::string stage : {"room_local", "local", "global", "compression"}) {
    const auto f = fs.find(stage), c = cs.find(stage);
    auto mean = [](const auto& map, const auto& it) {
      return it == map.end() ? std::string("-") : pct(it->second.mean_ms) + " (" + std::to_string(it->second.count) + ")";
    };
    row(stage + " mean time [ms] (runs)", mean(fs, f), mean(cs, c));
  }
  row("keyframes (marginalized)",
      std::to_string(full.graph.keyframes().size()) + " (" + std::to_string(full.marginalized_count()) + ")",
      std::to_string(compressed.graph.keyframes().size()) + " (" + std::to_string(compressed.marginalized_count()) + ")");
  row("factors", std::to_string(full.graph.factor_count()), std::to_string(compressed.graph.factor_count()));
  out << "global optimization time reduction: " << pct(global_time_reduction_pct()) << " %\n";
  out << "all stages time reduction:          " << pct(total_time_reduction_pct()) << " %\n";
  const auto d = ate_relative_diff_pct();
  out << "ATE relative difference:            " << (d ? pct(*d) + " %" : std::string("n/a")) << '\n';
  return out.str();
}

CompareReport compare(const std::string& dataset_text, const BackendConfig& cfg) {
  const std::vector<Event> events = read_events(dataset_text);
  CompareReport report;
  report.dataset_checksum = text::fnv1a_hex(dataset_text);
  BackendConfig full_cfg = cfg, comp_cfg = cfg;
  full_cfg.mode = PipelineMode::Full;
  comp_cfg.mode = PipelineMode::Compressed;
  report.full = run_pipeline(events, full_cfg);
  report.compressed = run_pipeline(events, comp_cfg);
  return report;
}

Trajectory read_any_trajectory(const std::string& contents) {
  std::istringstream in(contents);
  std::string line, plain;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto tokens = text::split_ws(line);
    if (!tokens.empty() && (tokens[0] == "wall" || tokens[0] == "room" || tokens[0] == "floor")) {
      plain += '\n';
    } else if (!tokens.empty() && tokens[0] == "pose") {
      if (tokens.size() != 10) {
        throw Error(ErrorCode::ParseError, "line " + std::to_string(number) + ": expected 10 fields in pose record");
      }
      for (std::size_t i = 2; i < tokens.size(); ++i) {
        plain.append(tokens[i]);
        plain += ' ';
      }
      plain += '\n';
    } else {
      plain += line + '\n';
    }
  }
  return read_trajectory(plain);
}

std::vector<std::string> export_plot_data(const SGraph& g, const std::string& prefix) {
  const bool dir = !prefix.empty() && prefix.back() == '/';
  auto path = [&](const std::string& name) { return prefix + (dir ? "" : "_") + name + ".csv"; };
  auto num = [](double v) { return text::format_double(v); };

  std::string kf = "id,x,y,z,marginalized\n";
  for (const auto& [i, k] : g.keyframes()) {
    const Vec3& t = k.pose.translation();
    kf += to_string(k.id) + ',' + num(t.x()) + ',' + num(t.y()) + ',' + num(t.z()) + ',' + (k.marginalized ? "1" : "0") + '\n';
  }
  std::string walls = "id,nx,ny,nz,d\n";
  for (const auto& [i, w] : g.walls()) {
    const Vec3& n = w.plane.normal;
    walls += to_string(w.id) + ',' + num(n.x()) + ',' + num(n.y()) + ',' + num(n.z()) + ',' + num(w.plane.distance) + '\n';
  }
  std::string rooms = "id,cx,cy,wall_ids\n";
  for (const auto& [i, r] : g.rooms()) {
    rooms += to_string(r.id) + ',' + num(r.center.x()) + ',' + num(r.center.y()) + ',';
    for (std::size_t k = 0; k < 4; ++k) rooms += (k ? ";" : "") + to_string(r.wall_ids[k]);
    rooms += '\n';
  }
  std::string edges = "id,kind,endpoints\n";
  for (const auto& [id, f] : g.factors()) {
    edges += std::to_string(id) + ',' + to_string(f.kind) + ',';
    for (std::size_t k = 0; k < f.vertices.size(); ++k) edges += (k ? ";" : "") + to_string(f.vertices[k]);
    edges += '\n';
  }
  const std::vector<std::pair<std::string, std::string>> files = {
      {path("keyframes"), kf}, {path("walls"), walls}, {path("rooms"), rooms}, {path("edges"), edges}};
  std::vector<std::string> written;
  for (const auto& [p, body] : files) {
    text::write_file(p, body);
    written.push_back(p);
  }
  return written;
}

}  // namespace sgraph
