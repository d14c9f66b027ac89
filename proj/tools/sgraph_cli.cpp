#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sgraph/error.hpp"
#include "sgraph/harness.hpp"
#include "sgraph/text.hpp"

namespace {

constexpr int kParseExit = 2;
constexpr int kRuntimeExit = 3;

using namespace sgraph;

HarnessConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  return parse_config(text::read_file(path));
}

void maybe_write(const std::string& path, const std::string& body) {
  if (!path.empty()) text::write_file(path, body);
}

std::string ate_line(const char* label, const AteResult& a) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s rmse=%.6f mean=%.6f median=%.6f max=%.6f poses=%d\n", label, a.rmse, a.mean,
                a.median, a.max, a.num_poses);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Situational-graph back-end: simulate, run, evaluate and compare"};
  app.require_subcommand(1);

  std::string config_path, out_path, gt_path, dataset_path, mode_name, traj_path, report_path, graph_path;
  std::string est_path, prefix;
  std::optional<std::uint64_t> seed;
  std::optional<int> window, repeats;
  bool no_align = false;

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic event stream and its ground truth");
  simulate->add_option("--config", config_path, "key=value config file");
  simulate->add_option("--seed", seed, "world seed, overrides the config");
  simulate->add_option("--out", out_path, "events output (JSON lines)")->required();
  simulate->add_option("--gt", gt_path, "ground-truth output");

  auto* run = app.add_subcommand("run", "replay an event stream through the back-end");
  run->add_option("--dataset", dataset_path, "events file")->required();
  run->add_option("--config", config_path, "key=value config file");
  run->add_option("--mode", mode_name, "full or compressed");
  run->add_option("--window", window, "local optimization window size");
  run->add_option("--timing-repeats", repeats, "re-run each optimization and keep the fastest");
  run->add_option("--traj", traj_path, "trajectory output");
  run->add_option("--report", report_path, "stage report output (JSON lines)");
  run->add_option("--graph", graph_path, "final graph output");

  auto* eval = app.add_subcommand("eval", "absolute trajectory error of an estimate");
  eval->add_option("--est", est_path, "estimated trajectory")->required();
  eval->add_option("--gt", gt_path, "ground truth trajectory or simulator ground-truth file")->required();
  eval->add_flag("--no-align", no_align, "skip rigid alignment");

  auto* cmp = app.add_subcommand("compare", "run full and compressed modes on the same stream");
  cmp->add_option("--dataset", dataset_path, "events file")->required();
  cmp->add_option("--config", config_path, "key=value config file");
  cmp->add_option("--timing-repeats", repeats, "re-run each optimization and keep the fastest");
  cmp->add_option("--out", out_path, "JSON report output");

  auto* exp = app.add_subcommand("export", "write CSV plot data for a graph file");
  exp->add_option("--graph", graph_path, "graph file")->required();
  exp->add_option("--out-prefix", prefix, "output prefix; a trailing '/' names a directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kParseExit;
  }

  try {
    if (*simulate) {
      HarnessConfig cfg = load_config(config_path);
      if (seed) cfg.world.seed = *seed;
      const GroundTruth gt = generate_world(cfg.world);
      const std::vector<Event> events = generate_events(gt, cfg.world);
      text::write_file(out_path, write_events(events));
      maybe_write(gt_path, serialize_ground_truth(gt));
      std::cout << "events: " << events.size() << ", keyframes: " << gt.poses.size() << ", rooms: " << gt.rooms.size()
                << '\n';
    } else if (*run) {
      HarnessConfig cfg = load_config(config_path);
      if (!mode_name.empty()) cfg.backend.mode = parse_mode(mode_name);
      if (window) cfg.backend.window_size = *window;
      if (repeats) cfg.backend.timing_repeats = *repeats;
      const PipelineResult r = run_pipeline(read_events(text::read_file(dataset_path)), cfg.backend);
      maybe_write(traj_path, r.trajectory_text());
      maybe_write(report_path, r.report_text());
      maybe_write(graph_path, serialize_graph(r.graph));
      std::cout << "mode: " << to_string(r.mode) << ", keyframes: " << r.graph.keyframes().size()
                << ", marginalized: " << r.marginalized_count() << ", factors: " << r.graph.factor_count() << '\n';
      for (const auto& [stage, s] : r.stage_summary()) {
        std::printf("%-12s runs=%d mean_ms=%.3f max_ms=%.3f\n", stage.c_str(), s.count, s.mean_ms, s.max_ms);
      }
      if (r.ate_active) std::cout << ate_line("ate_active", *r.ate_active);
      if (r.ate_all) std::cout << ate_line("ate_all", *r.ate_all);
    } else if (*eval) {
      const Trajectory est = read_any_trajectory(text::read_file(est_path));
      const Trajectory gt = read_any_trajectory(text::read_file(gt_path));
      std::cout << ate_line("ate", ate(est, gt, no_align ? Alignment::None : Alignment::RigidUmeyama));
    } else if (*cmp) {
      HarnessConfig cfg = load_config(config_path);
      if (repeats) cfg.backend.timing_repeats = *repeats;
      const CompareReport report = compare(text::read_file(dataset_path), cfg.backend);
      maybe_write(out_path, report.to_json() + "\n");
      std::cout << report.to_table();
    } else if (*exp) {
      for (const std::string& p : export_plot_data(parse_graph(text::read_file(graph_path)), prefix)) {
        std::cout << p << '\n';
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::ParseError ? kParseExit : kRuntimeExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeExit;
  }
  return 0;
}
