#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sgraph/error.hpp"
#include "sgraph/harness.hpp"
#include "sgraph/manifold.hpp"
#include "sgraph/metrics.hpp"
#include "sgraph/room_local.hpp"
#include "sgraph/simulator.hpp"

namespace py = pybind11;
using namespace sgraph;

namespace {

HarnessConfig config_from(const std::string& text) { return parse_config(text); }

py::dict summary(const PipelineResult& r) {
  py::dict d;
  d["mode"] = to_string(r.mode);
  d["keyframes"] = r.graph.keyframes().size();
  d["marginalized"] = r.marginalized_count();
  d["ate_active"] = r.ate_active ? py::cast(r.ate_active->rmse) : py::none();
  d["ate_all"] = r.ate_all ? py::cast(r.ate_all->rmse) : py::none();
  d["rooms_detected"] = r.counters.rooms_detected;
  d["loop_closures_added"] = r.counters.loop_closures_added;
  d["trajectory"] = r.trajectory_text();
  d["report"] = r.report_text();
  return d;
}

}  // namespace

PYBIND11_MODULE(_sgraph, m) {
  m.doc() = "Scene-graph back end with room-based keyframe compression";

  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  m.def("se3_exp", [](const Tangent6& xi) { return exp(xi).matrix(); }, py::arg("xi"),
        "4x4 transform of a tangent vector (rotation first, then translation).");
  m.def(
      "se3_log",
      [](const Eigen::Matrix4d& t) {
        return log(Pose3(Mat3(t.topLeftCorner<3, 3>()), Vec3(t.topRightCorner<3, 1>())));
      },
      py::arg("transform"));

  m.def(
      "keyframe_in_room",
      [](const Vec3& point, const std::vector<std::pair<Vec3, double>>& walls) {
        if (walls.size() != 4) throw Error(ErrorCode::InvalidArgument, "expected four walls");
        std::array<PlaneParams, 4> planes;
        for (std::size_t i = 0; i < 4; ++i) planes[i] = PlaneParams(walls[i].first, walls[i].second);
        return keyframe_in_room(point, planes);
      },
      py::arg("point"), py::arg("walls"), "walls: four (normal, distance) pairs with outward normals");

  m.def(
      "describe_config", [](const std::string& text) { return describe_config(config_from(text)); },
      py::arg("config") = "", "Every recognized config key with its effective value.");

  m.def(
      "simulate",
      [](const std::string& config, std::optional<std::uint64_t> seed) {
        HarnessConfig cfg = config_from(config);
        if (seed) cfg.world.seed = *seed;
        const GroundTruth gt = generate_world(cfg.world);
        return py::make_tuple(write_events(generate_events(gt, cfg.world)), serialize_ground_truth(gt));
      },
      py::arg("config") = "", py::arg("seed") = py::none(),
      "Returns (events JSON lines, ground-truth text).");

  m.def(
      "run",
      [](const std::string& events, const std::string& config, std::optional<std::string> mode,
         std::optional<int> window) {
        BackendConfig cfg = config_from(config).backend;
        if (mode) cfg.mode = parse_mode(*mode);
        if (window) cfg.window_size = *window;
        const std::vector<Event> stream = read_events(events);
        PipelineResult r;
        {
          py::gil_scoped_release release;
          r = run_pipeline(stream, cfg);
        }
        return summary(r);
      },
      py::arg("events"), py::arg("config") = "", py::arg("mode") = py::none(), py::arg("window") = py::none());

  m.def(
      "compare",
      [](const std::string& events, const std::string& config) {
        const BackendConfig cfg = config_from(config).backend;
        std::string json;
        {
          py::gil_scoped_release release;
          json = compare(events, cfg).to_json();
        }
        return py::module_::import("json").attr("loads")(json);
      },
      py::arg("events"), py::arg("config") = "", "CompareReport as a dict.");

  m.def(
      "ate",
      [](const std::string& estimate, const std::string& ground_truth, bool align) {
        const AteResult r = sgraph::ate(read_any_trajectory(estimate), read_any_trajectory(ground_truth),
                                        align ? Alignment::RigidUmeyama : Alignment::None);
        py::dict d;
        d["rmse"] = r.rmse;
        d["mean"] = r.mean;
        d["median"] = r.median;
        d["max"] = r.max;
        d["num_poses"] = r.num_poses;
        return d;
      },
      py::arg("estimate"), py::arg("ground_truth"), py::arg("align") = true);
}
