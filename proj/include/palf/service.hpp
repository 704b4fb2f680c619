#pragma once

// Annotation-review backend: frame bundles (pre-annotated boxes plus their
// fusion report), point payloads, session persistence, one-click refit and
// timing events. ServiceCore holds the logic; Service maps it onto HTTP.

#include <cstdlib>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

// Eigen before httplib: <resolv.h> defines a `_res` macro that collides
// with Eigen parameter names.
#include "palf/pipeline.hpp"
#include "httplib.h"

namespace palf {

struct ServiceConfig {
  fs::path dataset_root = ".";
  std::string host = "127.0.0.1";
  int port = 8080;
  PreannotateConfig preannotate;
  FusionConfig fusion;
  double min_iou3d = kDefaultMinIou3d;
  CalibrationOptions calibration;
  std::optional<fs::path> static_dir;  // served at / when set
};

namespace detail {

inline void read_number(const Json& obj, const char* key, double& out,
                        std::vector<FieldIssue>& issues) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_number()) {
    issues.push_back({-1, key, "expected number"});
    return;
  }
  out = it->get<double>();
}

}  // namespace detail

/// Config file keys (all optional): dataset_root, host, port, static_dir,
/// camera, image_width, image_height, point_threshold, crop_margin_m,
/// yaw_search_halfwidth_rad, yaw_step_rad, ground_band_m, min_score,
/// iou2d_threshold, min_2d_score, max_center_distance_px, min_iou3d.
inline ServiceConfig service_config_from_json(const Json& j) {
  std::vector<FieldIssue> issues;
  ServiceConfig c;
  if (!j.is_object()) throw ValidationError({{-1, "config", "expected a JSON object"}});
  auto str = [&](const char* key) -> std::optional<std::string> {
    auto it = j.find(key);
    if (it == j.end()) return std::nullopt;
    if (!it->is_string()) {
      issues.push_back({-1, key, "expected string"});
      return std::nullopt;
    }
    return it->get<std::string>();
  };
  if (auto v = str("dataset_root")) c.dataset_root = *v;
  if (auto v = str("host")) c.host = *v;
  if (auto v = str("static_dir")) c.static_dir = fs::path(*v);
  if (auto v = str("camera")) c.calibration.camera_key = *v;
  double port = c.port, w = c.calibration.image_size.width, h = c.calibration.image_size.height;
  double threshold = c.preannotate.point_threshold;
  detail::read_number(j, "port", port, issues);
  detail::read_number(j, "image_width", w, issues);
  detail::read_number(j, "image_height", h, issues);
  detail::read_number(j, "point_threshold", threshold, issues);
  detail::read_number(j, "crop_margin_m", c.preannotate.crop_margin_m, issues);
  detail::read_number(j, "yaw_search_halfwidth_rad", c.preannotate.yaw_search_halfwidth_rad,
                      issues);
  detail::read_number(j, "yaw_step_rad", c.preannotate.yaw_step_rad, issues);
  detail::read_number(j, "ground_band_m", c.preannotate.ground_band_m, issues);
  detail::read_number(j, "min_score", c.preannotate.min_score, issues);
  detail::read_number(j, "iou2d_threshold", c.fusion.iou2d_threshold, issues);
  detail::read_number(j, "min_2d_score", c.fusion.min_2d_score, issues);
  detail::read_number(j, "min_iou3d", c.min_iou3d, issues);
  if (j.contains("max_center_distance_px")) {
    double d = 0.0;
    detail::read_number(j, "max_center_distance_px", d, issues);
    c.fusion.max_center_distance_px = d;
  }
  if (port < 0 || port > 65535) issues.push_back({-1, "port", "must lie in [0,65535]"});
  if (w < 1 || h < 1) issues.push_back({-1, "image_width", "image size must be positive"});
  c.port = static_cast<int>(port);
  c.calibration.image_size = {static_cast<int>(w), static_cast<int>(h)};
  c.preannotate.point_threshold = static_cast<int>(threshold);
  for (auto& issue : check_config(c.preannotate)) issues.push_back(issue);
  if (!(c.fusion.iou2d_threshold >= 0.0 && c.fusion.iou2d_threshold <= 1.0))
    issues.push_back({-1, "iou2d_threshold", "must lie in [0,1]"});
  if (!issues.empty()) throw ValidationError(issues);
  return c;
}

using EnvLookup = std::function<const char*(const char*)>;

/// Config file (when given) with PALF_DATASET_ROOT and PALF_PORT applied on
/// top.
inline ServiceConfig load_service_config(const std::optional<fs::path>& file,
                                         const EnvLookup& env = [](const char* k) {
                                           return std::getenv(k);
                                         }) {
  ServiceConfig c;
  if (file) c = service_config_from_json(parse_json_text(detail::read_file_bytes(*file),
                                                         file->string()));
  if (const char* root = env("PALF_DATASET_ROOT"); root && *root) c.dataset_root = root;
  if (const char* port = env("PALF_PORT"); port && *port) {
    char* end = nullptr;
    const long p = std::strtol(port, &end, 10);
    if (*end != '\0' || p < 0 || p > 65535)
      throw ValidationError({{-1, "PALF_PORT", std::string("not a port number: ") + port}});
    c.port = static_cast<int>(p);
  }
  return c;
}

/// Little-endian float32 x,y,z triples, one per point.
inline std::string encode_xyz_payload(const PointCloud& cloud) {
  std::string out(cloud.size() * 12, '\0');
  for (std::size_t i = 0; i < cloud.size(); ++i)
    for (int k = 0; k < 3; ++k)
      detail::store_le_float(static_cast<float>(cloud.points[i][k]), &out[i * 12 + k * 4]);
  return out;
}

inline Json issues_to_json(const std::vector<FieldIssue>& issues) {
  Json out = Json::array();
  for (const auto& i : issues)
    out.push_back({{"index", i.index >= 0 ? Json(i.index) : Json(nullptr)},
                   {"field", i.field},
                   {"message", i.message}});
  return out;
}

struct RefitResult {
  Box3D box;
  bool degenerate_fit = false;
  std::string message;
};

class ServiceCore {
 public:
  explicit ServiceCore(ServiceConfig cfg) : cfg_(std::move(cfg)), layout_{cfg_.dataset_root} {}

  const ServiceConfig& config() const { return cfg_; }
  const DatasetLayout& layout() const { return layout_; }

  std::vector<std::string> list_frames() const { return layout_.list_frames(); }

  /// Serialized FrameBundle. Computed once per frame and served from the
  /// cache until the frame's annotations change.
  std::shared_ptr<const std::string> bundle(const std::string& id) {
    require_frame(id);
    {
      std::shared_lock lock(cache_mutex_);
      if (auto it = bundles_.find(id); it != bundles_.end()) return it->second;
    }
    std::lock_guard frame_lock(frame_mutex(id));
    {
      std::shared_lock lock(cache_mutex_);
      if (auto it = bundles_.find(id); it != bundles_.end()) return it->second;
    }
    auto text = std::make_shared<const std::string>(compute_bundle(id).dump());
    std::unique_lock lock(cache_mutex_);
    bundles_[id] = text;
    return text;
  }

  std::string points_payload(const std::string& id) {
    require_frame(id);
    return encode_xyz_payload(upstream([&] { return load_point_cloud(layout_.velodyne(id)); }));
  }

  std::string image_bytes(const std::string& id) {
    require_frame(id);
    std::error_code ec;
    if (!fs::is_regular_file(layout_.image(id), ec))
      throw NotFound("no image for frame '" + id + "'");
    return upstream([&] { return detail::read_file_bytes(layout_.image(id)); });
  }

  /// Current session: the saved one, else the pre-annotation of the frame.
  AnnotationSession session(const std::string& id) {
    require_frame(id);
    std::lock_guard frame_lock(frame_mutex(id));
    return current_session(id);
  }

  /// Replaces the frame's boxes (timing events are kept). Body:
  /// {"boxes": [{id, position, scale, yaw, class, status}, ...]}.
  AnnotationSession put_annotations(const std::string& id, const Json& body) {
    require_frame(id);
    std::vector<FieldIssue> issues;
    std::vector<SessionBox> boxes;
    const Json* list = body.is_object() && body.contains("boxes") ? &body["boxes"] : nullptr;
    if (!list || !list->is_array())
      throw ValidationError({{-1, "boxes", "expected {\"boxes\": [...]}"}});
    for (std::size_t i = 0; i < list->size(); ++i) {
      try {
        boxes.push_back(session_box_from_json((*list)[i], "/boxes/" + std::to_string(i)));
      } catch (const FormatError& e) {
        issues.push_back({static_cast<int>(i), "boxes", e.what()});
      }
    }
    if (!issues.empty()) throw ValidationError(issues);

    std::lock_guard frame_lock(frame_mutex(id));
    AnnotationSession s = current_session(id);
    s.boxes = std::move(boxes);
    persist(id, s);
    return s;
  }

  RefitResult refit(const std::string& id, const Json& body) {
    require_frame(id);
    Box3D seed;
    try {
      if (!body.is_object() || !body.contains("box"))
        throw FormatError("at /box: missing field");
      seed = detail::box3d_at(body["box"], "/box");
    } catch (const FormatError& e) {
      throw ValidationError({{-1, "box", e.what()}});
    }
    const PointCloud cloud =
        upstream([&] { return load_point_cloud(layout_.velodyne(id)); });
    try {
      return {fit_box(cloud, seed, cfg_.preannotate), false, ""};
    } catch (const DegenerateFit& e) {
      return {seed, true, e.what()};
    }
  }

  /// Appends {kind, box_id, timestamp} to the frame's session.
  AnnotationSession record_event(const std::string& id, const Json& body) {
    require_frame(id);
    TimingEvent ev;
    try {
      ev = timing_event_from_json(body, "");
    } catch (const FormatError& e) {
      throw ValidationError({{-1, "event", e.what()}});
    }
    std::lock_guard frame_lock(frame_mutex(id));
    AnnotationSession s = current_session(id);
    s.timing_events.push_back(ev);
    if (auto issues = check_session(s); !issues.empty()) throw ValidationError(issues);
    persist(id, s);
    return s;
  }

  /// Metrics of the current boxes against a reference set: "kitti" reads
  /// label_2/<id>.txt, any other name ground_truth/<name>/<id>.json.
  MetricsReport metrics(const std::string& id, const std::string& gt_name) {
    require_frame(id);
    if (!valid_frame_id(gt_name)) throw ValidationError({{-1, "gt", "invalid name"}});
    const AnnotationSession s = session(id);
    std::vector<Box3D> gt;
    std::error_code ec;
    if (gt_name == "kitti") {
      if (!fs::is_regular_file(layout_.labels(id), ec))
        throw NotFound("no KITTI labels for frame '" + id + "'");
      const Calibration calib = upstream([&] { return frame_calibration(id); });
      gt = upstream([&] { return load_boxes(layout_.labels(id), &calib); });
    } else {
      if (!fs::is_regular_file(layout_.ground_truth(gt_name, id), ec))
        throw NotFound("no ground truth '" + gt_name + "' for frame '" + id + "'");
      gt = upstream([&] { return load_boxes(layout_.ground_truth(gt_name, id)); });
    }
    std::vector<Box3D> pred;
    for (const auto& b : s.boxes) pred.push_back(b.box);
    MetricsReport r = compute_metrics(match_to_ground_truth(pred, gt, cfg_.min_iou3d), &s);
    r.per_frame.push_back({id, r.true_positives, r.false_positives, r.false_negatives,
                           r.mean_iou3d, r.total_time_s});
    return r;
  }

 private:
  void require_frame(const std::string& id) const {
    if (!layout_.has_frame(id)) throw NotFound("unknown frame '" + id + "'");
  }

  std::mutex& frame_mutex(const std::string& id) {
    std::lock_guard lock(locks_mutex_);
    auto& m = frame_locks_[id];
    if (!m) m = std::make_unique<std::mutex>();
    return *m;
  }

  // Dataset files are read-only inputs; failures reading them are the
  // dataset's fault, not the client's.
  template <typename F>
  static auto upstream(F&& f) -> decltype(f()) {
    try {
      return f();
    } catch (const IoError& e) {
      throw UpstreamDataError(e.what());
    } catch (const FormatError& e) {
      throw UpstreamDataError(e.what());
    }
  }

  Calibration frame_calibration(const std::string& id) const {
    CalibrationOptions opts = cfg_.calibration;
    if (auto size = read_png_size(layout_.image(id))) opts.image_size = *size;
    return load_calibration(layout_.calib(id), opts);
  }

  // Caller holds the frame mutex.
  AnnotationSession current_session(const std::string& id) {
    std::error_code ec;
    if (fs::exists(layout_.session(id), ec))
      return upstream([&] { return load_session(layout_.session(id)); });
    const FrameInputs in = upstream([&] { return load_frame(layout_, id, cfg_.calibration); });
    AnnotationSession s;
    s.frame_id = id;
    for (const auto& p : preannotate_frame(in.cloud, in.detections.boxes3d, cfg_.preannotate))
      s.boxes.push_back({"det-" + std::to_string(p.source_index), p.detection.box,
                         p.detection.class_label, BoxStatus::pre_annotated});
    return s;
  }

  // Caller holds the frame mutex.
  void persist(const std::string& id, const AnnotationSession& s) {
    std::error_code ec;
    fs::create_directories(layout_.session(id).parent_path(), ec);
    save_session(s, layout_.session(id));
    std::unique_lock lock(cache_mutex_);
    bundles_.erase(id);
  }

  // Caller holds the frame mutex.
  Json compute_bundle(const std::string& id) {
    FrameInputs in = upstream([&] { return load_frame(layout_, id, cfg_.calibration); });
    std::error_code ec;
    const bool saved = fs::exists(layout_.session(id), ec);
    const AnnotationSession s = current_session(id);

    std::vector<Detection3D> boxes3d;
    for (const auto& b : s.boxes) boxes3d.push_back({b.box, b.class_label, 1.0});
    in.detections.boxes3d = std::move(boxes3d);
    const FusionReport report = fuse_inputs(in, cfg_.fusion);

    Json boxes = Json::array();
    for (const auto& b : s.boxes) boxes.push_back(session_box_to_json(b));
    const bool has_image = fs::is_regular_file(layout_.image(id), ec);
    return Json{{"palf_bundle", 1},
                {"frame_id", id},
                {"point_count", in.cloud.size()},
                {"boxes", boxes},
                {"fusion", fusion_report_to_json(report)},
                {"image_ref", has_image ? Json("/api/frames/" + id + "/image") : Json(nullptr)},
                {"image_size", {in.calib.image_size.width, in.calib.image_size.height}},
                {"session_saved", saved},
                {"warnings", report.warnings}};
  }

  ServiceConfig cfg_;
  DatasetLayout layout_;
  std::shared_mutex cache_mutex_;
  std::map<std::string, std::shared_ptr<const std::string>> bundles_;
  std::mutex locks_mutex_;
  std::map<std::string, std::unique_ptr<std::mutex>> frame_locks_;
};

/// HTTP front end over ServiceCore.
class Service {
 public:
  explicit Service(ServiceConfig cfg) : core_(std::move(cfg)) { routes(); }

  ServiceCore& core() { return core_; }

  /// Binds the configured host and port (0 picks a free port) and returns
  /// the bound port.
  int bind() {
    const auto& c = core_.config();
    const int port = c.port == 0 ? server_.bind_to_any_port(c.host)
                                 : (server_.bind_to_port(c.host, c.port) ? c.port : -1);
    if (port < 0)
      throw IoError("cannot bind " + c.host + ":" + std::to_string(c.port));
    return port;
  }

  /// Blocks until stop().
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() { server_.wait_until_ready(); }

 private:
  static void send_json(httplib::Response& res, const Json& j, int status = 200) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
  }

  template <typename F>
  static void guarded(httplib::Response& res, F&& f) {
    try {
      f();
    } catch (const NotFound& e) {
      send_json(res, {{"error", "not_found"}, {"message", e.what()}}, 404);
    } catch (const ValidationError& e) {
      send_json(res,
                {{"error", "validation"}, {"message", e.what()},
                 {"issues", issues_to_json(e.issues())}},
                400);
    } catch (const UpstreamDataError& e) {
      send_json(res, {{"error", "upstream_data"}, {"message", e.what()}}, 502);
    } catch (const std::exception& e) {
      send_json(res, {{"error", "internal"}, {"message", e.what()}}, 500);
    }
  }

  static Json body_json(const httplib::Request& req) {
    try {
      return Json::parse(req.body);
    } catch (const Json::parse_error& e) {
      throw ValidationError({{-1, "body", std::string("invalid JSON: ") + e.what()}});
    }
  }

  void routes() {
    const std::string frame = R"(/api/frames/([A-Za-z0-9_-]+))";
    server_.Get("/api/frames", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] { send_json(res, {{"frames", core_.list_frames()}}); });
    });
    server_.Get(frame, [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto text = core_.bundle(req.matches[1]);
        res.set_content(*text, "application/json");
      });
    });
    server_.Get(frame + "/points", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        res.set_content(core_.points_payload(req.matches[1]), "application/octet-stream");
      });
    });
    server_.Get(frame + "/image", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { res.set_content(core_.image_bytes(req.matches[1]), "image/png"); });
    });
    server_.Put(frame + "/annotations",
                [this](const httplib::Request& req, httplib::Response& res) {
                  guarded(res, [&] {
                    send_json(res, session_to_json(
                                       core_.put_annotations(req.matches[1], body_json(req))));
                  });
                });
    server_.Post(frame + "/refit", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const RefitResult r = core_.refit(req.matches[1], body_json(req));
        Json j{{"box", box3d_to_json(r.box)}, {"degenerate_fit", r.degenerate_fit}};
        if (r.degenerate_fit) j["message"] = r.message;
        send_json(res, j);
      });
    });
    server_.Post(frame + "/events", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const AnnotationSession s = core_.record_event(req.matches[1], body_json(req));
        send_json(res, {{"ok", true}, {"event_count", s.timing_events.size()}});
      });
    });
    server_.Get(frame + "/metrics", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::string gt = req.has_param("gt") ? req.get_param_value("gt") : "expert";
        send_json(res, metrics_to_json(core_.metrics(req.matches[1], gt)));
      });
    });
    if (const auto& dir = core_.config().static_dir)
      server_.set_mount_point("/", dir->string());
  }

  ServiceCore core_;
  httplib::Server server_;
};

}  // namespace palf
