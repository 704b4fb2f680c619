#pragma once

// Batch driver behind the `palf` executable:
//   palf preannotate|fuse|evaluate|serve [flags]
// Exit codes: 0 success, 1 usage or validation error, 2 I/O error.

#include <algorithm>
#include <atomic>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "palf/pipeline.hpp"
#include "palf/service.hpp"

namespace palf {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitIo = 2;

/// "000010", "000010-000015" and comma lists thereof. Numeric ranges keep
/// the zero padding of their first endpoint.
inline std::vector<std::string> expand_frame_spec(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  auto digits = [](const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
  };
  for (const auto& tok : tokens) {
    if (tok.empty()) continue;
    const auto dash = tok.find('-');
    if (dash != std::string::npos && digits(tok.substr(0, dash)) && digits(tok.substr(dash + 1))) {
      const std::string lo_s = tok.substr(0, dash);
      const long lo = std::stol(lo_s), hi = std::stol(tok.substr(dash + 1));
      if (hi < lo) throw ValidationError({{-1, "frames", "empty range '" + tok + "'"}});
      if (hi - lo > 1000000) throw ValidationError({{-1, "frames", "range too large '" + tok + "'"}});
      for (long v = lo; v <= hi; ++v) {
        std::string id = std::to_string(v);
        if (id.size() < lo_s.size()) id.insert(0, lo_s.size() - id.size(), '0');
        out.push_back(id);
      }
      continue;
    }
    if (!valid_frame_id(tok)) throw ValidationError({{-1, "frames", "invalid frame id '" + tok + "'"}});
    out.push_back(tok);
  }
  return out;
}

/// Runs `work(i)` for i in [0, n) on at most `workers` threads. Every item
/// runs; the exception of the lowest failing index is rethrown.
template <typename F>
void for_each_frame(std::size_t n, unsigned workers, F&& work) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto drain = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        work(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned count = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < count; ++t) pool.emplace_back(drain);
  drain();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

namespace detail {

struct CommonArgs {
  std::string dataset_root;
  std::vector<std::string> frames;
  std::string output;
  bool json = false;
  unsigned workers = 1;
  std::string camera = "P2";
};

inline void add_common(CLI::App* cmd, CommonArgs& a, bool needs_output) {
  cmd->add_option("--dataset-root", a.dataset_root, "KITTI-layout dataset directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  cmd->add_option("--frames", a.frames, "Frame ids or ranges, e.g. 000010,000012-000015")
      ->delimiter(',');
  if (needs_output) cmd->add_option("--output", a.output, "Output directory for per-frame JSON");
  cmd->add_flag("--json", a.json, "Machine-readable summary on stdout");
  cmd->add_option("--workers", a.workers, "Frames processed in parallel")
      ->check(CLI::Range(1u, 256u));
  cmd->add_option("--camera", a.camera, "Projection matrix key in calib files");
}

inline void add_preannotate_flags(CLI::App* cmd, PreannotateConfig& c) {
  cmd->add_option("--point-threshold", c.point_threshold,
                  "Fit only when the crop holds more points than this");
  cmd->add_option("--crop-margin", c.crop_margin_m, "Crop margin around the detection (m)");
  cmd->add_option("--yaw-halfwidth", c.yaw_search_halfwidth_rad, "Yaw search half-width (rad)");
  cmd->add_option("--yaw-step", c.yaw_step_rad, "Yaw search step (rad)");
  cmd->add_option("--ground-band", c.ground_band_m, "Ground band above the floor (m)");
  cmd->add_option("--min-score", c.min_score, "Drop 3D detections scoring below this");
}

inline std::vector<std::string> resolve_frames(const DatasetLayout& layout,
                                               const std::vector<std::string>& spec) {
  std::vector<std::string> ids = spec.empty() ? layout.list_frames() : expand_frame_spec(spec);
  for (const auto& id : ids)
    if (!layout.has_frame(id))
      throw IoError("frame '" + id + "' not found under " + layout.root.string());
  return ids;
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

/// Per-stem files of a directory, or the file itself.
inline std::vector<std::pair<std::string, fs::path>> list_inputs(const fs::path& p) {
  std::error_code ec;
  std::vector<std::pair<std::string, fs::path>> out;
  if (fs::is_directory(p, ec)) {
    for (const auto& e : fs::directory_iterator(p, ec))
      if (e.is_regular_file() && (e.path().extension() == ".json" || e.path().extension() == ".txt"))
        out.emplace_back(e.path().stem().string(), e.path());
    std::sort(out.begin(), out.end());
  } else if (fs::is_regular_file(p, ec)) {
    out.emplace_back(p.stem().string(), p);
  } else {
    throw IoError("no such file or directory: " + p.string());
  }
  return out;
}

inline fs::path per_frame_path(const fs::path& p, const std::string& stem, const char* ext) {
  std::error_code ec;
  if (fs::is_directory(p, ec)) return p / (stem + ext);
  return p;
}

}  // namespace detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Point-cloud annotation assist: pre-annotation, camera cross-check, evaluation"};
  app.name("palf");
  app.require_subcommand(1, 1);

  detail::CommonArgs common;
  PreannotateConfig pcfg;
  FusionConfig fcfg;

  auto* pre = app.add_subcommand("preannotate", "Fit detector boxes to the points they enclose");
  detail::add_common(pre, common, true);
  detail::add_preannotate_flags(pre, pcfg);

  auto* fuse = app.add_subcommand("fuse", "Cross-check 3D boxes against 2D detections");
  detail::add_common(fuse, common, true);
  std::string detections_dir;
  bool no_missed = false, disabled = false, with_pre = false;
  double max_dist = -1.0;
  fuse->add_option("--detections", detections_dir,
                   "Directory of detection JSON to fuse (default <root>/detections)")
      ->check(CLI::ExistingDirectory);
  fuse->add_option("--iou-threshold", fcfg.iou2d_threshold, "Minimum 2D IoU to confirm a box")
      ->check(CLI::Range(0.0, 1.0));
  fuse->add_option("--min-2d-score", fcfg.min_2d_score, "Ignore 2D detections scoring below this");
  fuse->add_option("--max-center-distance", max_dist, "Gate on rect center distance (px)");
  fuse->add_flag("--no-missed-check", no_missed, "Only flag wrong boxes");
  fuse->add_flag("--disabled", disabled, "Skip the cross-check (empty report)");
  fuse->add_flag("--preannotate", with_pre, "Pre-annotate the detections first, in process");
  detail::add_preannotate_flags(fuse, pcfg);

  auto* eval = app.add_subcommand("evaluate", "Score boxes against ground truth");
  std::string pred, gt, calib, session, eval_output, method = "PALF";
  double min_iou = kDefaultMinIou3d;
  bool eval_json = false;
  eval->add_option("--pred", pred, "Predicted boxes: file or directory")->required();
  eval->add_option("--gt", gt, "Ground-truth boxes: file or directory")->required();
  eval->add_option("--calib", calib, "Calibration file or directory (for KITTI .txt labels)");
  eval->add_option("--session", session, "Session file or directory for timing");
  eval->add_option("--min-iou", min_iou, "Minimum 3D IoU for a true positive")
      ->check(CLI::Range(0.0, 1.0));
  eval->add_option("--output", eval_output, "Write the metrics JSON here");
  eval->add_option("--method", method, "Row label in the table");
  eval->add_flag("--json", eval_json, "Print metrics JSON instead of the table");

  auto* serve = app.add_subcommand("serve", "Run the annotation-review HTTP service");
  std::string config_file, serve_root, host, static_dir;
  int port = -1;
  serve->add_option("--config", config_file, "Service config JSON")->check(CLI::ExistingFile);
  serve->add_option("--dataset-root", serve_root, "Dataset directory")
      ->check(CLI::ExistingDirectory);
  serve->add_option("--port", port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--static-dir", static_dir, "Directory served at /");
  bool serve_json = false;
  serve->add_flag("--json", serve_json, "Announce the bound address as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "palf: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (auto issues = check_config(pcfg); !issues.empty()) throw ValidationError(issues);
    CalibrationOptions copts;
    copts.camera_key = common.camera;

    if (pre->parsed()) {
      const DatasetLayout layout{common.dataset_root};
      const auto ids = detail::resolve_frames(layout, common.frames);
      const fs::path outdir =
          common.output.empty() ? layout.root / "preannotations" : fs::path(common.output);
      detail::ensure_dir(outdir);
      std::vector<Json> summary(ids.size());
      for_each_frame(ids.size(), common.workers, [&](std::size_t i) {
        const FrameInputs in = load_frame(layout, ids[i], copts);
        const auto result = preannotate_frame(in.cloud, in.detections.boxes3d, pcfg);
        const fs::path path = outdir / (ids[i] + ".json");
        detail::write_file_atomic(path, dump_report(preannotation_to_json(in, result)));
        const auto fitted = std::count_if(result.begin(), result.end(),
                                          [](const PreAnnotation& p) { return p.fitted; });
        summary[i] = {{"frame_id", ids[i]}, {"output", path.string()},
                      {"boxes", result.size()}, {"fitted", fitted}, {"warnings", in.warnings}};
      });
      if (common.json) {
        out << Json{{"command", "preannotate"}, {"frames", summary}}.dump(2) << "\n";
      } else {
        for (const auto& s : summary) {
          out << s["frame_id"].get<std::string>() << ": " << s["boxes"] << " boxes ("
              << s["fitted"] << " fitted) -> " << s["output"].get<std::string>() << "\n";
          for (const auto& w : s["warnings"]) err << "warning: " << w.get<std::string>() << "\n";
        }
      }
      return kExitOk;
    }

    if (fuse->parsed()) {
      if (no_missed && disabled)
        throw ValidationError({{-1, "--disabled", "conflicts with --no-missed-check"}});
      fcfg.mode = disabled ? FusionMode::disabled
                           : (no_missed ? FusionMode::wrong_only : FusionMode::full);
      if (max_dist >= 0.0) fcfg.max_center_distance_px = max_dist;
      const DatasetLayout layout{common.dataset_root};
      const auto ids = detail::resolve_frames(layout, common.frames);
      const fs::path outdir =
          common.output.empty() ? layout.root / "fusion" : fs::path(common.output);
      detail::ensure_dir(outdir);
      const std::optional<fs::path> det_dir =
          detections_dir.empty() ? std::nullopt : std::optional<fs::path>(detections_dir);
      std::vector<Json> summary(ids.size());
      for_each_frame(ids.size(), common.workers, [&](std::size_t i) {
        FrameInputs in = load_frame(layout, ids[i], copts, det_dir);
        const FusionReport r = with_pre ? preannotate_and_fuse(std::move(in), pcfg, fcfg)
                                        : fuse_inputs(in, fcfg);
        const fs::path path = outdir / (ids[i] + ".json");
        detail::write_file_atomic(path, dump_report(fusion_report_to_json(r)));
        summary[i] = {{"frame_id", ids[i]},         {"output", path.string()},
                      {"confirmed", r.confirmed.size()}, {"wrong", r.wrong.size()},
                      {"missed", r.missed.size()},  {"out_of_view", r.out_of_view.size()},
                      {"warnings", r.warnings}};
      });
      if (common.json) {
        out << Json{{"command", "fuse"}, {"frames", summary}}.dump(2) << "\n";
      } else {
        for (const auto& s : summary) {
          out << s["frame_id"].get<std::string>() << ": " << s["confirmed"] << " confirmed, "
              << s["wrong"] << " wrong, " << s["missed"] << " missed, " << s["out_of_view"]
              << " out of view -> " << s["output"].get<std::string>() << "\n";
          for (const auto& w : s["warnings"]) err << "warning: " << w.get<std::string>() << "\n";
        }
      }
      return kExitOk;
    }

    if (eval->parsed()) {
      const auto gt_files = detail::list_inputs(gt);
      std::error_code ec;
      const bool pred_is_dir = fs::is_directory(pred, ec);
      if (!pred_is_dir && gt_files.size() != 1)
        throw ValidationError({{-1, "--pred", "must be a directory when --gt is one"}});
      std::vector<FrameEvaluation> frames;
      for (const auto& [stem, gt_path] : gt_files) {
        fs::path pred_path = fs::path(pred);
        if (pred_is_dir) {
          pred_path = fs::path(pred) / (stem + ".json");
          if (!fs::exists(pred_path, ec)) pred_path = fs::path(pred) / (stem + ".txt");
        }
        std::optional<Calibration> cal;
        if (!calib.empty()) cal = load_calibration(detail::per_frame_path(calib, stem, ".txt"), copts);
        const Calibration* cp = cal ? &*cal : nullptr;
        FrameEvaluation fe;
        fe.frame_id = stem;
        fe.match = match_to_ground_truth(load_boxes(pred_path, cp), load_boxes(gt_path, cp), min_iou);
        if (!session.empty()) {
          fe.session = load_session(detail::per_frame_path(session, stem, ".json"));
        } else if (pred_path.extension() == ".json") {
          const Json root = parse_json_text(detail::read_file_bytes(pred_path), pred_path.string());
          if (root.is_object() && root.contains("palf_session")) fe.session = session_from_json(root);
        }
        frames.push_back(std::move(fe));
      }
      const MetricsReport r = aggregate_metrics(frames);
      if (!eval_output.empty()) detail::write_file_atomic(eval_output, dump_report(metrics_to_json(r)));
      if (eval_json)
        out << metrics_to_json(r).dump(2) << "\n";
      else
        out << metrics_table(r, method);
      return kExitOk;
    }

    if (serve->parsed()) {
      ServiceConfig cfg = load_service_config(
          config_file.empty() ? std::nullopt : std::optional<fs::path>(config_file));
      if (!serve_root.empty()) cfg.dataset_root = serve_root;
      if (port >= 0) cfg.port = port;
      if (!host.empty()) cfg.host = host;
      if (!static_dir.empty()) cfg.static_dir = fs::path(static_dir);
      if (!fs::is_directory(cfg.dataset_root))
        throw IoError("dataset root is not a directory: " + cfg.dataset_root.string());
      Service service(cfg);
      const int bound = service.bind();
      if (serve_json)
        out << Json{{"host", cfg.host}, {"port", bound}}.dump() << std::endl;
      else
        out << "palf service listening on http://" << cfg.host << ":" << bound << std::endl;
      service.listen_after_bind();
      return kExitOk;
    }
  } catch (const ValidationError& e) {
    err << "palf: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "palf: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {  // IoError, NotFound, UpstreamDataError
    err << "palf: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "palf: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}

}  // namespace palf
