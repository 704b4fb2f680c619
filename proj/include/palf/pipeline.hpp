#pragma once

// KITTI-style dataset layout and the per-frame pipelines shared by the batch
// driver and the HTTP service.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "palf/evaluation.hpp"
#include "palf/fusion.hpp"
#include "palf/kitti_io.hpp"
#include "palf/preannotate.hpp"

namespace palf {

/// Frame ids become file names, so only a conservative character set is
/// accepted.
inline bool valid_frame_id(const std::string& id) {
  if (id.empty() || id.size() > 128) return false;
  return std::all_of(id.begin(), id.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '-';
  });
}

/// root/
///   velodyne/<id>.bin      calib/<id>.txt     image_2/<id>.png
///   detections/<id>.json   label_2/<id>.txt   sessions/<id>.json
///   ground_truth/<name>/<id>.json
struct DatasetLayout {
  fs::path root;

  fs::path velodyne(const std::string& id) const { return root / "velodyne" / (id + ".bin"); }
  fs::path calib(const std::string& id) const { return root / "calib" / (id + ".txt"); }
  fs::path image(const std::string& id) const { return root / "image_2" / (id + ".png"); }
  fs::path detections(const std::string& id) const {
    return root / "detections" / (id + ".json");
  }
  fs::path labels(const std::string& id) const { return root / "label_2" / (id + ".txt"); }
  fs::path session(const std::string& id) const { return root / "sessions" / (id + ".json"); }
  fs::path ground_truth(const std::string& name, const std::string& id) const {
    return root / "ground_truth" / name / (id + ".json");
  }

  /// Sorted ids of every velodyne/<id>.bin with a valid id.
  std::vector<std::string> list_frames() const {
    std::vector<std::string> ids;
    std::error_code ec;
    const fs::path dir = root / "velodyne";
    if (!fs::is_directory(dir, ec)) return ids;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
      if (entry.path().extension() != ".bin") continue;
      const std::string id = entry.path().stem().string();
      if (valid_frame_id(id)) ids.push_back(id);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  bool has_frame(const std::string& id) const {
    std::error_code ec;
    return valid_frame_id(id) && fs::is_regular_file(velodyne(id), ec);
  }
};

struct FrameInputs {
  std::string frame_id;
  PointCloud cloud;
  Calibration calib;
  DetectionFile detections;
  Warnings warnings;
};

/// Reads one frame. An absent detections file (or directory) yields empty
/// detection lists and a warning; every other missing input throws.
inline FrameInputs load_frame(const DatasetLayout& layout, const std::string& id,
                              const CalibrationOptions& calib_opts = {},
                              const std::optional<fs::path>& detections_dir = std::nullopt) {
  if (!valid_frame_id(id)) throw NotFound("invalid frame id '" + id + "'");
  FrameInputs in;
  in.frame_id = id;
  in.cloud = load_point_cloud(layout.velodyne(id), &in.warnings);
  CalibrationOptions opts = calib_opts;
  if (auto size = read_png_size(layout.image(id))) opts.image_size = *size;
  in.calib = load_calibration(layout.calib(id), opts);
  const fs::path det_path =
      detections_dir ? *detections_dir / (id + ".json") : layout.detections(id);
  std::error_code ec;
  if (fs::exists(det_path, ec)) {
    in.detections = load_detections(det_path, &in.warnings);
  } else {
    in.warnings.push_back("no detections file for frame " + id + " (" + det_path.string() +
                          "); using empty detections");
  }
  in.detections.frame_id = id;
  return in;
}

/// Pre-annotated detections of a frame in detection-file form: fitted 3D
/// boxes (survivors of the score cutoff, input order) plus the untouched 2D
/// detections.
inline DetectionFile preannotated_detections(const FrameInputs& in,
                                             const std::vector<PreAnnotation>& pre) {
  DetectionFile out;
  out.frame_id = in.frame_id;
  for (const auto& p : pre) out.boxes3d.push_back(p.detection);
  out.boxes2d = in.detections.boxes2d;
  return out;
}

/// Detection-file JSON with fit bookkeeping alongside. Readers of the
/// detection schema ignore the extra key.
inline Json preannotation_to_json(const FrameInputs& in, const std::vector<PreAnnotation>& pre) {
  Json j = detections_to_json(preannotated_detections(in, pre));
  Json fits = Json::array();
  for (const auto& p : pre)
    fits.push_back({{"source_index", p.source_index},
                    {"crop_points", p.crop_points},
                    {"fitted", p.fitted}});
  j["palf_preannotation"] = 1;
  j["fits"] = std::move(fits);
  return j;
}

inline FusionReport fuse_inputs(const FrameInputs& in, const FusionConfig& cfg) {
  FusionReport r = fuse_frame(in.cloud, in.calib, in.detections.boxes3d,
                              in.detections.boxes2d, cfg);
  r.warnings.insert(r.warnings.begin(), in.warnings.begin(), in.warnings.end());
  return r;
}

/// Pre-annotation followed by fusion, in process.
inline FusionReport preannotate_and_fuse(FrameInputs in, const PreannotateConfig& pcfg,
                                         const FusionConfig& fcfg) {
  const auto pre = preannotate_frame(in.cloud, in.detections.boxes3d, pcfg);
  in.detections = preannotated_detections(in, pre);
  return fuse_inputs(in, fcfg);
}

/// Canonical serialized form used for report files.
inline std::string dump_report(const Json& j) { return j.dump(2) + "\n"; }

/// Boxes of a file in any supported 3D box format: a session (palf_session
/// key), a detection file, or KITTI labels (.txt, needs a calibration).
inline std::vector<Box3D> load_boxes(const fs::path& path,
                                     const Calibration* calib = nullptr) {
  std::vector<Box3D> out;
  if (path.extension() == ".txt") {
    if (!calib) throw ValidationError({{-1, "calib", "KITTI labels need a calibration file"}});
    for (const auto& d : load_kitti_labels(path, *calib)) out.push_back(d.box);
    return out;
  }
  const Json root = parse_json_text(detail::read_file_bytes(path), path.string());
  if (root.is_object() && root.contains("palf_session")) {
    AnnotationSession s;
    try {
      s = session_from_json(root);
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ": " + e.what());
    }
    for (const auto& b : s.boxes) out.push_back(b.box);
    return out;
  }
  DetectionFile f;
  try {
    f = parse_detections(root);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  for (const auto& d : f.boxes3d) out.push_back(d.box);
  return out;
}

}  // namespace palf
