#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "palf/assignment.hpp"
#include "palf/geometry.hpp"
#include "palf/types.hpp"

namespace palf {

/// Which late-fusion checks run. `wrong_only` skips the missed-object
/// check and back-projection; `disabled` produces an empty report.
enum class FusionMode { full, wrong_only, disabled };

inline constexpr std::string_view to_string(FusionMode m) {
  switch (m) {
    case FusionMode::full: return "full";
    case FusionMode::wrong_only: return "wrong_only";
    case FusionMode::disabled: return "disabled";
  }
  return "full";
}

struct FusionConfig {
  double iou2d_threshold = 0.5;
  std::optional<double> max_center_distance_px;
  double min_2d_score = 0.5;
  FusionMode mode = FusionMode::full;
};

enum class WrongReason { low_iou, unmatched_3d };

inline constexpr std::string_view to_string(WrongReason r) {
  return r == WrongReason::low_iou ? "low_iou" : "unmatched_3d";
}

struct ConfirmedEntry {
  std::size_t box3d_id = 0;
  std::size_t box2d_id = 0;
  double iou2d = 0.0;
  bool class_mismatch = false;

  bool operator==(const ConfirmedEntry&) const = default;
};

struct WrongEntry {
  std::size_t box3d_id = 0;
  WrongReason reason = WrongReason::unmatched_3d;
  std::optional<double> iou2d;              // set for low_iou
  std::optional<std::size_t> box2d_id;      // partner of a low_iou match
  bool class_mismatch = false;

  bool operator==(const WrongEntry&) const = default;
};

struct MissedEntry {
  std::size_t box2d_id = 0;
  Box2D rect;
  std::optional<std::size_t> matched_box3d_id;  // set when matched at low IoU

  bool operator==(const MissedEntry&) const = default;
};

/// Outcome of fusing one frame. 3D ids index the input boxes, 2D ids index
/// the input detections (including any dropped by the score cutoff).
struct FusionReport {
  FusionMode mode = FusionMode::full;
  std::vector<ConfirmedEntry> confirmed;
  std::vector<WrongEntry> wrong;
  std::vector<MissedEntry> missed;
  std::vector<std::size_t> out_of_view;
  std::vector<std::size_t> highlighted_wrong_points;   // rendered red
  std::vector<std::size_t> highlighted_missed_points;  // rendered orange
  std::vector<Box2D> missed_image_regions;
  std::vector<std::optional<Box2D>> projected_rects;   // per 3D box
  std::vector<std::size_t> considered_2d;              // passed min_2d_score
  bool calibration_mismatch = false;
  std::vector<std::string> warnings;

  bool operator==(const FusionReport&) const = default;
};

/// Ascending indices of points whose in-image projection falls inside any
/// of `rects` (closed boundary).
inline std::vector<std::size_t> backproject_missed(const PointCloud& cloud,
                                                   const Calibration& calib,
                                                   std::span<const Box2D> rects) {
  std::vector<std::size_t> out;
  if (rects.empty()) return out;
  const Projection proj = project_points(calib, cloud.points);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!proj.valid[i]) continue;
    const ImagePoint& p = proj.points[i];
    for (const Box2D& r : rects) {
      if (r.contains(p.u, p.v)) {
        out.push_back(i);
        break;
      }
    }
  }
  return out;
}

namespace detail {

inline bool labels_differ(const std::string& a, const std::string& b) {
  return !a.empty() && !b.empty() && a != b;
}

inline std::vector<std::size_t> union_points_in_boxes(const PointCloud& cloud,
                                                      const std::vector<Box3D>& boxes) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (const Box3D& b : boxes) {
      if (box_contains(b, cloud.points[i])) {
        out.push_back(i);
        break;
      }
    }
  }
  return out;
}

}  // namespace detail

/// Late fusion of one frame's 3D boxes with its 2D detections.
///
/// Boxes whose projection leaves the image go to out_of_view. The rest are
/// matched to 2D detections on rectangle-center distance. A matched pair
/// with iou2d >= threshold is confirmed; below threshold the 3D box is
/// wrong (low_iou) and the 2D detection is reported missed. Unmatched 3D
/// boxes are wrong (unmatched_3d), unmatched 2D detections are missed.
inline FusionReport fuse_frame(const PointCloud& cloud, const Calibration& calib,
                               std::span<const Detection3D> boxes3d,
                               std::span<const Detection2D> dets2d,
                               const FusionConfig& cfg = {}) {
  FusionReport report;
  report.mode = cfg.mode;
  if (cfg.mode == FusionMode::disabled) return report;

  std::vector<std::size_t> in_view;
  std::vector<Box2D> rects3d;
  report.projected_rects.reserve(boxes3d.size());
  for (std::size_t i = 0; i < boxes3d.size(); ++i) {
    auto rect = project_box3d_to_rect(calib, boxes3d[i].box);
    report.projected_rects.push_back(rect);
    if (rect) {
      in_view.push_back(i);
      rects3d.push_back(*rect);
    } else {
      report.out_of_view.push_back(i);
    }
  }

  std::vector<Box2D> rects2d;
  for (std::size_t j = 0; j < dets2d.size(); ++j) {
    if (dets2d[j].score < cfg.min_2d_score) continue;
    report.considered_2d.push_back(j);
    rects2d.push_back(dets2d[j].box);
  }

  const auto costs = build_cost_matrix(rects3d, rects2d);
  const Matching match = solve_assignment(costs, cfg.max_center_distance_px);

  std::vector<MissedEntry> missed;
  for (const auto& [r, c] : match.pairs) {
    const std::size_t id3 = in_view[r];
    const std::size_t id2 = report.considered_2d[c];
    const double iou = iou2d(rects3d[r], rects2d[c]);
    const bool mismatch =
        detail::labels_differ(boxes3d[id3].class_label, dets2d[id2].class_label);
    if (iou >= cfg.iou2d_threshold) {
      report.confirmed.push_back({id3, id2, iou, mismatch});
    } else {
      report.wrong.push_back({id3, WrongReason::low_iou, iou, id2, mismatch});
      missed.push_back({id2, rects2d[c], id3});
    }
  }
  for (std::size_t r : match.unmatched_rows)
    report.wrong.push_back({in_view[r], WrongReason::unmatched_3d, std::nullopt,
                            std::nullopt, false});
  for (std::size_t c : match.unmatched_cols)
    missed.push_back({report.considered_2d[c], rects2d[c], std::nullopt});

  std::sort(report.wrong.begin(), report.wrong.end(),
            [](const auto& a, const auto& b) { return a.box3d_id < b.box3d_id; });
  std::sort(missed.begin(), missed.end(),
            [](const auto& a, const auto& b) { return a.box2d_id < b.box2d_id; });

  std::vector<Box3D> wrong_boxes;
  for (const auto& w : report.wrong) wrong_boxes.push_back(boxes3d[w.box3d_id].box);
  report.highlighted_wrong_points = detail::union_points_in_boxes(cloud, wrong_boxes);

  if (cfg.mode == FusionMode::full) {
    report.missed = std::move(missed);
    for (const auto& m : report.missed) report.missed_image_regions.push_back(m.rect);
    report.highlighted_missed_points =
        backproject_missed(cloud, calib, report.missed_image_regions);
  }

  // Nothing projects although 2D evidence exists and some box sits in front
  // of the camera: the calibration probably does not belong to this frame.
  if (!boxes3d.empty() && in_view.empty() && !rects2d.empty()) {
    const bool any_forward = std::any_of(
        boxes3d.begin(), boxes3d.end(), [&](const Detection3D& d) {
          return project_homogeneous(calib, d.box.position).z() > 0.0;
        });
    if (any_forward) {
      report.calibration_mismatch = true;
      report.warnings.push_back(
          "CalibrationMismatch: every 3D box is out of view while 2D detections "
          "exist; check that the calibration matches this frame");
    }
  }
  return report;
}

inline nlohmann::json fusion_report_to_json(const FusionReport& r) {
  using nlohmann::json;
  auto rect = [](const Box2D& b) { return json::array({b.xmin, b.ymin, b.xmax, b.ymax}); };
  json confirmed = json::array();
  for (const auto& c : r.confirmed)
    confirmed.push_back({{"box3d_id", c.box3d_id},
                         {"box2d_id", c.box2d_id},
                         {"iou2d", c.iou2d},
                         {"class_mismatch", c.class_mismatch}});
  json wrong = json::array();
  for (const auto& w : r.wrong) {
    json e{{"box3d_id", w.box3d_id},
           {"reason", std::string(to_string(w.reason))},
           {"iou2d", w.iou2d ? json(*w.iou2d) : json(nullptr)},
           {"class_mismatch", w.class_mismatch}};
    if (w.box2d_id) e["box2d_id"] = *w.box2d_id;
    wrong.push_back(std::move(e));
  }
  json missed = json::array();
  for (const auto& m : r.missed) {
    json e{{"box2d_id", m.box2d_id}, {"rect", rect(m.rect)}};
    if (m.matched_box3d_id) e["matched_box3d_id"] = *m.matched_box3d_id;
    missed.push_back(std::move(e));
  }
  json regions = json::array();
  for (const auto& b : r.missed_image_regions) regions.push_back(rect(b));
  json projected = json::array();
  for (const auto& p : r.projected_rects) projected.push_back(p ? rect(*p) : json(nullptr));
  return json{{"palf_fusion_report", 1},
              {"mode", std::string(to_string(r.mode))},
              {"confirmed", confirmed},
              {"wrong", wrong},
              {"missed", missed},
              {"out_of_view", r.out_of_view},
              {"highlighted_wrong_points", r.highlighted_wrong_points},
              {"highlighted_missed_points", r.highlighted_missed_points},
              {"missed_image_regions", regions},
              {"projected_rects", projected},
              {"considered_2d", r.considered_2d},
              {"calibration_mismatch", r.calibration_mismatch},
              {"warnings", r.warnings}};
}

}  // namespace palf
