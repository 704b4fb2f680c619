#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "palf/errors.hpp"
#include "palf/geometry.hpp"
#include "palf/types.hpp"

namespace palf {

struct PreannotateConfig {
  int point_threshold = 20;  // fit only when the crop holds more points
  double crop_margin_m = 0.3;
  double yaw_search_halfwidth_rad = kPi / 4.0;
  double yaw_step_rad = kPi / 180.0;
  double ground_band_m = 0.2;
  double min_score = 0.3;
  double min_extent_m = 0.05;
  std::size_t min_fit_points = 4;
};

inline std::vector<FieldIssue> check_config(const PreannotateConfig& c) {
  std::vector<FieldIssue> out;
  if (c.point_threshold < 0) out.push_back({-1, "point_threshold", "must be >= 0"});
  if (!(c.crop_margin_m > 0.0)) out.push_back({-1, "crop_margin_m", "must be > 0"});
  if (!(c.yaw_search_halfwidth_rad > 0.0))
    out.push_back({-1, "yaw_search_halfwidth_rad", "must be > 0"});
  if (!(c.yaw_step_rad > 0.0)) out.push_back({-1, "yaw_step_rad", "must be > 0"});
  if (c.yaw_step_rad > c.yaw_search_halfwidth_rad)
    out.push_back({-1, "yaw_step_rad", "must not exceed yaw_search_halfwidth_rad"});
  if (!(c.ground_band_m > 0.0)) out.push_back({-1, "ground_band_m", "must be > 0"});
  if (!(c.min_score >= 0.0 && c.min_score <= 1.0))
    out.push_back({-1, "min_score", "must lie in [0,1]"});
  return out;
}

/// Seed box grown by `margin` on every side in length and width, and by
/// `margin` upward only in height. The bottom face stays put so road
/// returns below the object are not pulled into the crop.
///
/// The bottom does get kCropFloorSlack of room: a fitted box's floor sits
/// exactly on data points, and center - h/2 can round above them, which
/// would drop the whole floor on a refit.
inline constexpr double kCropFloorSlack = 1e-6;

inline Box3D crop_region(const Box3D& seed, double margin) {
  Box3D crop = seed;
  crop.scale.x() += 2.0 * margin;
  crop.scale.y() += 2.0 * margin;
  crop.scale.z() += margin + kCropFloorSlack;
  crop.position.z() += 0.5 * (margin - kCropFloorSlack);
  return crop;
}

inline std::vector<std::size_t> crop_indices(std::span<const Vec3> points,
                                             const Box3D& seed,
                                             const PreannotateConfig& cfg) {
  return points_in_box(points, crop_region(seed, cfg.crop_margin_m));
}

/// Linear-interpolation percentile (q in [0,1]) of unsorted values.
inline double percentile(std::vector<double> values, double q) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

struct YawCandidate {
  double yaw = 0.0;
  double area = 0.0;
  double xmin = 0.0, xmax = 0.0, ymin = 0.0, ymax = 0.0;  // rotated frame
};

/// Axis-aligned bounds of the points after rotating them by -yaw.
inline YawCandidate bounding_rectangle(std::span<const Vec2> points, double yaw) {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  YawCandidate r{yaw, 0.0, std::numeric_limits<double>::infinity(),
                 -std::numeric_limits<double>::infinity(),
                 std::numeric_limits<double>::infinity(),
                 -std::numeric_limits<double>::infinity()};
  for (const Vec2& p : points) {
    const double x = c * p.x() + s * p.y();
    const double y = -s * p.x() + c * p.y();
    r.xmin = std::min(r.xmin, x);
    r.xmax = std::max(r.xmax, x);
    r.ymin = std::min(r.ymin, y);
    r.ymax = std::max(r.ymax, y);
  }
  r.area = (r.xmax - r.xmin) * (r.ymax - r.ymin);
  return r;
}

/// Yaw offsets searched around the seed: seed + k * step for
/// |k * step| <= halfwidth, ordered by k.
inline std::vector<double> yaw_grid(double seed_yaw, const PreannotateConfig& cfg) {
  const auto steps = static_cast<long>(
      std::floor(cfg.yaw_search_halfwidth_rad / cfg.yaw_step_rad + 1e-9));
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(2 * steps + 1));
  for (long k = -steps; k <= steps; ++k)
    out.push_back(seed_yaw + static_cast<double>(k) * cfg.yaw_step_rad);
  return out;
}

/// Tightens `seed` around the points it encloses.
///
/// The crop (see crop_region) is split at z_floor + ground_band_m, where
/// z_floor is the 5th percentile of crop heights; points below the split
/// only set the bottom face. The heading is the yaw in the search window
/// whose bird's-eye bounding rectangle of the remaining points has the
/// smallest area, preferring the yaw closest to the seed on ties.
inline Box3D fit_box(std::span<const Vec3> points, const Box3D& seed,
                     const PreannotateConfig& cfg = {}) {
  const auto crop = crop_indices(points, seed, cfg);
  if (crop.empty()) throw DegenerateFit("no points inside the crop region");

  std::vector<double> heights;
  heights.reserve(crop.size());
  for (auto i : crop) heights.push_back(points[i].z());
  const double z_floor = percentile(heights, 0.05);

  std::vector<Vec2> footprint;
  double z_top = -std::numeric_limits<double>::infinity();
  for (auto i : crop) {
    if (points[i].z() < z_floor + cfg.ground_band_m) continue;
    footprint.push_back(points[i].head<2>());
    z_top = std::max(z_top, points[i].z());
  }
  if (footprint.size() < cfg.min_fit_points)
    throw DegenerateFit("only " + std::to_string(footprint.size()) +
                        " non-ground points in the crop");

  const auto grid = yaw_grid(seed.yaw, cfg);
  const long half = static_cast<long>(grid.size() / 2);
  YawCandidate best;
  long best_offset = 0;
  bool have = false;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const YawCandidate cand = bounding_rectangle(footprint, grid[k]);
    const long offset = std::labs(static_cast<long>(k) - half);
    if (!have || cand.area < best.area ||
        (cand.area == best.area && offset < best_offset)) {
      best = cand;
      best_offset = offset;
      have = true;
    }
  }

  const double length = best.xmax - best.xmin;
  const double width = best.ymax - best.ymin;
  const double height = z_top - z_floor;
  if (length < cfg.min_extent_m || width < cfg.min_extent_m ||
      height < cfg.min_extent_m)
    throw DegenerateFit("fitted extent below " + std::to_string(cfg.min_extent_m) + " m");

  const double cx = 0.5 * (best.xmin + best.xmax);
  const double cy = 0.5 * (best.ymin + best.ymax);
  const double c = std::cos(best.yaw);
  const double s = std::sin(best.yaw);
  return make_box(Vec3(c * cx - s * cy, s * cx + c * cy, 0.5 * (z_top + z_floor)),
                  Vec3(length, width, height), best.yaw);
}

inline Box3D fit_box(const PointCloud& cloud, const Box3D& seed,
                     const PreannotateConfig& cfg = {}) {
  return fit_box(std::span<const Vec3>(cloud.points), seed, cfg);
}

struct PreAnnotation {
  Detection3D detection;     // box replaced by the fit when one was made
  std::size_t source_index;  // index into the input detections
  std::size_t crop_points;   // points counted against point_threshold
  bool fitted = false;
};

/// Detections scoring below min_score are dropped. Each survivor whose crop
/// holds more than point_threshold points is replaced by its fit; all
/// others (and failed fits) pass through unchanged. Input order is kept.
inline std::vector<PreAnnotation> preannotate_frame(
    const PointCloud& cloud, std::span<const Detection3D> detections,
    const PreannotateConfig& cfg = {}) {
  std::vector<PreAnnotation> out;
  const std::span<const Vec3> points(cloud.points);
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const Detection3D& det = detections[i];
    if (det.score < cfg.min_score) continue;
    PreAnnotation pa{det, i, crop_indices(points, det.box, cfg).size(), false};
    if (pa.crop_points > static_cast<std::size_t>(cfg.point_threshold)) {
      try {
        pa.detection.box = fit_box(points, det.box, cfg);
        pa.fitted = true;
      } catch (const DegenerateFit&) {
        // keep the detector's box
      }
    }
    out.push_back(std::move(pa));
  }
  return out;
}

}  // namespace palf
