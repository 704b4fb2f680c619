#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "palf/types.hpp"

namespace palf {

/// Corners in a fixed order: bottom face counterclockwise starting at the
/// (+length, +width) corner, then the top face in the same order.
inline std::array<Vec3, 8> box3d_corners(const Box3D& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double hl = 0.5 * box.length();
  const double hw = 0.5 * box.width();
  const double hh = 0.5 * box.height();
  constexpr double kSigns[4][2] = {{1, 1}, {-1, 1}, {-1, -1}, {1, -1}};

  std::array<Vec3, 8> out;
  for (int face = 0; face < 2; ++face) {
    const double dz = face == 0 ? -hh : hh;
    for (int k = 0; k < 4; ++k) {
      const double lx = kSigns[k][0] * hl;
      const double ly = kSigns[k][1] * hw;
      out[face * 4 + k] = box.position + Vec3(c * lx - s * ly, s * lx + c * ly, dz);
    }
  }
  return out;
}

/// Bird's-eye footprint, counterclockwise.
inline std::array<Vec2, 4> box_footprint(const Box3D& box) {
  const auto corners = box3d_corners(box);
  return {corners[0].head<2>(), corners[1].head<2>(), corners[2].head<2>(),
          corners[3].head<2>()};
}

/// Point expressed in the box frame (origin at center, x along heading).
inline Vec3 to_box_frame(const Box3D& box, const Vec3& point) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const Vec3 d = point - box.position;
  return {c * d.x() + s * d.y(), -s * d.x() + c * d.y(), d.z()};
}

/// Closed-boundary containment: points on a face count as inside.
inline bool box_contains(const Box3D& box, const Vec3& point) {
  const Vec3 local = to_box_frame(box, point);
  return std::abs(local.x()) <= 0.5 * box.length() &&
         std::abs(local.y()) <= 0.5 * box.width() &&
         std::abs(local.z()) <= 0.5 * box.height();
}

/// Ascending indices of the points inside `box`.
inline std::vector<std::size_t> points_in_box(std::span<const Vec3> points,
                                              const Box3D& box) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (box_contains(box, points[i])) out.push_back(i);
  }
  return out;
}

inline std::vector<std::size_t> points_in_box(const PointCloud& cloud,
                                              const Box3D& box) {
  return points_in_box(std::span<const Vec3>(cloud.points), box);
}

// ---------------------------------------------------------------------------
// Projection

/// Homogeneous image coordinates (u*d, v*d, d) of a LiDAR-frame point.
inline Eigen::Vector3d project_homogeneous(const Calibration& calib,
                                           const Vec3& point) {
  const Vec3 ref = calib.lidar_to_cam * point.homogeneous();
  const Vec3 rect = calib.rect_rotation * ref;
  return calib.cam_projection * rect.homogeneous();
}

inline bool inside_image(const Calibration& calib, double u, double v) {
  return u >= 0.0 && u < calib.image_size.width && v >= 0.0 &&
         v < calib.image_size.height;
}

struct Projection {
  std::vector<ImagePoint> points;
  std::vector<std::uint8_t> valid;  // 1 iff depth > 0 and inside the image
};

inline Projection project_points(const Calibration& calib,
                                 std::span<const Vec3> points) {
  Projection out;
  out.points.reserve(points.size());
  out.valid.reserve(points.size());
  for (const Vec3& p : points) {
    const Eigen::Vector3d h = project_homogeneous(calib, p);
    const double d = h.z();
    ImagePoint ip{h.x() / d, h.y() / d, d};
    const bool ok = d > 0.0 && std::isfinite(ip.u) && std::isfinite(ip.v) &&
                    inside_image(calib, ip.u, ip.v);
    if (d <= 0.0) ip.u = ip.v = 0.0;
    out.points.push_back(ip);
    out.valid.push_back(ok ? 1 : 0);
  }
  return out;
}

/// Image rectangle covering the projected box, clipped to the image.
///
/// Corners behind the camera are ignored. Returns nullopt when fewer than
/// two corners lie in front of the camera or the clipped rectangle has zero
/// width or height.
inline std::optional<Box2D> project_box3d_to_rect(const Calibration& calib,
                                                  const Box3D& box) {
  double umin = std::numeric_limits<double>::infinity();
  double vmin = umin;
  double umax = -umin;
  double vmax = -umin;
  int in_front = 0;
  for (const Vec3& corner : box3d_corners(box)) {
    const Eigen::Vector3d h = project_homogeneous(calib, corner);
    if (!(h.z() > 0.0)) continue;
    ++in_front;
    const double u = h.x() / h.z();
    const double v = h.y() / h.z();
    umin = std::min(umin, u);
    umax = std::max(umax, u);
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
  }
  if (in_front < 2) return std::nullopt;

  const double w = calib.image_size.width;
  const double h = calib.image_size.height;
  Box2D rect{std::clamp(umin, 0.0, w), std::clamp(vmin, 0.0, h),
             std::clamp(umax, 0.0, w), std::clamp(vmax, 0.0, h)};
  if (!(rect.xmax > rect.xmin) || !(rect.ymax > rect.ymin)) return std::nullopt;
  return rect;
}

// ---------------------------------------------------------------------------
// Overlap

inline double iou2d(const Box2D& a, const Box2D& b) {
  const double iw = std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin);
  const double ih = std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

namespace detail {

inline double cross2(const Vec2& a, const Vec2& b) {
  return a.x() * b.y() - a.y() * b.x();
}

inline double polygon_area(const std::vector<Vec2>& poly) {
  double twice = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i)
    twice += cross2(poly[i], poly[(i + 1) % poly.size()]);
  return 0.5 * std::abs(twice);
}

// Sutherland-Hodgman clipping of `subject` against the convex,
// counterclockwise polygon `clip`.
inline std::vector<Vec2> clip_convex(std::vector<Vec2> subject,
                                     std::span<const Vec2> clip, double eps) {
  std::vector<Vec2> next;
  for (std::size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
    const Vec2& a = clip[e];
    const Vec2 edge = clip[(e + 1) % clip.size()] - a;
    const double len = edge.norm();
    auto side = [&](const Vec2& p) { return cross2(edge, p - a) / len; };

    next.clear();
    for (std::size_t i = 0; i < subject.size(); ++i) {
      const Vec2& p = subject[i];
      const Vec2& q = subject[(i + 1) % subject.size()];
      const double sp = side(p);
      const double sq = side(q);
      const bool p_in = sp >= -eps;
      const bool q_in = sq >= -eps;
      if (p_in) next.push_back(p);
      if (p_in != q_in) {
        const double t = sp / (sp - sq);
        next.push_back(p + t * (q - p));
      }
    }
    subject.swap(next);
  }
  return subject;
}

}  // namespace detail

/// Area of the intersection of two boxes' bird's-eye footprints.
inline double bev_intersection_area(const Box3D& a, const Box3D& b) {
  const auto fa = box_footprint(a);
  const auto fb = box_footprint(b);
  const double scale = std::max({a.length(), a.width(), b.length(), b.width()});
  const auto poly = detail::clip_convex(std::vector<Vec2>(fa.begin(), fa.end()),
                                        fb, 1e-12 * scale);
  return poly.size() < 3 ? 0.0 : detail::polygon_area(poly);
}

/// Exact IoU of two yaw-only boxes: footprint overlap times vertical overlap.
inline double iou3d(const Box3D& a, const Box3D& b) {
  const double dz = std::min(a.top(), b.top()) - std::max(a.bottom(), b.bottom());
  if (dz <= 0.0) return 0.0;
  const double inter = bev_intersection_area(a, b) * dz;
  if (inter <= 0.0) return 0.0;
  const double uni = a.volume() + b.volume() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace palf
