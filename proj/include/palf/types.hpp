#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "palf/errors.hpp"

namespace palf {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat34 = Eigen::Matrix<double, 3, 4>;

inline constexpr double kPi = std::numbers::pi;

/// Wraps an angle into [-pi, pi).
inline double normalize_yaw(double yaw) {
  if (yaw >= -kPi && yaw < kPi) return yaw;  // keep exact bits when already wrapped
  double r = std::fmod(yaw + kPi, 2.0 * kPi);
  if (r < 0.0) r += 2.0 * kPi;
  r -= kPi;
  if (r >= kPi) r -= 2.0 * kPi;
  return r;
}

/// LiDAR-frame points plus optional per-point intensity.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<float> intensity;  // empty or same length as points

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// Yaw-oriented cuboid in the LiDAR frame.
///
/// `position` is the box center, `scale` is (length, width, height) with
/// length measured along the heading, and `yaw` rotates about +z.
struct Box3D {
  Vec3 position = Vec3::Zero();
  Vec3 scale = Vec3::Ones();
  double yaw = 0.0;

  double length() const { return scale.x(); }
  double width() const { return scale.y(); }
  double height() const { return scale.z(); }
  double volume() const { return scale.prod(); }
  double bottom() const { return position.z() - 0.5 * scale.z(); }
  double top() const { return position.z() + 0.5 * scale.z(); }

  bool operator==(const Box3D& other) const {
    return position == other.position && scale == other.scale &&
           yaw == other.yaw;
  }
};

inline Box3D make_box(const Vec3& position, const Vec3& scale, double yaw) {
  return Box3D{position, scale, normalize_yaw(yaw)};
}

/// Axis-aligned image rectangle, pixels, origin top-left.
struct Box2D {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double area() const { return width() * height(); }
  Vec2 center() const { return {0.5 * (xmin + xmax), 0.5 * (ymin + ymax)}; }
  bool contains(double u, double v) const {
    return u >= xmin && u <= xmax && v >= ymin && v <= ymax;
  }

  bool operator==(const Box2D&) const = default;
};

struct ImageSize {
  int width = 1242;
  int height = 375;

  bool operator==(const ImageSize&) const = default;
};

/// KITTI projection chain: LiDAR -> reference camera -> rectified camera ->
/// image plane.
struct Calibration {
  Mat34 cam_projection = Mat34::Identity();  // P2, pixels
  Mat3 rect_rotation = Mat3::Identity();     // R0_rect
  Mat34 lidar_to_cam = Mat34::Identity();    // Tr_velo_to_cam, meters
  ImageSize image_size;
};

struct ImagePoint {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

struct Detection3D {
  Box3D box;
  std::string class_label;
  double score = 1.0;

  bool operator==(const Detection3D& other) const = default;
};

struct Detection2D {
  Box2D box;
  std::string class_label;
  double score = 1.0;

  bool operator==(const Detection2D&) const = default;
};

/// First violated Box3D invariant, if any.
inline std::optional<FieldIssue> check_box(const Box3D& box) {
  static constexpr const char* kPos[] = {"position[0]", "position[1]",
                                         "position[2]"};
  static constexpr const char* kScale[] = {"scale[0] (length)",
                                           "scale[1] (width)",
                                           "scale[2] (height)"};
  for (int i = 0; i < 3; ++i) {
    if (!std::isfinite(box.position[i]))
      return FieldIssue{-1, kPos[i], "must be finite"};
  }
  for (int i = 0; i < 3; ++i) {
    if (!std::isfinite(box.scale[i]) || box.scale[i] <= 0.0)
      return FieldIssue{-1, kScale[i], "must be finite and positive"};
  }
  if (!std::isfinite(box.yaw)) return FieldIssue{-1, "yaw", "must be finite"};
  return std::nullopt;
}

inline std::optional<FieldIssue> check_rect(const Box2D& r) {
  if (!std::isfinite(r.xmin) || !std::isfinite(r.ymin) ||
      !std::isfinite(r.xmax) || !std::isfinite(r.ymax))
    return FieldIssue{-1, "rect", "must be finite"};
  if (!(r.xmin < r.xmax)) return FieldIssue{-1, "rect", "xmin must be < xmax"};
  if (!(r.ymin < r.ymax)) return FieldIssue{-1, "rect", "ymin must be < ymax"};
  return std::nullopt;
}

}  // namespace palf
