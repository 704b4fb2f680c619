#pragma once

// Synthetic scene helpers shared by the unit and acceptance suites.

#include <cmath>
#include <random>
#include <vector>

#include "palf/geometry.hpp"
#include "palf/types.hpp"

namespace palf::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Points drawn uniformly (by area) over all six faces of `box`.
inline std::vector<Vec3> sample_box_surface(const Box3D& box, std::size_t n, Rng& rng) {
  const double l = box.length(), w = box.width(), h = box.height();
  const double areas[3] = {w * h, l * h, l * w};  // +-x, +-y, +-z face pairs
  std::discrete_distribution<int> pick({areas[0], areas[0], areas[1], areas[1],
                                        areas[2], areas[2]});
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  std::vector<Vec3> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int face = pick(rng);
    double x = uniform(rng, -l / 2, l / 2);
    double y = uniform(rng, -w / 2, w / 2);
    double z = uniform(rng, -h / 2, h / 2);
    const double sign = face % 2 == 0 ? 1.0 : -1.0;
    if (face / 2 == 0) x = sign * l / 2;
    if (face / 2 == 1) y = sign * w / 2;
    if (face / 2 == 2) z = sign * h / 2;
    out.push_back(box.position + Vec3(c * x - s * y, s * x + c * y, z));
  }
  return out;
}

/// LiDAR frame identical to the camera frame; P = [[f,0,cx,0],[0,f,cy,0],[0,0,1,0]].
inline Calibration identity_calibration(double f = 700.0, double cx = 600.0,
                                        double cy = 180.0, int width = 1242,
                                        int height = 375) {
  Calibration c;
  c.cam_projection << f, 0, cx, 0, 0, f, cy, 0, 0, 0, 1, 0;
  c.rect_rotation.setIdentity();
  c.lidar_to_cam << 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0;
  c.image_size = {width, height};
  return c;
}

/// KITTI-style rig: LiDAR x forward / y left / z up, camera 1.65 m above the
/// ground-level origin looking along +x.
inline Calibration kitti_like_calibration() {
  Calibration c;
  c.cam_projection << 721.5377, 0, 609.5593, 44.85728, 0, 721.5377, 172.854,
      0.2163791, 0, 0, 1, 0.002745884;
  c.rect_rotation.setIdentity();
  c.lidar_to_cam << 0, -1, 0, 0, 0, 0, -1, -0.08, 1, 0, 0, -0.27;
  c.image_size = {1242, 375};
  return c;
}

}  // namespace palf::testing
