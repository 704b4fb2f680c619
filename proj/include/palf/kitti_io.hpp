#pragma once

// On-disk formats: KITTI velodyne scans, calibration and label files, the
// detection interchange JSON and annotation session JSON.

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <unistd.h>

#include <Eigen/LU>

#include "json.hpp"
#include "palf/errors.hpp"
#include "palf/geometry.hpp"
#include "palf/session.hpp"
#include "palf/types.hpp"

namespace palf {

namespace fs = std::filesystem;
using Json = nlohmann::json;

/// Optional sink for non-fatal diagnostics (dropped points, clamped scores).
using Warnings = std::vector<std::string>;

namespace detail {

inline std::string read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return std::move(buf).str();
}

/// Writes `data` to a sibling temp file then renames it over `path`, so a
/// reader never sees a partially written file.
inline void write_file_atomic(const fs::path& path, const std::string& data) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  static std::atomic<unsigned> counter{0};
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." +
         std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) {
      fs::remove(tmp, ec);
      throw IoError("write failed: " + tmp.string());
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename into " + path.string());
  }
}

inline float load_le_float(const char* p) {
  std::uint32_t bits;
  std::memcpy(&bits, p, 4);
  if constexpr (std::endian::native == std::endian::big)
    bits = __builtin_bswap32(bits);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

inline void store_le_float(float f, char* p) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  if constexpr (std::endian::native == std::endian::big)
    bits = __builtin_bswap32(bits);
  std::memcpy(p, &bits, 4);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Velodyne scans

inline PointCloud parse_point_cloud(const std::string& bytes,
                                    Warnings* warnings = nullptr) {
  if (bytes.size() % 16 != 0)
    throw FormatError("velodyne payload of " + std::to_string(bytes.size()) +
                      " bytes is not a multiple of 16");
  PointCloud cloud;
  const std::size_t n = bytes.size() / 16;
  cloud.points.reserve(n);
  cloud.intensity.reserve(n);
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const char* row = bytes.data() + 16 * i;
    const float x = detail::load_le_float(row);
    const float y = detail::load_le_float(row + 4);
    const float z = detail::load_le_float(row + 8);
    const float r = detail::load_le_float(row + 12);
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z) ||
        !std::isfinite(r)) {
      ++dropped;
      continue;
    }
    cloud.points.emplace_back(x, y, z);
    cloud.intensity.push_back(r);
  }
  if (dropped > 0 && warnings)
    warnings->push_back("dropped " + std::to_string(dropped) +
                        " non-finite point(s)");
  return cloud;
}

inline PointCloud load_point_cloud(const fs::path& path,
                                   Warnings* warnings = nullptr) {
  const std::string bytes = detail::read_file_bytes(path);
  try {
    return parse_point_cloud(bytes, warnings);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

/// Packed little-endian float32 (x, y, z, intensity); missing intensity
/// is written as 0.
inline std::string encode_point_cloud(const PointCloud& cloud) {
  std::string out(cloud.size() * 16, '\0');
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    char* row = out.data() + 16 * i;
    const Vec3& p = cloud.points[i];
    detail::store_le_float(static_cast<float>(p.x()), row);
    detail::store_le_float(static_cast<float>(p.y()), row + 4);
    detail::store_le_float(static_cast<float>(p.z()), row + 8);
    detail::store_le_float(cloud.intensity.empty() ? 0.0f : cloud.intensity[i],
                           row + 12);
  }
  return out;
}

inline void save_point_cloud(const PointCloud& cloud, const fs::path& path) {
  detail::write_file_atomic(path, encode_point_cloud(cloud));
}

// ---------------------------------------------------------------------------
// Calibration

/// Width and height from a PNG header, or nullopt for anything else.
inline std::optional<ImageSize> read_png_size(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::array<unsigned char, 24> head{};
  in.read(reinterpret_cast<char*>(head.data()), head.size());
  if (in.gcount() != static_cast<std::streamsize>(head.size())) return std::nullopt;
  static constexpr unsigned char kSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (std::memcmp(head.data(), kSig, 8) != 0) return std::nullopt;
  auto be32 = [&](std::size_t at) {
    return (std::uint32_t{head[at]} << 24) | (std::uint32_t{head[at + 1]} << 16) |
           (std::uint32_t{head[at + 2]} << 8) | std::uint32_t{head[at + 3]};
  };
  const auto w = be32(16);
  const auto h = be32(20);
  if (w == 0 || h == 0 || w > 1u << 20 || h > 1u << 20) return std::nullopt;
  return ImageSize{static_cast<int>(w), static_cast<int>(h)};
}

struct CalibrationOptions {
  std::string camera_key = "P2";
  ImageSize image_size;  // KITTI calib files do not carry it
};

inline Calibration parse_calibration(const std::string& text,
                                     const CalibrationOptions& opts = {}) {
  // Only the keys we need are parsed as numbers; other lines (raw KITTI
  // files carry e.g. "calib_time: 09-Jan-2012 ...") are ignored.
  std::map<std::string, std::pair<int, std::string>> entries;
  std::istringstream lines(text);
  std::string line;
  int lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    std::string key = line.substr(0, colon);
    key.erase(0, key.find_first_not_of(" \t"));
    key.erase(key.find_last_not_of(" \t\r") + 1);
    entries[key] = {lineno, line.substr(colon + 1)};
  }

  auto take = [&](const std::string& key, std::size_t arity) {
    auto it = entries.find(key);
    if (it == entries.end()) throw FormatError("calibration missing key " + key);
    std::istringstream values(it->second.second);
    std::vector<double> row;
    std::string tok;
    while (values >> tok) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size() || !std::isfinite(v))
        throw FormatError("calibration line " + std::to_string(it->second.first) +
                          " (" + key + "): bad number '" + tok + "'");
      row.push_back(v);
    }
    if (row.size() != arity)
      throw FormatError("calibration key " + key + " has " +
                        std::to_string(row.size()) + " values, expected " +
                        std::to_string(arity));
    return row;
  };

  Calibration calib;
  const auto p = take(opts.camera_key, 12);
  const auto r = take("R0_rect", 9);
  const auto t = take("Tr_velo_to_cam", 12);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) {
      calib.cam_projection(i, j) = p[i * 4 + j];
      calib.lidar_to_cam(i, j) = t[i * 4 + j];
    }
    for (int j = 0; j < 3; ++j) calib.rect_rotation(i, j) = r[i * 3 + j];
  }
  if (opts.image_size.width <= 0 || opts.image_size.height <= 0)
    throw FormatError("image size must be positive");
  calib.image_size = opts.image_size;

  const double residual =
      (calib.rect_rotation * calib.rect_rotation.transpose() - Mat3::Identity())
          .cwiseAbs()
          .maxCoeff();
  if (residual > 1e-3)
    throw FormatError("R0_rect is not orthonormal (residual " +
                      std::to_string(residual) + ")");
  return calib;
}

inline Calibration load_calibration(const fs::path& path,
                                    const CalibrationOptions& opts = {}) {
  const std::string text = detail::read_file_bytes(path);
  try {
    return parse_calibration(text, opts);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline std::string format_calibration(const Calibration& calib) {
  std::ostringstream out;
  out << std::setprecision(17);
  auto row = [&](const char* key, const auto& m) {
    out << key << ':';
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) out << ' ' << m(i, j);
    out << '\n';
  };
  row("P2", calib.cam_projection);
  row("R0_rect", calib.rect_rotation);
  row("Tr_velo_to_cam", calib.lidar_to_cam);
  return out.str();
}

// ---------------------------------------------------------------------------
// KITTI labels (camera frame) <-> LiDAR-frame boxes

namespace detail {

inline Mat3 cam_rect_from_lidar_rotation(const Calibration& c) {
  return c.rect_rotation * c.lidar_to_cam.leftCols<3>();
}

inline Vec3 lidar_to_rect(const Calibration& c, const Vec3& p) {
  return c.rect_rotation * (c.lidar_to_cam * p.homogeneous());
}

inline Vec3 rect_to_lidar(const Calibration& c, const Vec3& p) {
  const Vec3 ref = c.rect_rotation.inverse() * p;
  return c.lidar_to_cam.leftCols<3>().inverse() * (ref - c.lidar_to_cam.col(3));
}

}  // namespace detail

/// One label line converted into the LiDAR frame. The camera-frame bottom
/// center and heading are mapped through the inverse calibration chain.
inline Detection3D label_to_detection(double h, double w, double l,
                                      const Vec3& bottom_center_cam, double ry,
                                      const Calibration& calib) {
  const Vec3 center_cam = bottom_center_cam - Vec3(0.0, 0.5 * h, 0.0);
  const Vec3 center = detail::rect_to_lidar(calib, center_cam);
  const Vec3 heading_cam(std::cos(ry), 0.0, -std::sin(ry));
  const Vec3 heading =
      detail::cam_rect_from_lidar_rotation(calib).inverse() * heading_cam;
  Detection3D det;
  det.box = make_box(center, Vec3(l, w, h), std::atan2(heading.y(), heading.x()));
  return det;
}

inline std::vector<Detection3D> parse_kitti_labels(const std::string& text,
                                                   const Calibration& calib) {
  std::vector<Detection3D> out;
  std::istringstream lines(text);
  std::string line;
  int lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    std::istringstream fields(line);
    std::string type;
    if (!(fields >> type)) continue;
    if (type == "DontCare") continue;
    std::array<double, 14> v{};
    for (double& x : v) {
      if (!(fields >> x) || !std::isfinite(x))
        throw FormatError("label line " + std::to_string(lineno) +
                          ": expected 15 fields");
    }
    double score = 1.0;
    if (fields >> score) {
      if (!std::isfinite(score))
        throw FormatError("label line " + std::to_string(lineno) + ": bad score");
    }
    // type trunc occl alpha x1 y1 x2 y2 h w l x y z ry [score]
    const double h = v[7], w = v[8], l = v[9];
    if (h <= 0.0 || w <= 0.0 || l <= 0.0)
      throw FormatError("label line " + std::to_string(lineno) +
                        ": non-positive dimensions");
    Detection3D det = label_to_detection(h, w, l, Vec3(v[10], v[11], v[12]), v[13], calib);
    det.class_label = type;
    det.score = std::clamp(score, 0.0, 1.0);
    out.push_back(std::move(det));
  }
  return out;
}

inline std::vector<Detection3D> load_kitti_labels(const fs::path& path,
                                                  const Calibration& calib) {
  const std::string text = detail::read_file_bytes(path);
  try {
    return parse_kitti_labels(text, calib);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

/// KITTI label text for LiDAR-frame detections (score appended).
inline std::string format_kitti_labels(const std::vector<Detection3D>& dets,
                                       const Calibration& calib) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(6);
  for (const auto& d : dets) {
    const Box3D& b = d.box;
    // KITTI measures height along camera -y, which is tilted slightly
    // from LiDAR z; offset in the camera frame so reading back is exact.
    const Vec3 bottom =
        detail::lidar_to_rect(calib, b.position) + Vec3(0.0, 0.5 * b.height(), 0.0);
    const Vec3 heading = detail::cam_rect_from_lidar_rotation(calib) *
                         Vec3(std::cos(b.yaw), std::sin(b.yaw), 0.0);
    const double ry = normalize_yaw(std::atan2(-heading.z(), heading.x()));
    const double alpha = normalize_yaw(ry - std::atan2(bottom.x(), bottom.z()));
    const auto rect = project_box3d_to_rect(calib, b).value_or(Box2D{});
    out << (d.class_label.empty() ? "Car" : d.class_label) << " 0.00 0 " << alpha
        << ' ' << rect.xmin << ' ' << rect.ymin << ' ' << rect.xmax << ' '
        << rect.ymax << ' ' << b.height() << ' ' << b.width() << ' '
        << b.length() << ' ' << bottom.x() << ' ' << bottom.y() << ' '
        << bottom.z() << ' ' << ry << ' ' << d.score << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Detection interchange JSON

struct DetectionFile {
  std::string frame_id;
  std::vector<Detection3D> boxes3d;
  std::vector<Detection2D> boxes2d;

  bool operator==(const DetectionFile&) const = default;
};

namespace detail {

[[noreturn]] inline void format_fail(const std::string& pointer,
                                     const std::string& what) {
  throw FormatError("at " + (pointer.empty() ? std::string("/") : pointer) +
                    ": " + what);
}

inline const Json& require(const Json& obj, const std::string& key,
                           const std::string& ptr) {
  if (!obj.is_object()) format_fail(ptr, "expected object");
  auto it = obj.find(key);
  if (it == obj.end()) format_fail(ptr + "/" + key, "missing field");
  return *it;
}

inline double number_at(const Json& j, const std::string& ptr) {
  if (!j.is_number()) format_fail(ptr, "expected number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) format_fail(ptr, "expected finite number");
  return v;
}

template <std::size_t N>
std::array<double, N> numbers_at(const Json& j, const std::string& ptr) {
  if (!j.is_array() || j.size() != N)
    format_fail(ptr, "expected array of " + std::to_string(N) + " numbers");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i)
    out[i] = number_at(j[i], ptr + "/" + std::to_string(i));
  return out;
}

inline std::string string_at(const Json& j, const std::string& ptr) {
  if (!j.is_string()) format_fail(ptr, "expected string");
  return j.get<std::string>();
}

inline double score_at(const Json& obj, const std::string& ptr, Warnings* warnings) {
  auto it = obj.find("score");
  if (it == obj.end()) return 1.0;
  const double s = number_at(*it, ptr + "/score");
  if (s < 0.0 || s > 1.0) {
    if (warnings)
      warnings->push_back(ptr + "/score " + std::to_string(s) +
                          " clamped to [0,1]");
    return std::clamp(s, 0.0, 1.0);
  }
  return s;
}

inline Box3D box3d_at(const Json& obj, const std::string& ptr) {
  const auto pos = numbers_at<3>(require(obj, "position", ptr), ptr + "/position");
  const auto scale = numbers_at<3>(require(obj, "scale", ptr), ptr + "/scale");
  const double yaw = number_at(require(obj, "yaw", ptr), ptr + "/yaw");
  static constexpr const char* kExtent[3] = {"length", "width", "height"};
  for (int i = 0; i < 3; ++i)
    if (scale[i] <= 0.0)
      format_fail(ptr + "/scale/" + std::to_string(i),
                  std::string(kExtent[i]) + " must be positive");
  return make_box(Vec3(pos[0], pos[1], pos[2]), Vec3(scale[0], scale[1], scale[2]), yaw);
}

inline std::string label_at(const Json& obj, const std::string& ptr) {
  auto it = obj.find("class");
  return it == obj.end() ? std::string() : string_at(*it, ptr + "/class");
}

}  // namespace detail

inline Json box3d_to_json(const Box3D& b) {
  return Json{{"position", {b.position.x(), b.position.y(), b.position.z()}},
              {"scale", {b.scale.x(), b.scale.y(), b.scale.z()}},
              {"yaw", b.yaw}};
}

inline Json rect_to_json(const Box2D& r) {
  return Json::array({r.xmin, r.ymin, r.xmax, r.ymax});
}

inline Box2D rect_from_json(const Json& j, const std::string& ptr = "") {
  const auto v = detail::numbers_at<4>(j, ptr);
  Box2D r{v[0], v[1], v[2], v[3]};
  if (auto issue = check_rect(r)) detail::format_fail(ptr, issue->message);
  return r;
}

inline DetectionFile parse_detections(const Json& root, Warnings* warnings = nullptr) {
  if (!root.is_object()) detail::format_fail("", "expected object");
  DetectionFile out;
  if (auto it = root.find("frame_id"); it != root.end())
    out.frame_id = detail::string_at(*it, "/frame_id");
  if (auto it = root.find("boxes3d"); it != root.end()) {
    if (!it->is_array()) detail::format_fail("/boxes3d", "expected array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string ptr = "/boxes3d/" + std::to_string(i);
      const Json& e = (*it)[i];
      if (!e.is_object()) detail::format_fail(ptr, "expected object");
      Detection3D d;
      d.box = detail::box3d_at(e, ptr);
      d.class_label = detail::label_at(e, ptr);
      d.score = detail::score_at(e, ptr, warnings);
      out.boxes3d.push_back(std::move(d));
    }
  }
  if (auto it = root.find("boxes2d"); it != root.end()) {
    if (!it->is_array()) detail::format_fail("/boxes2d", "expected array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string ptr = "/boxes2d/" + std::to_string(i);
      const Json& e = (*it)[i];
      if (!e.is_object()) detail::format_fail(ptr, "expected object");
      Detection2D d;
      d.box = rect_from_json(detail::require(e, "rect", ptr), ptr + "/rect");
      d.class_label = detail::label_at(e, ptr);
      d.score = detail::score_at(e, ptr, warnings);
      out.boxes2d.push_back(std::move(d));
    }
  }
  return out;
}

inline Json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw FormatError(origin + ": invalid JSON: " + e.what());
  }
}

inline DetectionFile load_detections(const fs::path& path, Warnings* warnings = nullptr) {
  const Json root = parse_json_text(detail::read_file_bytes(path), path.string());
  try {
    return parse_detections(root, warnings);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline Json detections_to_json(const DetectionFile& file) {
  Json boxes3d = Json::array();
  for (const auto& d : file.boxes3d) {
    Json j = box3d_to_json(d.box);
    j["class"] = d.class_label;
    j["score"] = d.score;
    boxes3d.push_back(std::move(j));
  }
  Json boxes2d = Json::array();
  for (const auto& d : file.boxes2d)
    boxes2d.push_back({{"rect", rect_to_json(d.box)},
                       {"class", d.class_label},
                       {"score", d.score}});
  return Json{{"frame_id", file.frame_id}, {"boxes3d", boxes3d}, {"boxes2d", boxes2d}};
}

inline void save_detections(const DetectionFile& file, const fs::path& path) {
  detail::write_file_atomic(path, detections_to_json(file).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Annotation sessions

inline constexpr int kSessionVersion = 1;

inline Json session_box_to_json(const SessionBox& b) {
  Json j = box3d_to_json(b.box);
  j["id"] = b.id;
  j["class"] = b.class_label;
  j["status"] = std::string(to_string(b.status));
  return j;
}

inline SessionBox session_box_from_json(const Json& e, const std::string& ptr) {
  if (!e.is_object()) detail::format_fail(ptr, "expected object");
  SessionBox b;
  b.id = detail::string_at(detail::require(e, "id", ptr), ptr + "/id");
  b.box = detail::box3d_at(e, ptr);
  b.class_label = detail::label_at(e, ptr);
  if (auto it = e.find("status"); it != e.end()) {
    const auto s = parse_box_status(detail::string_at(*it, ptr + "/status"));
    if (!s) detail::format_fail(ptr + "/status", "unknown status");
    b.status = *s;
  }
  return b;
}

inline Json timing_event_to_json(const TimingEvent& e) {
  return Json{{"kind", std::string(to_string(e.kind))},
              {"box_id", e.box_id},
              {"timestamp", e.timestamp}};
}

inline TimingEvent timing_event_from_json(const Json& e, const std::string& ptr) {
  if (!e.is_object()) detail::format_fail(ptr, "expected object");
  TimingEvent ev;
  const auto kind =
      parse_event_kind(detail::string_at(detail::require(e, "kind", ptr), ptr + "/kind"));
  if (!kind) detail::format_fail(ptr + "/kind", "unknown event kind");
  ev.kind = *kind;
  if (auto it = e.find("box_id"); it != e.end())
    ev.box_id = detail::string_at(*it, ptr + "/box_id");
  ev.timestamp =
      detail::number_at(detail::require(e, "timestamp", ptr), ptr + "/timestamp");
  return ev;
}

inline Json session_to_json(const AnnotationSession& s) {
  Json boxes = Json::array();
  for (const auto& b : s.boxes) boxes.push_back(session_box_to_json(b));
  Json events = Json::array();
  for (const auto& e : s.timing_events) events.push_back(timing_event_to_json(e));
  return Json{{"palf_session", kSessionVersion},
              {"frame_id", s.frame_id},
              {"boxes", boxes},
              {"timing_events", events}};
}

inline AnnotationSession session_from_json(const Json& root) {
  if (!root.is_object()) detail::format_fail("", "expected object");
  const Json& version = detail::require(root, "palf_session", "");
  if (!version.is_number_integer() || version.get<int>() != kSessionVersion)
    detail::format_fail("/palf_session", "unsupported session version");
  AnnotationSession s;
  s.frame_id = detail::string_at(detail::require(root, "frame_id", ""), "/frame_id");
  const Json& boxes = detail::require(root, "boxes", "");
  if (!boxes.is_array()) detail::format_fail("/boxes", "expected array");
  for (std::size_t i = 0; i < boxes.size(); ++i)
    s.boxes.push_back(session_box_from_json(boxes[i], "/boxes/" + std::to_string(i)));
  if (auto it = root.find("timing_events"); it != root.end()) {
    if (!it->is_array()) detail::format_fail("/timing_events", "expected array");
    for (std::size_t i = 0; i < it->size(); ++i)
      s.timing_events.push_back(
          timing_event_from_json((*it)[i], "/timing_events/" + std::to_string(i)));
  }
  if (auto issues = check_session(s); !issues.empty()) {
    const auto& first = issues.front();
    const std::string list = first.field == "timestamp" ? "/timing_events/" : "/boxes/";
    detail::format_fail(list + std::to_string(first.index), first.message);
  }
  return s;
}

inline void save_session(const AnnotationSession& s, const fs::path& path) {
  if (auto issues = check_session(s); !issues.empty()) throw ValidationError(issues);
  detail::write_file_atomic(path, session_to_json(s).dump(2) + "\n");
}

inline AnnotationSession load_session(const fs::path& path) {
  const Json root = parse_json_text(detail::read_file_bytes(path), path.string());
  try {
    return session_from_json(root);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace palf
