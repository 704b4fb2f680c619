#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "palf/kitti_io.hpp"
#include "support/synthetic.hpp"

using namespace palf;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("palf_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

// Independent parser: whitespace-split one "KEY: values" line.
std::vector<double> read_calib_row(const fs::path& path, const std::string& key) {
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(key + ":", 0) != 0) continue;
    std::istringstream ss(line.substr(key.size() + 1));
    std::vector<double> out;
    double v;
    while (ss >> v) out.push_back(v);
    return out;
  }
  return {};
}

const std::string kCalibFixture = std::string(PALF_TEST_DATA_DIR) + "/kitti_calib_000000.txt";

}  // namespace

TEST(LoadPointCloud, EmptyFileGivesEmptyCloud) {
  TempDir dir;
  write_bytes(dir / "empty.bin", "");
  EXPECT_TRUE(load_point_cloud(dir / "empty.bin").empty());
}

TEST(LoadPointCloud, DecodesLittleEndianQuadruple) {
  // struct.pack("<4f", 1.0, 2.0, 3.0, 0.5), see tests/oracles/gen_oracles.py
  const unsigned char raw[16] = {0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0x40,
                                 0x00, 0x00, 0x40, 0x40, 0x00, 0x00, 0x00, 0x3f};
  TempDir dir;
  write_bytes(dir / "one.bin", std::string(reinterpret_cast<const char*>(raw), 16));
  const PointCloud cloud = load_point_cloud(dir / "one.bin");
  ASSERT_EQ(cloud.size(), 1u);
  EXPECT_EQ(cloud.points[0], Vec3(1, 2, 3));
  EXPECT_EQ(cloud.intensity[0], 0.5f);
}

TEST(LoadPointCloud, NonFinitePointsAreDroppedWithWarning) {
  PointCloud in;
  in.points = {Vec3(1, 2, 3), Vec3(NAN, 0, 0)};
  in.intensity = {0.1f, 0.2f};
  TempDir dir;
  write_bytes(dir / "nan.bin", encode_point_cloud(in));
  Warnings warnings;
  const PointCloud cloud = load_point_cloud(dir / "nan.bin", &warnings);
  ASSERT_EQ(cloud.size(), 1u);
  EXPECT_EQ(cloud.points[0], Vec3(1, 2, 3));
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("dropped 1"), std::string::npos);
}

TEST(LoadPointCloud, ByteCountLaw) {
  std::mt19937 rng(4);
  std::uniform_int_distribution<int> count(0, 50);
  for (int trial = 0; trial < 50; ++trial) {
    PointCloud in;
    const int n = count(rng);
    int bad = 0;
    for (int i = 0; i < n; ++i) {
      const bool poison = rng() % 5 == 0;
      bad += poison;
      in.points.emplace_back(poison ? INFINITY : i, i * 0.5, -i);
      in.intensity.push_back(0.5f);
    }
    const std::string bytes = encode_point_cloud(in);
    EXPECT_EQ(parse_point_cloud(bytes).size(), bytes.size() / 16 - bad);
  }
}

TEST(LoadPointCloud, TruncatedFileIsFormatError) {
  TempDir dir;
  write_bytes(dir / "bad.bin", std::string(17, '\0'));
  EXPECT_THROW(load_point_cloud(dir / "bad.bin"), FormatError);
  EXPECT_THROW(load_point_cloud(dir / "missing.bin"), IoError);
}

TEST(LoadCalibration, IdentityChain) {
  const Calibration c = parse_calibration(
      "P2: 1 0 0 0 0 1 0 0 0 0 1 0\nR0_rect: 1 0 0 0 1 0 0 0 1\n"
      "Tr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\n");
  EXPECT_EQ(c.cam_projection, (Mat34() << 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0).finished());
  EXPECT_EQ(c.rect_rotation, Mat3::Identity());
  EXPECT_EQ(c.lidar_to_cam, c.cam_projection);
  EXPECT_EQ(c.image_size, (ImageSize{1242, 375}));
}

TEST(LoadCalibration, MissingKeyIsNamed) {
  try {
    parse_calibration("P2: 1 0 0 0 0 1 0 0 0 0 1 0\nTr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\n");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("R0_rect"), std::string::npos);
  }
}

TEST(LoadCalibration, WrongArityAndGarbage) {
  EXPECT_THROW(parse_calibration("P2: 1 2 3\nR0_rect: 1 0 0 0 1 0 0 0 1\n"
                                 "Tr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\n"),
               FormatError);
  EXPECT_THROW(parse_calibration("P2: 1 0 0 0 0 1 0 0 0 0 1 x\nR0_rect: 1 0 0 0 1 0 0 0 1\n"
                                 "Tr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\n"),
               FormatError);
  EXPECT_THROW(parse_calibration("P2: 1 0 0 0 0 1 0 0 0 0 1 0\nR0_rect: 2 0 0 0 1 0 0 0 1\n"
                                 "Tr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\n"),
               FormatError);  // not orthonormal
}

TEST(LoadCalibration, RealKittiFileRowMajor) {
  const Calibration c = load_calibration(kCalibFixture);
  const auto p2 = read_calib_row(kCalibFixture, "P2");
  const auto r0 = read_calib_row(kCalibFixture, "R0_rect");
  const auto tr = read_calib_row(kCalibFixture, "Tr_velo_to_cam");
  ASSERT_EQ(p2.size(), 12u);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) {
      EXPECT_EQ(c.cam_projection(i, j), p2[i * 4 + j]);
      EXPECT_EQ(c.lidar_to_cam(i, j), tr[i * 4 + j]);
    }
    for (int j = 0; j < 3; ++j) EXPECT_EQ(c.rect_rotation(i, j), r0[i * 3 + j]);
  }
}

TEST(LoadCalibration, AlternateCameraKey) {
  const Calibration c = load_calibration(kCalibFixture, {"P3", {640, 480}});
  EXPECT_DOUBLE_EQ(c.cam_projection(0, 3), -3.341081e+02);
  EXPECT_EQ(c.image_size, (ImageSize{640, 480}));
}

TEST(PngSize, ReadsHeaderDimensions) {
  TempDir dir;
  std::string png = "\x89PNG\r\n\x1a\n";
  png += std::string("\0\0\0\x0dIHDR", 8);
  png += std::string("\0\0\x04\xda\0\0\x01\x77", 8);  // 1242 x 375
  write_bytes(dir / "img.png", png);
  const auto size = read_png_size(dir / "img.png");
  ASSERT_TRUE(size);
  EXPECT_EQ(*size, (ImageSize{1242, 375}));
  write_bytes(dir / "img.jpg", "\xff\xd8\xff\xe0 not a png at all....");
  EXPECT_FALSE(read_png_size(dir / "img.jpg"));
}

TEST(KittiLabels, CameraFrameConvertsToLidarFrame) {
  const Calibration calib = palf::testing::kitti_like_calibration();
  // Car about 10 m ahead and 2 m to the right, heading along camera +x.
  const std::string text =
      "Car 0.00 0 0.0 0 0 100 100 1.5 1.8 4.0 2.0 1.67 10.27 0.0\nDontCare -1 -1 -10 1 1 2 2 -1 -1 -1 -1000 -1000 -1000 -10\n";
  const auto dets = parse_kitti_labels(text, calib);
  ASSERT_EQ(dets.size(), 1u);
  const Box3D& b = dets[0].box;
  // camera (2.0, 1.67 - 0.75, 10.27) -> lidar x = z + 0.27, y = -x, z = -(y + 0.08)
  EXPECT_NEAR(b.position.x(), 10.54, 1e-9);
  EXPECT_NEAR(b.position.y(), -2.0, 1e-9);
  EXPECT_NEAR(b.position.z(), -1.0, 1e-9);
  EXPECT_EQ(b.scale, Vec3(4.0, 1.8, 1.5));
  EXPECT_NEAR(b.yaw, -kPi / 2, 1e-12);  // yaw = -ry - pi/2
  EXPECT_EQ(dets[0].class_label, "Car");
  EXPECT_EQ(dets[0].score, 1.0);
}

TEST(KittiLabels, WriteThenReadRecoversBoxes) {
  const Calibration calib = load_calibration(kCalibFixture);
  std::vector<Detection3D> dets = {
      {make_box(Vec3(12, 3, -0.9), Vec3(4.1, 1.7, 1.5), 0.4), "Car", 0.8},
      {make_box(Vec3(30, -6, -1.1), Vec3(3.6, 1.6, 1.4), -2.9), "Van", 0.5}};
  const auto back = parse_kitti_labels(format_kitti_labels(dets, calib), calib);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_LT((back[i].box.position - dets[i].box.position).norm(), 1e-4);
    EXPECT_LT((back[i].box.scale - dets[i].box.scale).norm(), 1e-5);
    EXPECT_NEAR(normalize_yaw(back[i].box.yaw - dets[i].box.yaw), 0.0, 1e-4);
    EXPECT_EQ(back[i].class_label, dets[i].class_label);
    EXPECT_NEAR(back[i].score, dets[i].score, 1e-6);
  }
}

TEST(KittiLabels, ShortLineIsFormatError) {
  EXPECT_THROW(parse_kitti_labels("Car 0 0 0 1 2 3\n", palf::testing::kitti_like_calibration()),
               FormatError);
}

TEST(Detections, EmptyList) {
  const auto file = parse_detections(Json::parse(R"({"boxes3d":[]})"));
  EXPECT_TRUE(file.boxes3d.empty());
  EXPECT_TRUE(file.boxes2d.empty());
}

TEST(Detections, SingleBoxFieldsPreserved) {
  const auto file = parse_detections(Json::parse(
      R"({"frame_id":"000010","boxes3d":[{"position":[10,0,-1],"scale":[4,1.8,1.6],"yaw":0.1,"class":"Car","score":0.9}],
          "boxes2d":[{"rect":[10,20,110,80],"class":"Car","score":0.7}]})"));
  ASSERT_EQ(file.boxes3d.size(), 1u);
  const Detection3D& d = file.boxes3d[0];
  EXPECT_EQ(d.box.position, Vec3(10, 0, -1));
  EXPECT_EQ(d.box.scale, Vec3(4, 1.8, 1.6));
  EXPECT_EQ(d.box.yaw, 0.1);
  EXPECT_EQ(d.score, 0.9);
  EXPECT_EQ(d.class_label, "Car");
  ASSERT_EQ(file.boxes2d.size(), 1u);
  EXPECT_EQ(file.boxes2d[0].box, (Box2D{10, 20, 110, 80}));
  EXPECT_EQ(file.frame_id, "000010");
}

TEST(Detections, ScoreClampedWithWarning) {
  Warnings warnings;
  const auto file = parse_detections(
      Json::parse(R"({"boxes3d":[{"position":[0,0,0],"scale":[1,1,1],"yaw":0,"score":1.7}]})"),
      &warnings);
  EXPECT_EQ(file.boxes3d[0].score, 1.0);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("/boxes3d/0/score"), std::string::npos);
}

TEST(Detections, ErrorsCarryJsonPointer) {
  auto error_of = [](const char* text) {
    try {
      parse_detections(Json::parse(text));
    } catch (const FormatError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(error_of(R"({"boxes3d":[{"position":[0,0,0],"scale":[1,1,1],"yaw":0},{"position":[0,0],"scale":[1,1,1],"yaw":0}]})")
                .find("/boxes3d/1/position"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"boxes3d":[{"position":[0,0,0],"scale":[1,-1,1],"yaw":0}]})")
                .find("/boxes3d/0/scale/1"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"boxes2d":[{"rect":[5,0,1,1]}]})").find("/boxes2d/0/rect"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"boxes3d":{}})").find("/boxes3d"), std::string::npos);
  EXPECT_NE(error_of(R"([1,2])").find("expected object"), std::string::npos);
}

TEST(Detections, SaveLoadRoundTrip) {
  TempDir dir;
  DetectionFile f;
  f.frame_id = "000011";
  f.boxes3d = {{make_box(Vec3(1.1, 2.2, 3.3), Vec3(4, 2, 1.5), 0.123456789), "Car", 0.42}};
  f.boxes2d = {{Box2D{1.5, 2.5, 30.25, 40.125}, "Pedestrian", 0.9}};
  save_detections(f, dir / "det.json");
  EXPECT_EQ(load_detections(dir / "det.json"), f);
}

TEST(Detections, MalformedJsonIsFormatError) {
  TempDir dir;
  write_bytes(dir / "bad.json", "{\"boxes3d\": [");
  EXPECT_THROW(load_detections(dir / "bad.json"), FormatError);
}

TEST(Session, EmptyRoundTrip) {
  TempDir dir;
  AnnotationSession s;
  s.frame_id = "000000";
  save_session(s, dir / "s.json");
  EXPECT_EQ(load_session(dir / "s.json"), s);
}

TEST(Session, MixedStatusesRoundTripInOrder) {
  TempDir dir;
  AnnotationSession s;
  s.frame_id = "000010";
  s.boxes = {{"b2", make_box(Vec3(1, 2, 3), Vec3(4, 2, 1.5), 0.3), "Car", BoxStatus::edited},
             {"b0", make_box(Vec3(-1, 0, 0), Vec3(1, 1, 1), -1.0), "Van", BoxStatus::confirmed},
             {"b1", make_box(Vec3(7, 7, 7), Vec3(2, 2, 2), 3.0), "Car", BoxStatus::created}};
  s.timing_events = {{EventKind::box_opened, "b2", 100.0},
                     {EventKind::box_edited, "b2", 110.5},
                     {EventKind::box_confirmed, "b0", 105.0}};
  save_session(s, dir / "s.json");
  EXPECT_EQ(load_session(dir / "s.json"), s);
}

TEST(Session, RandomSessionsRoundTrip) {
  palf::testing::Rng rng(17);
  TempDir dir;
  for (int trial = 0; trial < 25; ++trial) {
    AnnotationSession s;
    s.frame_id = std::to_string(trial);
    const int n = static_cast<int>(rng() % 6);
    double t = 1.7e9;
    for (int i = 0; i < n; ++i) {
      s.boxes.push_back({"box" + std::to_string(i),
                         make_box(Vec3(palf::testing::uniform(rng, -50, 50),
                                       palf::testing::uniform(rng, -50, 50),
                                       palf::testing::uniform(rng, -2, 1)),
                                  Vec3(palf::testing::uniform(rng, 0.1, 6),
                                       palf::testing::uniform(rng, 0.1, 3),
                                       palf::testing::uniform(rng, 0.1, 3)),
                                  palf::testing::uniform(rng, -4, 4)),
                         "Car", static_cast<BoxStatus>(rng() % 4)});
      t += palf::testing::uniform(rng, 0, 30);
      s.timing_events.push_back({static_cast<EventKind>(rng() % 5), s.boxes.back().id, t});
    }
    save_session(s, dir / "r.json");
    ASSERT_EQ(load_session(dir / "r.json"), s);
  }
}

TEST(Session, DuplicateIdInFileIsFormatError) {
  TempDir dir;
  write_bytes(dir / "dup.json", R"({"palf_session":1,"frame_id":"x","boxes":[
    {"id":"a","position":[0,0,0],"scale":[1,1,1],"yaw":0,"status":"confirmed"},
    {"id":"a","position":[1,0,0],"scale":[1,1,1],"yaw":0,"status":"confirmed"}]})");
  try {
    load_session(dir / "dup.json");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("duplicate"), std::string::npos);
  }
}

TEST(Session, BadVersionStatusAndTimestamps) {
  auto parse = [](const char* text) { return session_from_json(Json::parse(text)); };
  EXPECT_THROW(parse(R"({"palf_session":2,"frame_id":"x","boxes":[]})"), FormatError);
  EXPECT_THROW(parse(R"({"palf_session":1,"frame_id":"x","boxes":[
    {"id":"a","position":[0,0,0],"scale":[1,1,1],"yaw":0,"status":"done"}]})"),
               FormatError);
  EXPECT_THROW(parse(R"({"palf_session":1,"frame_id":"x","boxes":[],"timing_events":[
    {"kind":"box_opened","box_id":"a","timestamp":5},{"kind":"box_edited","box_id":"a","timestamp":4}]})"),
               FormatError);
}

TEST(Session, SaveRejectsInvalidSession) {
  TempDir dir;
  AnnotationSession s;
  s.boxes = {{"a", Box3D{}, "", BoxStatus::confirmed}, {"a", Box3D{}, "", BoxStatus::confirmed}};
  EXPECT_THROW(save_session(s, dir / "x.json"), ValidationError);
  EXPECT_FALSE(fs::exists(dir / "x.json"));
}

TEST(ParserTotality, GarbageNeverCrashes) {
  std::mt19937 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    std::string junk(rng() % 200, '\0');
    for (char& c : junk) c = static_cast<char>(rng() % 256);
    if (trial % 3 == 0) junk = "{\"boxes3d\":[{\"position\":" + junk;
    try {
      parse_detections(parse_json_text(junk, "junk"));
    } catch (const FormatError&) {
    }
    try {
      session_from_json(parse_json_text(junk, "junk"));
    } catch (const FormatError&) {
    }
    try {
      parse_calibration(junk);
    } catch (const FormatError&) {
    }
    try {
      parse_kitti_labels(junk, palf::testing::kitti_like_calibration());
    } catch (const FormatError&) {
    }
    try {
      parse_point_cloud(junk);
    } catch (const FormatError&) {
    }
  }
  SUCCEED();
}
