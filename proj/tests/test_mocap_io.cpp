#include <doctest.h>

#include <random>
#include <string>

#include "avbench/error.hpp"
#include "avbench/mocap_io.hpp"
#include "avbench/synthetic.hpp"
#include "support.hpp"

using namespace avbench;
using namespace avbench::testing;

namespace {

std::string data_file(const std::string& name) { return read_file(std::string(AVBENCH_TEST_DATA_DIR) + "/" + name); }

const char* kTwoJointZeros = R"(HIERARCHY
ROOT root
{
  OFFSET 0 0 0
  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
  JOINT child
  {
    OFFSET 1 0 0
    CHANNELS 3 Zrotation Xrotation Yrotation
    End Site
    {
      OFFSET 0 0 0
    }
  }
}
MOTION
Frames: 2
Frame Time: 0.0333333
0 0 0 0 0 0 0 0 0
0 0 0 90 0 0 0 0 0
)";

}  // namespace

TEST_CASE("bvh: two-joint fixture") {
  const MotionClip c = parse_bvh(kTwoJointZeros);
  REQUIRE(c.frame_count() == 2);
  CHECK(c.skeleton().size() == 2);
  CHECK(c.framerate() == doctest::Approx(30.0).epsilon(1e-5));
  CHECK(c.pose(0) == Pose::identity(2));
  // root Zrotation 90 in frame 1 swings the child offset (1,0,0) onto +y
  const GlobalPose g = forward_kinematics(c.skeleton(), c.pose(1));
  CHECK((g.positions[1] - Vec3(0, 1, 0)).norm() < 1e-12);
}

TEST_CASE("bvh: channel order is honored") {
  const std::string text = R"(HIERARCHY
ROOT root
{
  OFFSET 0 0 0
  CHANNELS 3 Xrotation Yrotation Zrotation
}
MOTION
Frames: 1
Frame Time: 0.01
30 -40 50
)";
  const MotionClip c = parse_bvh(text);
  const Mat3 expected = rodrigues(Vec3::UnitX(), deg_to_rad(30)) * rodrigues(Vec3::UnitY(), deg_to_rad(-40)) *
                        rodrigues(Vec3::UnitZ(), deg_to_rad(50));
  CHECK((c.pose(0).local_rotations[0].matrix() - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(c.framerate() == 100.0);
}

TEST_CASE("bvh: length scale applies to offsets and root positions") {
  const MotionClip c = parse_bvh(data_file("golden_chain.bvh"), BvhOptions{0.01, "g"});
  CHECK(c.skeleton().rest_offset(2) == Vec3(0, 0.5, 0));
  CHECK((c.pose(1).root_translation - Vec3(0.25, 1.0, -0.5)).norm() < 1e-15);
  CHECK(c.framerate() == 30.0);
  CHECK(c.name() == "g");
}

TEST_CASE("bvh: errors carry line numbers") {
  SUBCASE("missing MOTION") {
    const std::string text = "HIERARCHY\nROOT r\n{\n  OFFSET 0 0 0\n  CHANNELS 3 Zrotation Xrotation Yrotation\n}\n";
    try {
      parse_bvh(text);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("MOTION") != std::string::npos);
      CHECK(e.line() >= 6);
    }
  }
  SUBCASE("unknown channel") {
    const std::string text =
        "HIERARCHY\nROOT r\n{\n  OFFSET 0 0 0\n  CHANNELS 3 Zrotation Wrotation Yrotation\n}\nMOTION\nFrames: 1\nFrame Time: 0.1\n0 0 0\n";
    try {
      parse_bvh(text);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 5);
      CHECK(std::string(e.what()).find("Wrotation") != std::string::npos);
    }
  }
  SUBCASE("frame-count mismatch") {
    const std::string text =
        "HIERARCHY\nROOT r\n{\n  OFFSET 0 0 0\n  CHANNELS 3 Zrotation Xrotation Yrotation\n}\nMOTION\nFrames: 3\nFrame Time: 0.1\n0 0 0\n1 1 1\n";
    try {
      parse_bvh(text);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() > 0);
      CHECK(std::string(e.what()).find("3 frames") != std::string::npos);
    }
  }
  SUBCASE("position channel on a child") {
    const std::string text =
        "HIERARCHY\nROOT r\n{\n  OFFSET 0 0 0\n  CHANNELS 3 Zrotation Xrotation Yrotation\n  JOINT c\n  {\n    OFFSET 1 0 0\n"
        "    CHANNELS 1 Xposition\n  }\n}\nMOTION\nFrames: 1\nFrame Time: 0.1\n0 0 0 0\n";
    CHECK_THROWS_AS(parse_bvh(text), ParseError);
  }
}

TEST_CASE("bvh: golden files") {
  SUBCASE("chain") {
    const Skeleton s({"hips", "spine", "head"}, {-1, 0, 1}, {Vec3::Zero(), Vec3(0, 0.1, 0), Vec3(0, 0.5, 0)});
    Pose a = Pose::identity(3);
    Pose b = Pose::identity(3);
    b.root_translation = Vec3(0.25, 1, -0.5);
    b.local_rotations[0] = Rotation::from_axis_angle(Vec3::UnitZ(), deg_to_rad(90));
    b.local_rotations[1] = Rotation::from_axis_angle(Vec3::UnitX(), deg_to_rad(-45));
    b.local_rotations[2] = Rotation::from_axis_angle(Vec3::UnitY(), deg_to_rad(30));
    const MotionClip clip("chain", s, 30.0, {a, b});
    CHECK(serialize_bvh(clip, 0.01) == data_file("golden_chain.bvh"));
  }
  SUBCASE("branching tree") {
    const Skeleton s({"pelvis", "left_leg", "arm", "hand"}, {-1, 0, 0, 2},
                     {Vec3::Zero(), Vec3(0.1, -0.05, 0), Vec3(-0.1, 0.2, 0), Vec3(0, -0.25, 0)});
    auto zxy = [](double z, double x, double y) { return from_euler_zxy(deg_to_rad(z), deg_to_rad(x), deg_to_rad(y)); };
    Pose a = Pose::identity(4);
    a.root_translation = Vec3(0, 0.9, 0);
    a.local_rotations[1] = zxy(10, 20, 30);
    a.local_rotations[3] = zxy(-30, 0, 45);
    Pose b = Pose::identity(4);
    b.root_translation = Vec3(0.015, 0.92, -0.03);
    b.local_rotations[0] = zxy(5, -10, 15);
    b.local_rotations[2] = zxy(60, -20, 0);
    const MotionClip clip("branch", s, 60.0, {a, b});
    const std::string golden = data_file("golden_branch.bvh");
    CHECK(serialize_bvh(clip, 0.01) == golden);
    const MotionClip back = parse_bvh(golden, BvhOptions{0.01, "branch"});
    CHECK(back.skeleton().joint_names() == s.joint_names());
    for (std::size_t f = 0; f < 2; ++f) {
      for (std::size_t j = 0; j < 4; ++j) {
        CHECK(geodesic_angle_deg(back.pose(f).local_rotations[j], clip.pose(f).local_rotations[j]) < 1e-9);
      }
    }
  }
  SUBCASE("identity rotations serialize as zero angles") {
    const Skeleton s = two_joint_chain(Vec3(0, 1, 0));
    const std::string text = serialize_bvh(MotionClip("z", s, 60.0, {Pose::identity(2)}));
    CHECK(text.substr(text.rfind("Frame Time")).find("\n0 0 0 0 0 0 0 0 0\n") != std::string::npos);
  }
}

TEST_CASE("bvh: euler ZXY helpers") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 500; ++i) {
    const Rotation r = random_axis_angle(rng).rotation();
    const Vec3 e = euler_zxy(r);
    CHECK(geodesic_angle_deg(from_euler_zxy(e[0], e[1], e[2]), r) < 1e-6);
  }
  // gimbal lock: x = +90
  const Rotation g = from_euler_zxy(0.3, kPi / 2, 0.2);
  const Vec3 e = euler_zxy(g);
  CHECK(geodesic_angle_deg(from_euler_zxy(e[0], e[1], e[2]), g) < 1e-6);
}

TEST_CASE("bvh: serialize then parse on random clips") {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 10; ++i) {
    const MotionClip clip = random_clip(rng, "r" + std::to_string(i), 30, 60.0, kPi);
    const MotionClip back = parse_bvh(serialize_bvh(clip, 0.01), BvhOptions{0.01, clip.name()});
    REQUIRE(back.frame_count() == clip.frame_count());
    CHECK(back.skeleton().matches(clip.skeleton(), 1e-12));  // SMPL names are put back in canonical order
    CHECK(back.framerate() == 60.0);
    for (std::size_t f = 0; f < clip.frame_count(); ++f) {
      CHECK((back.pose(f).root_translation - clip.pose(f).root_translation).norm() < 1e-9);
      for (std::size_t j = 0; j < 22; ++j) {
        CHECK(geodesic_angle_deg(back.pose(f).local_rotations[j], clip.pose(f).local_rotations[j]) <= 0.01);
      }
      // per-channel Euler agreement away from gimbal lock
      for (std::size_t j = 0; j < 22; ++j) {
        const Vec3 a = euler_zxy(back.pose(f).local_rotations[j]);
        const Vec3 b = euler_zxy(clip.pose(f).local_rotations[j]);
        if (std::abs(std::abs(b[1]) - kPi / 2) < 1e-3) continue;
        for (int k = 0; k < 3; ++k) {
          const double d = std::atan2(std::sin(a[k] - b[k]), std::cos(a[k] - b[k]));  // wrap at +-180
          CHECK(rad_to_deg(std::abs(d)) <= 1e-4);
        }
      }
    }
  }
}

TEST_CASE("clip json: lossless round trip") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 5; ++i) {
    const MotionClip clip = random_clip(rng, "c" + std::to_string(i), 10, 59.94);
    const std::string text = save_clip_json(clip);
    const MotionClip back = load_clip_json(text);
    CHECK(back == clip);
    CHECK(save_clip_json(back) == text);
  }
  const MotionClip synth = synthesize_clip("s", 3, SyntheticMotionOptions{1.0, 60.0});
  CHECK(load_clip_json(save_clip_json(synth)) == synth);
}

TEST_CASE("clip json: rejections") {
  const Skeleton s = two_joint_chain(Vec3(0, 1, 0));
  const std::string good = save_clip_json(MotionClip("x", s, 60.0, {Pose::identity(2)}));
  CHECK_NOTHROW(load_clip_json(good));
  SUBCASE("version 2") {
    std::string text = good;
    text.replace(text.find("\"1\""), 3, "\"2\"");
    try {
      load_clip_json(text);
      FAIL("expected a schema error");
    } catch (const SchemaError& e) {
      CHECK(std::string(e.what()).find("version '2'") != std::string::npos);
    }
  }
  SUBCASE("NaN rotation") {
    std::string text = good;
    const auto q = text.find("quats_wxyz");
    const auto one = text.find("1.0", q);
    REQUIRE(one != std::string::npos);
    text.replace(one, 3, "NaN");
    CHECK_THROWS_AS(load_clip_json(text), SchemaError);
    text = good;
    text.replace(text.find("1.0", q), 3, "null");
    CHECK_THROWS_AS(load_clip_json(text), SchemaError);
  }
  SUBCASE("missing field") {
    std::string text = good;
    text.replace(text.find("framerate_hz"), 12, "frame_rate");
    CHECK_THROWS_AS(load_clip_json(text), SchemaError);
  }
}

TEST_CASE("reference table: rows and errors") {
  const std::string header = "condition,level,model,subset,mpjpe,mpjre,mpjve\n";
  const ReferenceTable t = load_reference_table(header + "gt_cart,,avatarposer,Up,0.72,2.52,8.1\n" +
                                                "sparse,,avatarposer,Low,6.79,6.4,44.35\n" + "noise,2,hybridtrack,Low,1,2,3\n");
  REQUIRE(t.rows.size() == 3);
  CHECK(t.rows[0].mpjpe_cm == 0.72);
  CHECK(t.rows[0].subset == BodySubsetLabel::kUp);
  CHECK_FALSE(t.rows[0].level.has_value());
  CHECK(t.rows[1].mpjve_cmps == 44.35);
  CHECK(t.rows[2].level == 2.0);
  CHECK(t.find("noise", 2.0, "hybridtrack", BodySubsetLabel::kLow) == &t.rows[2]);
  CHECK(t.find("noise", 2.0, "hybridtrack", BodySubsetLabel::kUp) == nullptr);

  CHECK(load_reference_table("").rows.empty());
  try {
    load_reference_table(header + "gt_cart,,avatarposer,Up,0.72,2.52,8.1\nnoise,1,avatarposer,Up,abc,1,1\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(load_reference_table(header + "gt_cart,,avatarposer,Torso,1,1,1\n"), ParseError);
  CHECK_THROWS_AS(load_reference_table("a,b,c\n"), ParseError);
}

TEST_CASE("reference table: shipped fixture") {
  const std::string dir = AVBENCH_DATA_DIR;
  const ReferenceTable t = load_reference_table(read_file(dir + "/reference_table1.csv"));
  // checksum recorded next to the fixture
  const std::string checksum = read_file(dir + "/reference_table1.checksum");
  std::size_t rows = 0;
  double sum = 0.0;
  for (std::size_t pos = 0; pos < checksum.size();) {
    const std::size_t end = std::min(checksum.find('\n', pos), checksum.size());
    const std::string line = checksum.substr(pos, end - pos);
    if (line.rfind("rows=", 0) == 0) rows = std::stoul(line.substr(5));
    if (line.rfind("mpjpe_sum_cm=", 0) == 0) sum = std::stod(line.substr(13));
    pos = end + 1;
  }
  CHECK(t.rows.size() == rows);
  double measured = 0.0;
  for (const ReferenceRow& r : t.rows) measured += r.mpjpe_cm;
  CHECK(measured == doctest::Approx(sum).epsilon(1e-12));

  const ReferenceRow* up = t.find("gt_cart", std::nullopt, "avatarposer", BodySubsetLabel::kUp);
  const ReferenceRow* low = t.find("gt_cart", std::nullopt, "avatarposer", BodySubsetLabel::kLow);
  REQUIRE(up != nullptr);
  REQUIRE(low != nullptr);
  CHECK(up->mpjpe_cm == 0.72);
  CHECK(up->mpjre_deg == 2.52);
  CHECK(up->mpjve_cmps == 8.1);
  CHECK(low->mpjpe_cm == 1.41);
  CHECK(low->mpjre_deg == 2.03);
  CHECK(low->mpjve_cmps == 14.19);
  const ReferenceRow* sparse_low = t.find("sparse", std::nullopt, "avatarposer", BodySubsetLabel::kLow);
  REQUIRE(sparse_low != nullptr);
  CHECK(sparse_low->mpjpe_cm == 6.79);
}

TEST_CASE("subset labels") {
  CHECK(to_string(BodySubsetLabel::kLow) == "Low");
  CHECK(parse_subset("Up") == BodySubsetLabel::kUp);
  CHECK_FALSE(parse_subset("up").has_value());
}
