#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "evpose/geometry.hpp"
#include "evpose/rng.hpp"

using namespace evpose;

namespace {

// two cameras looking at the origin from a ring of radius r, separated by
// `angle_deg` of baseline
CameraModel ring_camera(double azimuth_rad, double radius = 2000.0) {
  CameraModel cam;
  const double f = 300.0;
  const double cx = 173.0, cy = 130.0;
  // camera center
  const double px = radius * std::cos(azimuth_rad);
  const double pz = radius * std::sin(azimuth_rad);
  // look-at rotation toward the origin, y stays up
  const double fx = -std::cos(azimuth_rad), fz = -std::sin(azimuth_rad);
  // right = forward x up
  const double rx = -fz, rz = fx;
  // rows of R: right, up, forward
  const double r_mat[3][3] = {{rx, 0, rz}, {0, 1, 0}, {fx, 0, fz}};
  const double t[3] = {-(r_mat[0][0] * px + r_mat[0][2] * pz),
                       -(r_mat[1][0] * px + r_mat[1][2] * pz),
                       -(r_mat[2][0] * px + r_mat[2][2] * pz)};
  const double k_mat[3][3] = {{f, 0, cx}, {0, f, cy}, {0, 0, 1}};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      double acc = 0;
      for (int m = 0; m < 3; ++m) acc += k_mat[r][m] * r_mat[m][c];
      cam.p[r * 4 + c] = acc;
    }
    double acc = 0;
    for (int m = 0; m < 3; ++m) acc += k_mat[r][m] * t[m];
    cam.p[r * 4 + 3] = acc;
  }
  return cam;
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("canonical camera projects by dividing by depth") {
  CameraModel cam;
  cam.p = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};
  auto [u0, v0] = project(cam, {0, 0, 1});
  CHECK(u0 == 0.0);
  CHECK(v0 == 0.0);
  auto [u1, v1] = project(cam, {2, 3, 2});
  CHECK(u1 == 1.0);
  CHECK(v1 == 1.5);
  CHECK_THROWS_AS(project(cam, {1, 1, 0}), DegenerateProjection);
}

TEST_CASE("projection matches the 3x4 multiply oracle") {
  Rng rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    CameraModel cam = ring_camera(rng.next_uniform(0, 6.28));
    Joint3D pt{rng.next_uniform(-500, 500), rng.next_uniform(-500, 500),
               rng.next_uniform(-500, 500)};
    auto [u, v] = project(cam, pt);
    double h[3];
    for (int r = 0; r < 3; ++r) {
      h[r] = cam.p[r * 4 + 0] * pt.x + cam.p[r * 4 + 1] * pt.y +
             cam.p[r * 4 + 2] * pt.z + cam.p[r * 4 + 3];
    }
    CHECK(u == doctest::Approx(h[0] / h[2]).epsilon(1e-12));
    CHECK(v == doctest::Approx(h[1] / h[2]).epsilon(1e-12));
  }
}

TEST_CASE("noise-free two-view round trip at ~90 degrees") {
  CameraModel a = ring_camera(0.0);
  CameraModel b = ring_camera(M_PI / 2);
  Rng rng(62);
  for (int trial = 0; trial < 50; ++trial) {
    Joint3D gt{rng.next_uniform(-400, 400), rng.next_uniform(-400, 400),
               rng.next_uniform(-400, 400)};
    auto [ua, va] = project(a, gt);
    auto [ub, vb] = project(b, gt);
    Pose2D pa{{{ua, va, true}}};
    Pose2D pb{{{ub, vb, true}}};
    Pose3D got = triangulate(a, b, pa, pb);
    REQUIRE(got.joints[0].valid);
    CHECK(std::abs(got.joints[0].x - gt.x) < 1e-8);
    CHECK(std::abs(got.joints[0].y - gt.y) < 1e-8);
    CHECK(std::abs(got.joints[0].z - gt.z) < 1e-8);
  }
}

TEST_CASE("round trip over random baselines of at least 20 degrees") {
  Rng rng(63);
  for (int trial = 0; trial < 60; ++trial) {
    const double az_a = rng.next_uniform(0, 6.28);
    const double sep =
        rng.next_uniform(20.0 * M_PI / 180.0, 160.0 * M_PI / 180.0);
    CameraModel a = ring_camera(az_a);
    CameraModel b = ring_camera(az_a + sep);
    Joint3D gt{rng.next_uniform(-300, 300), rng.next_uniform(-300, 300),
               rng.next_uniform(-300, 300)};
    auto [ua, va] = project(a, gt);
    auto [ub, vb] = project(b, gt);
    Pose3D got = triangulate(a, b, {{{ua, va, true}}}, {{{ub, vb, true}}});
    REQUIRE(got.joints[0].valid);
    CHECK(std::abs(got.joints[0].x - gt.x) < 1e-8);
    CHECK(std::abs(got.joints[0].y - gt.y) < 1e-8);
    CHECK(std::abs(got.joints[0].z - gt.z) < 1e-8);
  }
}

TEST_CASE("identical cameras are degenerate") {
  CameraModel a = ring_camera(0.3);
  Pose3D got = triangulate(a, a, {{{10, 20, true}}}, {{{10, 20, true}}});
  CHECK_FALSE(got.joints[0].valid);
}

TEST_CASE("invalid observation invalidates the joint") {
  CameraModel a = ring_camera(0.0);
  CameraModel b = ring_camera(1.2);
  Pose3D got = triangulate(a, b, {{{10, 20, false}}}, {{{30, 40, true}}});
  CHECK_FALSE(got.joints[0].valid);
}

TEST_CASE("mpjpe basics") {
  Pose2D p{{{10, 20, true}, {30, 40, true}}};
  CHECK(mpjpe_2d({p}, {p}).mpjpe == 0.0);

  Pose2D q = p;
  q.joints[0].u += 3;
  q.joints[0].v += 4;
  MpjpeReport r = mpjpe_2d({q}, {p});
  CHECK(r.mpjpe == doctest::Approx(2.5));  // (5 + 0) / 2
  CHECK(r.per_joint[0] == doctest::Approx(5.0));

  Pose2D single{{{0, 0, true}}};
  Pose2D off{{{3, 4, true}}};
  CHECK(mpjpe_2d({off}, {single}).mpjpe == doctest::Approx(5.0));
}

TEST_CASE("mpjpe 3d offset (1,2,2) gives exactly 3") {
  Pose3D gt{{{0, 0, 0, true}}};
  Pose3D pred{{{1, 2, 2, true}}};
  CHECK(mpjpe_3d({pred}, {gt}).mpjpe == 3.0);
  CHECK(mpjpe_3d({gt}, {gt}).mpjpe == 0.0);
}

TEST_CASE("mpjpe matches the double-loop oracle") {
  Rng rng(64);
  std::vector<Pose2D> pred, gt;
  for (int n = 0; n < 10; ++n) {
    Pose2D a, b;
    for (int j = 0; j < 13; ++j) {
      bool valid = rng.next_double() > 0.2;
      a.joints.push_back({rng.next_uniform(0, 300), rng.next_uniform(0, 200),
                          valid});
      b.joints.push_back({rng.next_uniform(0, 300), rng.next_uniform(0, 200),
                          rng.next_double() > 0.2});
    }
    pred.push_back(a);
    gt.push_back(b);
  }
  double sum = 0;
  std::size_t count = 0;
  for (int n = 0; n < 10; ++n) {
    for (int j = 0; j < 13; ++j) {
      if (!pred[n].joints[j].valid || !gt[n].joints[j].valid) continue;
      sum += std::hypot(pred[n].joints[j].u - gt[n].joints[j].u,
                        pred[n].joints[j].v - gt[n].joints[j].v);
      ++count;
    }
  }
  MpjpeReport r = mpjpe_2d(pred, gt);
  CHECK(r.mpjpe == doctest::Approx(sum / count).epsilon(1e-12));
  CHECK(r.n_valid == count);
  // symmetry
  CHECK(mpjpe_2d(gt, pred).mpjpe == doctest::Approx(r.mpjpe).epsilon(1e-12));
}

TEST_CASE("mpjpe shift equals the shift norm when poses matched") {
  Pose3D p{{{1, 2, 3, true}, {4, 5, 6, true}}};
  Pose3D shifted = p;
  for (auto& j : shifted.joints) {
    j.x += 2;
    j.y += 3;
    j.z += 6;
  }
  CHECK(mpjpe_3d({shifted}, {p}).mpjpe == doctest::Approx(7.0));
}

TEST_CASE("mpjpe error paths") {
  Pose2D p{{{1, 1, true}}};
  CHECK_THROWS_AS(mpjpe_2d({p}, {}), std::invalid_argument);
  Pose2D invalid{{{1, 1, false}}};
  CHECK_THROWS_AS(mpjpe_2d({invalid}, {invalid}), std::invalid_argument);
}

TEST_CASE("camera json and pose csv round trips") {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path();
  CameraModel cam = ring_camera(0.7);
  auto cam_path = (dir / "evpose_cam_test.json").string();
  save_camera(cam, cam_path);
  CameraModel back = load_camera(cam_path);
  for (int i = 0; i < 12; ++i) CHECK(back.p[i] == doctest::Approx(cam.p[i]));

  std::vector<Pose2D> poses{{{{1.5, 2.25, true}, {3, 4, false}}},
                            {{{5, 6, true}, {7, 8, true}}}};
  auto pose_path = (dir / "evpose_pose_test.csv").string();
  save_poses_2d(poses, pose_path);
  auto loaded = load_poses_2d(pose_path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].joints[0].u == 1.5);
  CHECK_FALSE(loaded[0].joints[1].valid);

  std::vector<Pose3D> p3{{{{1, 2, 3, true}}}};
  auto p3_path = (dir / "evpose_pose3_test.csv").string();
  save_poses_3d(p3, p3_path);
  auto loaded3 = load_poses_3d(p3_path);
  CHECK(loaded3[0].joints[0].z == 3.0);
  fs::remove(cam_path);
  fs::remove(pose_path);
  fs::remove(p3_path);
}

TEST_CASE("degenerate camera file is rejected") {
  namespace fs = std::filesystem;
  auto path = (fs::temp_directory_path() / "evpose_badcam.json").string();
  std::ofstream(path) << R"({"P":[1,0,0,0, 2,0,0,0, 3,0,0,1],"width":346,"height":260})";
  CHECK_THROWS(load_camera(path));
  fs::remove(path);
}

}  // TEST_SUITE
