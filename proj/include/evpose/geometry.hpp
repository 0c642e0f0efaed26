#pragma once

#include <array>
#include <string>
#include <vector>

#include "evpose/micronet.hpp"

namespace evpose {

// Pinhole camera: 3x4 projection matrix, row-major.
struct CameraModel {
  std::array<double, 12> p{};
  int sensor_width = 346;
  int sensor_height = 260;

  double at(int r, int c) const { return p[r * 4 + c]; }
};

struct Joint3D {
  double x = 0.0, y = 0.0, z = 0.0;  // millimeters
  bool valid = true;
};

struct Pose3D {
  std::vector<Joint3D> joints;
};

struct MpjpeReport {
  double mpjpe = 0.0;
  std::vector<double> per_joint;  // mean error per joint over valid samples
  std::size_t n_samples = 0;
  std::size_t n_joints = 0;
  std::size_t n_valid = 0;  // (sample, joint) pairs counted
};

struct DegenerateProjection : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Homogeneous projection P [X Y Z 1]^T, dehomogenized.
std::pair<double, double> project(const CameraModel& cam, const Joint3D& point);

// Per-joint two-view DLT: 4x4 system solved by the smallest singular vector.
// A joint comes out invalid when either observation is invalid or the
// configuration is degenerate (near-parallel rays).
Pose3D triangulate(const CameraModel& cam_a, const CameraModel& cam_b,
                   const Pose2D& pose_a, const Pose2D& pose_b);

MpjpeReport mpjpe_2d(const std::vector<Pose2D>& pred,
                     const std::vector<Pose2D>& gt);
MpjpeReport mpjpe_3d(const std::vector<Pose3D>& pred,
                     const std::vector<Pose3D>& gt);

// JSON camera file: {"P": [12 row-major entries], "width": w, "height": h}
CameraModel load_camera(const std::string& path);
void save_camera(const CameraModel& cam, const std::string& path);

// Pose CSV: `sample,joint,u,v,valid` / `sample,joint,X,Y,Z,valid`
std::vector<Pose2D> load_poses_2d(const std::string& path);
std::vector<Pose3D> load_poses_3d(const std::string& path);
void save_poses_2d(const std::vector<Pose2D>& poses, const std::string& path);
void save_poses_3d(const std::vector<Pose3D>& poses, const std::string& path);

}  // namespace evpose
