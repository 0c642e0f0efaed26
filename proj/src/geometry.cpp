#include "evpose/geometry.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

#include "nlohmann/json.hpp"

namespace evpose {

std::pair<double, double> project(const CameraModel& cam, const Joint3D& pt) {
  const double u = cam.at(0, 0) * pt.x + cam.at(0, 1) * pt.y +
                   cam.at(0, 2) * pt.z + cam.at(0, 3);
  const double v = cam.at(1, 0) * pt.x + cam.at(1, 1) * pt.y +
                   cam.at(1, 2) * pt.z + cam.at(1, 3);
  const double w = cam.at(2, 0) * pt.x + cam.at(2, 1) * pt.y +
                   cam.at(2, 2) * pt.z + cam.at(2, 3);
  if (std::abs(w) < 1e-12) {
    throw DegenerateProjection("point on the principal plane");
  }
  return {u / w, v / w};
}

Pose3D triangulate(const CameraModel& cam_a, const CameraModel& cam_b,
                   const Pose2D& pose_a, const Pose2D& pose_b) {
  if (pose_a.joints.size() != pose_b.joints.size()) {
    throw std::invalid_argument("pose joint counts differ");
  }
  Eigen::Matrix<double, 3, 4> pa, pb;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      pa(r, c) = cam_a.at(r, c);
      pb(r, c) = cam_b.at(r, c);
    }
  }
  Pose3D out;
  for (std::size_t j = 0; j < pose_a.joints.size(); ++j) {
    const Joint2D& a = pose_a.joints[j];
    const Joint2D& b = pose_b.joints[j];
    Joint3D joint;
    if (!a.valid || !b.valid) {
      joint.valid = false;
      out.joints.push_back(joint);
      continue;
    }
    Eigen::Matrix4d sys;
    sys.row(0) = a.u * pa.row(2) - pa.row(0);
    sys.row(1) = a.v * pa.row(2) - pa.row(1);
    sys.row(2) = b.u * pb.row(2) - pb.row(0);
    sys.row(3) = b.v * pb.row(2) - pb.row(1);
    Eigen::JacobiSVD<Eigen::Matrix4d> svd(sys, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    // parallel rays leave a 2-dimensional near-nullspace: the second-smallest
    // singular value collapses to the smallest (ratio tolerance 1e-10)
    if (sv(2) <= 1e-10 * sv(0)) {
      joint.valid = false;
      out.joints.push_back(joint);
      continue;
    }
    Eigen::Vector4d h = svd.matrixV().col(3);
    if (std::abs(h(3)) < 1e-14 * h.norm()) {
      joint.valid = false;  // point at infinity
      out.joints.push_back(joint);
      continue;
    }
    joint.x = h(0) / h(3);
    joint.y = h(1) / h(3);
    joint.z = h(2) / h(3);
    out.joints.push_back(joint);
  }
  return out;
}

namespace {

template <typename Pose, typename ErrFn>
MpjpeReport mpjpe_impl(const std::vector<Pose>& pred,
                       const std::vector<Pose>& gt, ErrFn&& err) {
  if (pred.size() != gt.size()) {
    throw std::invalid_argument("pred/gt sample counts differ");
  }
  MpjpeReport report;
  report.n_samples = pred.size();
  std::vector<std::size_t> joint_counts;
  for (std::size_t n = 0; n < pred.size(); ++n) {
    if (pred[n].joints.size() != gt[n].joints.size()) {
      throw std::invalid_argument("joint counts differ at sample " +
                                  std::to_string(n));
    }
    const std::size_t j_count = pred[n].joints.size();
    report.n_joints = std::max(report.n_joints, j_count);
    report.per_joint.resize(report.n_joints, 0.0);
    joint_counts.resize(report.n_joints, 0);
    for (std::size_t j = 0; j < j_count; ++j) {
      if (!pred[n].joints[j].valid || !gt[n].joints[j].valid) continue;
      const double e = err(pred[n].joints[j], gt[n].joints[j]);
      report.per_joint[j] += e;
      joint_counts[j] += 1;
      report.mpjpe += e;
      report.n_valid += 1;
    }
  }
  if (report.n_valid == 0) throw std::invalid_argument("no valid joints");
  report.mpjpe /= static_cast<double>(report.n_valid);
  for (std::size_t j = 0; j < report.per_joint.size(); ++j) {
    if (joint_counts[j] > 0) report.per_joint[j] /= joint_counts[j];
  }
  return report;
}

}  // namespace

MpjpeReport mpjpe_2d(const std::vector<Pose2D>& pred,
                     const std::vector<Pose2D>& gt) {
  return mpjpe_impl(pred, gt, [](const Joint2D& a, const Joint2D& b) {
    return std::hypot(a.u - b.u, a.v - b.v);
  });
}

MpjpeReport mpjpe_3d(const std::vector<Pose3D>& pred,
                     const std::vector<Pose3D>& gt) {
  return mpjpe_impl(pred, gt, [](const Joint3D& a, const Joint3D& b) {
    return std::hypot(a.x - b.x, a.y - b.y, a.z - b.z);
  });
}

CameraModel load_camera(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  CameraModel cam;
  const auto& p = j.at("P");
  if (p.size() != 12) throw std::runtime_error("camera P must have 12 entries");
  for (int i = 0; i < 12; ++i) cam.p[i] = p[i].get<double>();
  cam.sensor_width = j.value("width", 346);
  cam.sensor_height = j.value("height", 260);
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m(r, c) = cam.at(r, c);
  }
  if (m.fullPivLu().rank() < 3) {
    throw std::runtime_error("camera matrix is not a finite camera");
  }
  return cam;
}

void save_camera(const CameraModel& cam, const std::string& path) {
  nlohmann::json j;
  j["P"] = cam.p;
  j["width"] = cam.sensor_width;
  j["height"] = cam.sensor_height;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

namespace {

// rows keyed by (sample, joint); returns per-sample poses in sample order
template <typename Pose, typename Joint, int NCoords>
std::vector<Pose> load_pose_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::map<long, std::map<long, Joint>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.starts_with("sample,")) continue;
    long sample = 0, joint = 0;
    double coords[3] = {0, 0, 0};
    int valid = 1;
    int got;
    if constexpr (NCoords == 2) {
      got = std::sscanf(line.c_str(), "%ld,%ld,%lf,%lf,%d", &sample, &joint,
                        &coords[0], &coords[1], &valid);
      if (got != 5) {
        throw ParseError("pose CSV line " + std::to_string(line_no) +
                         ": malformed record");
      }
    } else {
      got = std::sscanf(line.c_str(), "%ld,%ld,%lf,%lf,%lf,%d", &sample, &joint,
                        &coords[0], &coords[1], &coords[2], &valid);
      if (got != 6) {
        throw ParseError("pose CSV line " + std::to_string(line_no) +
                         ": malformed record");
      }
    }
    Joint jn;
    if constexpr (NCoords == 2) {
      jn.u = coords[0];
      jn.v = coords[1];
    } else {
      jn.x = coords[0];
      jn.y = coords[1];
      jn.z = coords[2];
    }
    jn.valid = valid != 0;
    rows[sample][joint] = jn;
  }
  std::vector<Pose> poses;
  for (auto& [sample, joints] : rows) {
    Pose pose;
    long expect = 0;
    for (auto& [jid, jn] : joints) {
      if (jid != expect++) {
        throw ParseError("sample " + std::to_string(sample) +
                         ": joint ids must be contiguous from 0");
      }
      pose.joints.push_back(jn);
    }
    poses.push_back(std::move(pose));
  }
  return poses;
}

}  // namespace

std::vector<Pose2D> load_poses_2d(const std::string& path) {
  return load_pose_csv<Pose2D, Joint2D, 2>(path);
}

std::vector<Pose3D> load_poses_3d(const std::string& path) {
  return load_pose_csv<Pose3D, Joint3D, 3>(path);
}

void save_poses_2d(const std::vector<Pose2D>& poses, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "sample,joint,u,v,valid\n";
  char buf[128];
  for (std::size_t n = 0; n < poses.size(); ++n) {
    for (std::size_t j = 0; j < poses[n].joints.size(); ++j) {
      const Joint2D& jn = poses[n].joints[j];
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.9g,%.9g,%d\n", n, j, jn.u, jn.v,
                    jn.valid ? 1 : 0);
      out << buf;
    }
  }
}

void save_poses_3d(const std::vector<Pose3D>& poses, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "sample,joint,X,Y,Z,valid\n";
  char buf[160];
  for (std::size_t n = 0; n < poses.size(); ++n) {
    for (std::size_t j = 0; j < poses[n].joints.size(); ++j) {
      const Joint3D& jn = poses[n].joints[j];
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.9g,%.9g,%.9g,%d\n", n, j, jn.x,
                    jn.y, jn.z, jn.valid ? 1 : 0);
      out << buf;
    }
  }
}

}  // namespace evpose
