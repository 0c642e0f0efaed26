#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evpose/events.hpp"

namespace evpose {

// Per-pixel accumulator for one temporal slice. Integer sums; the division
// for t_avg happens once at export.
struct VoxelCell {
  std::int64_t t_sum = 0;   // sum of (t - t_start)
  double p_acc = 0.0;       // integral until edge enhancement runs
  std::uint32_t e_cnt = 0;

  bool operator==(const VoxelCell&) const = default;
};

class VoxelGrid {
 public:
  VoxelGrid(int width, int height, int k, TimeWindow window);

  int width() const { return width_; }
  int height() const { return height_; }
  int k() const { return k_; }
  const TimeWindow& window() const { return window_; }

  VoxelCell& at(int slice, int y, int x) {
    return cells_[(static_cast<std::size_t>(slice) * height_ + y) * width_ + x];
  }
  const VoxelCell& at(int slice, int y, int x) const {
    return cells_[(static_cast<std::size_t>(slice) * height_ + y) * width_ + x];
  }
  const std::vector<VoxelCell>& cells() const { return cells_; }
  std::vector<VoxelCell>& cells() { return cells_; }

  bool operator==(const VoxelGrid&) const = default;

 private:
  int width_;
  int height_;
  int k_;
  TimeWindow window_;
  std::vector<VoxelCell> cells_;
};

// 5-D accumulated point of one valid voxel cell.
struct RasterPoint {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  double t_avg = 0.0;   // normalized to [0,1] over the full window
  double p_acc = 0.0;
  std::uint32_t e_cnt = 0;

  bool operator==(const RasterPoint&) const = default;
};

struct RasterCloud {
  std::vector<RasterPoint> points;
  int width = 0;
  int height = 0;
  int k = 1;
  TimeWindow window;
};

// slice index = clamp(floor(K*(t - t_start)/len), 0, K-1)
int slice_index(std::int64_t t, const TimeWindow& window, int k);

VoxelGrid rasterize(std::span<const Event> events, TimeWindow window,
                    int width, int height, int k);

// One point per cell with e_cnt > 0, slice-major then row-major order.
RasterCloud to_point_cloud(const VoxelGrid& grid);

// Uniform subset without replacement when the cloud has >= n points,
// pad by resampling with replacement otherwise.
RasterCloud sample_points(const RasterCloud& cloud, std::size_t n,
                          std::uint64_t seed);

std::string cloud_to_csv(const RasterCloud& cloud);
RasterCloud cloud_from_csv(const std::string& text, int width, int height,
                           int k, TimeWindow window);
void save_cloud(const RasterCloud& cloud, const std::string& path);
RasterCloud load_cloud(const std::string& path, int width, int height, int k,
                       TimeWindow window = {0, 1});

}  // namespace evpose
