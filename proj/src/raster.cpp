#include "evpose/raster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "evpose/rng.hpp"

namespace evpose {

VoxelGrid::VoxelGrid(int width, int height, int k, TimeWindow window)
    : width_(width), height_(height), k_(k), window_(window),
      cells_(static_cast<std::size_t>(width) * height * k) {
  if (width <= 0 || height <= 0 || k < 1) {
    throw std::invalid_argument("grid dimensions must be positive and K >= 1");
  }
  if (window.t_start >= window.t_end) {
    throw std::invalid_argument("zero-length window");
  }
}

int slice_index(std::int64_t t, const TimeWindow& window, int k) {
  const std::int64_t len = window.length();
  auto idx = static_cast<std::int64_t>(k * (t - window.t_start) / len);
  return static_cast<int>(std::clamp<std::int64_t>(idx, 0, k - 1));
}

VoxelGrid rasterize(std::span<const Event> events, TimeWindow window,
                    int width, int height, int k) {
  VoxelGrid grid(width, height, k, window);
  for (const Event& e : events) {
    if (!window.contains(e.t)) {
      throw std::invalid_argument("event at t=" + std::to_string(e.t) +
                                  " outside window [" +
                                  std::to_string(window.t_start) + "," +
                                  std::to_string(window.t_end) + ")");
    }
    VoxelCell& cell = grid.at(slice_index(e.t, window, k), e.y, e.x);
    cell.t_sum += e.t - window.t_start;
    cell.p_acc += e.p;
    cell.e_cnt += 1;
  }
  return grid;
}

RasterCloud to_point_cloud(const VoxelGrid& grid) {
  RasterCloud cloud;
  cloud.width = grid.width();
  cloud.height = grid.height();
  cloud.k = grid.k();
  cloud.window = grid.window();
  const auto len = static_cast<double>(grid.window().length());
  for (int s = 0; s < grid.k(); ++s) {
    for (int y = 0; y < grid.height(); ++y) {
      for (int x = 0; x < grid.width(); ++x) {
        const VoxelCell& cell = grid.at(s, y, x);
        if (cell.e_cnt == 0) continue;
        RasterPoint pt;
        pt.x = static_cast<std::uint16_t>(x);
        pt.y = static_cast<std::uint16_t>(y);
        pt.t_avg = static_cast<double>(cell.t_sum) / cell.e_cnt / len;
        pt.p_acc = cell.p_acc;
        pt.e_cnt = cell.e_cnt;
        cloud.points.push_back(pt);
      }
    }
  }
  return cloud;
}

RasterCloud sample_points(const RasterCloud& cloud, std::size_t n,
                          std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample size must be >= 1");
  if (cloud.points.empty()) {
    throw std::invalid_argument("cannot sample from an empty cloud");
  }
  RasterCloud out = cloud;
  Rng rng(seed);
  const std::size_t m = cloud.points.size();
  if (m >= n) {
    // partial Fisher-Yates, first n entries are the sample
    std::vector<std::uint32_t> idx(m);
    std::iota(idx.begin(), idx.end(), 0u);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t j = i + rng.next_below(m - i);
      std::swap(idx[i], idx[j]);
    }
    out.points.clear();
    out.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.points.push_back(cloud.points[idx[i]]);
  } else {
    out.points.reserve(n);
    for (std::size_t i = m; i < n; ++i) {
      out.points.push_back(cloud.points[rng.next_below(m)]);
    }
  }
  return out;
}

std::string cloud_to_csv(const RasterCloud& cloud) {
  std::string text = "x,y,t_avg,p_acc,e_cnt\n";
  char buf[128];
  for (const RasterPoint& p : cloud.points) {
    std::snprintf(buf, sizeof buf, "%u,%u,%.9g,%.17g,%u\n", unsigned(p.x),
                  unsigned(p.y), p.t_avg, p.p_acc, p.e_cnt);
    text += buf;
  }
  return text;
}

RasterCloud cloud_from_csv(const std::string& text, int width, int height,
                           int k, TimeWindow window) {
  RasterCloud cloud;
  cloud.width = width;
  cloud.height = height;
  cloud.k = k;
  cloud.window = window;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    ++line_no;
    std::size_t eol = text.find('\n', pos);
    std::string line = text.substr(
        pos, eol == std::string::npos ? std::string::npos : eol - pos);
    pos = eol == std::string::npos ? text.size() : eol + 1;
    if (line.empty() || line.starts_with("x,")) continue;
    RasterPoint p;
    unsigned x = 0, y = 0, cnt = 0;
    if (std::sscanf(line.c_str(), "%u,%u,%lf,%lf,%u", &x, &y, &p.t_avg,
                    &p.p_acc, &cnt) != 5) {
      throw ParseError("cloud CSV line " + std::to_string(line_no) +
                       ": malformed record");
    }
    p.x = static_cast<std::uint16_t>(x);
    p.y = static_cast<std::uint16_t>(y);
    p.e_cnt = cnt;
    cloud.points.push_back(p);
  }
  return cloud;
}

void save_cloud(const RasterCloud& cloud, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << cloud_to_csv(cloud);
}

RasterCloud load_cloud(const std::string& path, int width, int height, int k,
                       TimeWindow window) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return cloud_from_csv(text, width, height, k, window);
}

}  // namespace evpose
