#include "evpose/edge.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace evpose {

void sobel_gradients(const Image& count_map, Image& gx, Image& gy) {
  const int w = count_map.width;
  const int h = count_map.height;
  if (w < 1 || h < 1) throw std::invalid_argument("empty count map");
  gx = Image(w, h);
  gy = Image(w, h);
  auto sample = [&](int y, int x) -> double {
    if (x < 0 || x >= w || y < 0 || y >= h) return 0.0;  // zero padding
    return count_map.at(y, x);
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double a = sample(y - 1, x - 1), b = sample(y - 1, x),
                   c = sample(y - 1, x + 1);
      const double d = sample(y, x - 1), f = sample(y, x + 1);
      const double g = sample(y + 1, x - 1), i = sample(y + 1, x),
                   j = sample(y + 1, x + 1);
      gx.at(y, x) = (c + 2 * f + j) - (a + 2 * d + g);
      gy.at(y, x) = (g + 2 * i + j) - (a + 2 * b + c);
    }
  }
}

Image edge_magnitude(const Image& gx, const Image& gy) {
  if (gx.width != gy.width || gx.height != gy.height) {
    throw std::invalid_argument("gradient shape mismatch");
  }
  Image e(gx.width, gx.height);
  for (std::size_t i = 0; i < e.data.size(); ++i) {
    e.data[i] = std::sqrt(gx.data[i] * gx.data[i] + gy.data[i] * gy.data[i]);
  }
  return e;
}

Image normalize_edges(const Image& e, double epsilon) {
  if (epsilon <= 0) throw std::invalid_argument("epsilon must be positive");
  double max_val = 0.0;
  for (double v : e.data) max_val = std::max(max_val, v);
  Image out(e.width, e.height);
  const double denom = max_val + epsilon;
  for (std::size_t i = 0; i < e.data.size(); ++i) out.data[i] = e.data[i] / denom;
  return out;
}

Image count_map(const VoxelGrid& grid, int slice) {
  Image map(grid.width(), grid.height());
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      map.at(y, x) = grid.at(slice, y, x).e_cnt;
    }
  }
  return map;
}

VoxelGrid enhance(const VoxelGrid& grid, const EdgeParams& params) {
  if (params.alpha < 0 || params.alpha > 1) {
    throw std::invalid_argument("alpha must be in [0,1]");
  }
  VoxelGrid out = grid;
  if (params.alpha == 0.0) return out;  // exact identity
  const int w = grid.width();
  const int h = grid.height();
  // Sparse per-slice pass, identical in value to
  // normalize_edges(edge_magnitude(sobel_gradients(count_map))): the
  // magnitude is zero wherever the 3x3 neighborhood holds no events, so only
  // pixels adjacent to nonzero cells need evaluating.
  std::vector<double> mag(std::size_t(w) * h, 0.0);
  std::vector<std::uint32_t> stamp(std::size_t(w) * h, 0);
  std::uint32_t generation = 0;
  std::vector<std::size_t> nonzero;
  for (int s = 0; s < grid.k(); ++s) {
    ++generation;
    nonzero.clear();
    const std::size_t base = std::size_t(s) * h * w;
    const auto& cells = grid.cells();
    for (std::size_t i = 0; i < std::size_t(h) * w; ++i) {
      if (cells[base + i].e_cnt != 0) nonzero.push_back(i);
    }
    auto cnt = [&](int yy, int xx) -> double {
      if (xx < 0 || xx >= w || yy < 0 || yy >= h) return 0.0;
      return static_cast<double>(cells[base + std::size_t(yy) * w + xx].e_cnt);
    };
    double max_mag = 0.0;
    for (std::size_t i : nonzero) {
      const int cy = static_cast<int>(i / w);
      const int cx = static_cast<int>(i % w);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int y = cy + dy, x = cx + dx;
          if (x < 0 || x >= w || y < 0 || y >= h) continue;
          const std::size_t idx = std::size_t(y) * w + x;
          if (stamp[idx] == generation) continue;
          stamp[idx] = generation;
          const double a = cnt(y - 1, x - 1), b = cnt(y - 1, x),
                       c = cnt(y - 1, x + 1);
          const double d = cnt(y, x - 1), f = cnt(y, x + 1);
          const double g = cnt(y + 1, x - 1), ii = cnt(y + 1, x),
                       j = cnt(y + 1, x + 1);
          const double gx = (c + 2 * f + j) - (a + 2 * d + g);
          const double gy = (g + 2 * ii + j) - (a + 2 * b + c);
          const double m = std::sqrt(gx * gx + gy * gy);
          mag[idx] = m;
          max_mag = std::max(max_mag, m);
        }
      }
    }
    const double denom = max_mag + params.epsilon;
    for (std::size_t i : nonzero) {
      VoxelCell& cell = out.cells()[base + i];
      cell.p_acc *= 1.0 + params.alpha * (mag[i] / denom);
    }
  }
  return out;
}

}  // namespace evpose
