#pragma once

#include <vector>

#include "evpose/raster.hpp"

namespace evpose {

struct EdgeParams {
  double alpha = 0.5;     // enhancement strength in [0,1]
  double epsilon = 1e-8;  // normalization guard
};

// height x width real image, row-major
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h) : width(w), height(h), data(std::size_t(w) * h, 0.0) {}
  double& at(int y, int x) { return data[std::size_t(y) * width + x]; }
  double at(int y, int x) const { return data[std::size_t(y) * width + x]; }
};

// Cross-correlation with the classical 3x3 Sobel kernels, zero-padded
// borders, same-shape output. K_y is the transpose of K_x.
void sobel_gradients(const Image& count_map, Image& gx, Image& gy);

// E = sqrt(gx^2 + gy^2), elementwise
Image edge_magnitude(const Image& gx, const Image& gy);

// E / (max E + eps); max over the whole slice
Image normalize_edges(const Image& e, double epsilon);

// Per slice: build the e_cnt map, compute normalized edges, multiply p_acc
// by w = 1 + alpha * E~. t_avg and e_cnt are untouched; slices independent.
VoxelGrid enhance(const VoxelGrid& grid, const EdgeParams& params);

// Count map of one slice (helper shared with the CLI).
Image count_map(const VoxelGrid& grid, int slice);

}  // namespace evpose
