#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evpose/raster.hpp"
#include "evpose/temporal.hpp"

namespace evpose {

// Dense layer, weights row-major (w[out * n_in + in]).
struct LinearLayer {
  int n_in = 0;
  int n_out = 0;
  std::vector<double> w;
  std::vector<double> b;

  LinearLayer() = default;
  LinearLayer(int in, int out)
      : n_in(in), n_out(out), w(std::size_t(in) * out, 0.0), b(out, 0.0) {}
};

// Shared per-point MLP (5 -> hidden... -> C, ReLU after every layer) plus a
// linear head mapping the fused 3C global vector to per-joint SimDR logits.
struct MicroNetParams {
  std::vector<LinearLayer> mlp;  // per-point layers
  LinearLayer head;              // 3C -> J * (w_bins + h_bins)
  EtscParams etsc;
  int channels = 0;   // C, output width of the last shared layer
  int joints = 13;    // DHP19 skeleton
  int w_bins = 346;
  int h_bins = 260;

  // uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)], seeded
  static MicroNetParams random_init(const std::vector<int>& mlp_dims, int joints,
                                    int w_bins, int h_bins, std::uint64_t seed);
  static MicroNetParams default_init(std::uint64_t seed, int w_bins = 346,
                                     int h_bins = 260);

  std::size_t n_params() const;
};

void save_micronet_params(const MicroNetParams& params, const std::string& path);
MicroNetParams load_micronet_params(const std::string& path);

struct SimdrLogits {
  int joints = 0;
  int w_bins = 0;
  int h_bins = 0;
  std::vector<double> x;  // joints x w_bins, row-major
  std::vector<double> y;  // joints x h_bins

  double& lx(int j, int bin) { return x[std::size_t(j) * w_bins + bin]; }
  double& ly(int j, int bin) { return y[std::size_t(j) * h_bins + bin]; }
  double lx(int j, int bin) const { return x[std::size_t(j) * w_bins + bin]; }
  double ly(int j, int bin) const { return y[std::size_t(j) * h_bins + bin]; }
};

struct Joint2D {
  double u = 0.0;
  double v = 0.0;
  bool valid = true;
};

struct Pose2D {
  std::vector<Joint2D> joints;
};

// Raw 5-D point -> normalized network input: x,y scaled by sensor dims,
// t_avg as-is, p_acc / 10, log1p(e_cnt).
std::vector<double> normalize_point(const RasterPoint& p, int width, int height);

PointFeatures pointwise_features(const RasterCloud& cloud,
                                 const MicroNetParams& params);

// Columnwise max and mean over points.
void global_pool(const PointFeatures& pf, std::vector<double>& g_max,
                 std::vector<double>& g_avg);

SimdrLogits forward(const RasterCloud& cloud, const MicroNetParams& params,
                    int k);

enum class DecodeMode { Argmax, Soft };

// Argmax (ties toward the lowest index) scaled to sensor coordinates, or
// expectation over the softmax in Soft mode.
Pose2D simdr_decode(const SimdrLogits& logits, int sensor_width,
                    int sensor_height, DecodeMode mode = DecodeMode::Argmax);

// ---- gradient checking harness ----

struct GradCheckReport {
  std::string op;
  double max_rel_err = 0.0;
  std::size_t n_checked = 0;
  std::size_t n_excluded = 0;  // kink or negligible-gradient coordinates
  bool pass = false;
};

// op in {"etsc_forward", "pointwise_features", "forward"}; compares analytic
// gradients against central finite differences (step 1e-5).
GradCheckReport grad_check(const std::string& op, std::uint64_t seed);

}  // namespace evpose
