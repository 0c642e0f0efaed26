#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace evpose {

// Per-point features: C x N, channel-major (feat[c * n_points + n]).
struct PointFeatures {
  int channels = 0;
  int n_points = 0;
  std::vector<double> feat;
  std::vector<double> t_avg;  // length n_points, each in [0,1]

  double& at(int c, int n) { return feat[std::size_t(c) * n_points + n]; }
  double at(int c, int n) const { return feat[std::size_t(c) * n_points + n]; }
};

// K x C token matrix, slice-major (t[s * channels + c]).
struct SliceTokens {
  int k = 0;
  int channels = 0;
  std::vector<double> t;

  SliceTokens() = default;
  SliceTokens(int k_, int c_)
      : k(k_), channels(c_), t(std::size_t(k_) * c_, 0.0) {}
  double& at(int s, int c) { return t[std::size_t(s) * channels + c]; }
  double at(int s, int c) const { return t[std::size_t(s) * channels + c]; }
};

// slice_id = min(floor(t_avg * K), K-1)
int slice_assign(double t_avg, int k);
std::vector<int> slice_assign(const std::vector<double>& t_avg, int k);

// Per-slice max pooling over point features; empty slices give zero tokens.
SliceTokens es_seq(const PointFeatures& pf, int k);

// One standard and one dilated 1-D conv over the K axis, kernel 3,
// dilations (1, 2), C->C channels, ReLU between, zero same-padding,
// residual add. Weights are conv[out][in][tap], flattened.
struct EtscParams {
  int channels = 0;
  std::vector<double> w1, b1;  // kernel 3, dilation 1
  std::vector<double> w2, b2;  // kernel 3, dilation 2

  explicit EtscParams(int c)
      : channels(c),
        w1(std::size_t(c) * c * 3, 0.0), b1(c, 0.0),
        w2(std::size_t(c) * c * 3, 0.0), b2(c, 0.0) {}
  EtscParams() = default;

  static EtscParams random_init(int c, std::uint64_t seed);

  std::size_t n_params() const { return w1.size() + b1.size() + w2.size() + b2.size(); }
};

SliceTokens etsc_forward(const SliceTokens& tokens, const EtscParams& params);
std::vector<SliceTokens> etsc_forward(const std::vector<SliceTokens>& batch,
                                      const EtscParams& params);

// Intermediate activations kept for the backward pass.
struct EtscCache {
  SliceTokens input;
  SliceTokens hidden_pre;   // conv1 output before ReLU
  SliceTokens hidden;       // after ReLU
};

SliceTokens etsc_forward_cached(const SliceTokens& tokens,
                                const EtscParams& params, EtscCache& cache);

// Gradients of a scalar loss w.r.t. input and parameters given dL/dy.
struct EtscGrads {
  SliceTokens d_input;
  EtscParams d_params;
};

EtscGrads etsc_backward(const SliceTokens& d_out, const EtscParams& params,
                        const EtscCache& cache);

// Mean over the K axis.
std::vector<double> temporal_global(const SliceTokens& tokens);

// [g_max; g_avg; t_global], length 3C.
std::vector<double> fuse(const std::vector<double>& g_max,
                         const std::vector<double>& g_avg,
                         const std::vector<double>& t_global);

// Flat little-endian f64 weight file with a short header; see docs/formats.md.
void save_etsc_params(const EtscParams& params, const std::string& path);
EtscParams load_etsc_params(const std::string& path);

}  // namespace evpose
