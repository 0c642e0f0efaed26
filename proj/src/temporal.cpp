#include "evpose/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "evpose/detail/wire.hpp"
#include "evpose/rng.hpp"

namespace evpose {

int slice_assign(double t_avg, int k) {
  if (k < 1) throw std::invalid_argument("K must be >= 1");
  if (!(t_avg >= 0.0 && t_avg <= 1.0)) {
    throw std::invalid_argument("t_avg outside [0,1]");
  }
  return std::min(static_cast<int>(t_avg * k), k - 1);
}

std::vector<int> slice_assign(const std::vector<double>& t_avg, int k) {
  std::vector<int> out(t_avg.size());
  for (std::size_t i = 0; i < t_avg.size(); ++i) out[i] = slice_assign(t_avg[i], k);
  return out;
}

SliceTokens es_seq(const PointFeatures& pf, int k) {
  if (pf.channels < 1) throw std::invalid_argument("C must be >= 1");
  SliceTokens tokens(k, pf.channels);
  std::vector<bool> seen(k, false);
  for (int n = 0; n < pf.n_points; ++n) {
    const int s = slice_assign(pf.t_avg[n], k);
    if (!seen[s]) {
      for (int c = 0; c < pf.channels; ++c) tokens.at(s, c) = pf.at(c, n);
      seen[s] = true;
    } else {
      for (int c = 0; c < pf.channels; ++c) {
        tokens.at(s, c) = std::max(tokens.at(s, c), pf.at(c, n));
      }
    }
  }
  return tokens;  // untouched slices stay zero
}

namespace {

// y[k,co] = b[co] + sum_ci sum_tap w[co,ci,tap] * x[k + (tap-1)*dilation, ci]
void conv1d_same(const SliceTokens& x, const std::vector<double>& w,
                 const std::vector<double>& b, int dilation, SliceTokens& y) {
  const int k = x.k;
  const int c = x.channels;
  y = SliceTokens(k, c);
  for (int pos = 0; pos < k; ++pos) {
    for (int co = 0; co < c; ++co) {
      double acc = b[co];
      for (int tap = 0; tap < 3; ++tap) {
        const int src = pos + (tap - 1) * dilation;
        if (src < 0 || src >= k) continue;
        const double* wrow = &w[(std::size_t(co) * c) * 3];
        for (int ci = 0; ci < c; ++ci) {
          acc += wrow[std::size_t(ci) * 3 + tap] * x.at(src, ci);
        }
      }
      y.at(pos, co) = acc;
    }
  }
}

// transposed pass: scatter d_y back to d_x, accumulate d_w / d_b
void conv1d_backward(const SliceTokens& x, const std::vector<double>& w,
                     int dilation, const SliceTokens& d_y, SliceTokens& d_x,
                     std::vector<double>& d_w, std::vector<double>& d_b) {
  const int k = x.k;
  const int c = x.channels;
  d_x = SliceTokens(k, c);
  d_w.assign(w.size(), 0.0);
  d_b.assign(std::size_t(c), 0.0);
  for (int pos = 0; pos < k; ++pos) {
    for (int co = 0; co < c; ++co) {
      const double g = d_y.at(pos, co);
      if (g == 0.0) continue;
      d_b[co] += g;
      for (int tap = 0; tap < 3; ++tap) {
        const int src = pos + (tap - 1) * dilation;
        if (src < 0 || src >= k) continue;
        for (int ci = 0; ci < c; ++ci) {
          d_w[(std::size_t(co) * c + ci) * 3 + tap] += g * x.at(src, ci);
          d_x.at(src, ci) += g * w[(std::size_t(co) * c + ci) * 3 + tap];
        }
      }
    }
  }
}

void check_channels(const SliceTokens& tokens, const EtscParams& params) {
  if (tokens.channels != params.channels) {
    throw std::invalid_argument("token/parameter channel mismatch");
  }
  if (tokens.k < 1) throw std::invalid_argument("K must be >= 1");
}

}  // namespace

EtscParams EtscParams::random_init(int c, std::uint64_t seed) {
  EtscParams p(c);
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(3.0 * c);  // fan_in = 3*C per tap row
  for (double& v : p.w1) v = rng.next_uniform(-bound, bound);
  for (double& v : p.b1) v = rng.next_uniform(-bound, bound);
  for (double& v : p.w2) v = rng.next_uniform(-bound, bound);
  for (double& v : p.b2) v = rng.next_uniform(-bound, bound);
  return p;
}

SliceTokens etsc_forward_cached(const SliceTokens& tokens,
                                const EtscParams& params, EtscCache& cache) {
  check_channels(tokens, params);
  cache.input = tokens;
  conv1d_same(tokens, params.w1, params.b1, 1, cache.hidden_pre);
  cache.hidden = cache.hidden_pre;
  for (double& v : cache.hidden.t) v = std::max(v, 0.0);
  SliceTokens out;
  conv1d_same(cache.hidden, params.w2, params.b2, 2, out);
  for (std::size_t i = 0; i < out.t.size(); ++i) out.t[i] += tokens.t[i];
  return out;
}

SliceTokens etsc_forward(const SliceTokens& tokens, const EtscParams& params) {
  EtscCache cache;
  return etsc_forward_cached(tokens, params, cache);
}

std::vector<SliceTokens> etsc_forward(const std::vector<SliceTokens>& batch,
                                      const EtscParams& params) {
  std::vector<SliceTokens> out;
  out.reserve(batch.size());
  for (const SliceTokens& t : batch) out.push_back(etsc_forward(t, params));
  return out;
}

EtscGrads etsc_backward(const SliceTokens& d_out, const EtscParams& params,
                        const EtscCache& cache) {
  EtscGrads grads;
  grads.d_params = EtscParams(params.channels);
  SliceTokens d_hidden;
  conv1d_backward(cache.hidden, params.w2, 2, d_out, d_hidden,
                  grads.d_params.w2, grads.d_params.b2);
  // ReLU mask from the pre-activation
  for (std::size_t i = 0; i < d_hidden.t.size(); ++i) {
    if (cache.hidden_pre.t[i] <= 0.0) d_hidden.t[i] = 0.0;
  }
  conv1d_backward(cache.input, params.w1, 1, d_hidden, grads.d_input,
                  grads.d_params.w1, grads.d_params.b1);
  // residual path
  for (std::size_t i = 0; i < grads.d_input.t.size(); ++i) {
    grads.d_input.t[i] += d_out.t[i];
  }
  return grads;
}

std::vector<double> temporal_global(const SliceTokens& tokens) {
  if (tokens.k < 1) throw std::invalid_argument("K must be >= 1");
  std::vector<double> mean(tokens.channels, 0.0);
  for (int s = 0; s < tokens.k; ++s) {
    for (int c = 0; c < tokens.channels; ++c) mean[c] += tokens.at(s, c);
  }
  for (double& v : mean) v /= tokens.k;
  return mean;
}

std::vector<double> fuse(const std::vector<double>& g_max,
                         const std::vector<double>& g_avg,
                         const std::vector<double>& t_global) {
  if (g_max.size() != g_avg.size() || g_avg.size() != t_global.size()) {
    throw std::invalid_argument("fuse: length mismatch");
  }
  std::vector<double> out;
  out.reserve(3 * g_max.size());
  out.insert(out.end(), g_max.begin(), g_max.end());
  out.insert(out.end(), g_avg.begin(), g_avg.end());
  out.insert(out.end(), t_global.begin(), t_global.end());
  return out;
}

namespace {
constexpr std::uint32_t kWeightMagic = 0x57505645;  // "EVPW"
}

using detail::get_f64s;
using detail::get_u32;
using detail::put_f64s;
using detail::put_u32;

void save_etsc_params(const EtscParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  put_u32(out, kWeightMagic);
  put_u32(out, 1);  // version
  put_u32(out, std::uint32_t(params.channels));
  put_u32(out, 3);  // kernel size, conv 1
  put_u32(out, 3);  // kernel size, conv 2
  put_u32(out, 1);  // dilation, conv 1
  put_u32(out, 2);  // dilation, conv 2
  put_f64s(out, params.w1);
  put_f64s(out, params.b1);
  put_f64s(out, params.w2);
  put_f64s(out, params.b2);
}

EtscParams load_etsc_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  if (get_u32(in) != kWeightMagic) throw std::runtime_error("bad weight magic");
  if (get_u32(in) != 1) throw std::runtime_error("unsupported weight version");
  const auto c = static_cast<int>(get_u32(in));
  if (get_u32(in) != 3 || get_u32(in) != 3 || get_u32(in) != 1 ||
      get_u32(in) != 2) {
    throw std::runtime_error("unexpected kernel/dilation header");
  }
  EtscParams params(c);
  get_f64s(in, params.w1);
  get_f64s(in, params.b1);
  get_f64s(in, params.w2);
  get_f64s(in, params.b2);
  if (!in) throw std::runtime_error("weight file truncated");
  return params;
}

}  // namespace evpose
