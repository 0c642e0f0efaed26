#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evpose/edge.hpp"
#include "evpose/events.hpp"
#include "evpose/micronet.hpp"
#include "evpose/raster.hpp"

namespace evpose {

enum class WindowMode { TimeUs, Count };
enum class Precision { F64, F32 };

struct PipelineConfig {
  int sensor_width = 346;
  int sensor_height = 260;
  WindowMode window_mode = WindowMode::Count;
  std::int64_t window_value = 7500;
  int k = 4;
  double alpha = 0.5;
  double epsilon = 1e-8;
  int sample_n = 2048;
  std::uint64_t seed = 0;
  Precision precision = Precision::F64;

  void validate() const;
  std::string to_json() const;
  static PipelineConfig from_json(const std::string& text);
  static PipelineConfig from_json_file(const std::string& path);
};

std::vector<WindowSpan> make_windows(const EventStream& stream,
                                     const PipelineConfig& cfg);

// One window through rasterize -> enhance -> sample; the sampled cloud is
// what the forward pass consumes.
RasterCloud window_to_cloud(const WindowSpan& span, const PipelineConfig& cfg,
                            std::uint64_t sample_seed);

struct StageStats {
  std::string name;
  double mean_us = 0.0;
  double p50_us = 0.0;
  double p99_us = 0.0;
  std::size_t runs = 0;
};

struct BenchReport {
  std::vector<StageStats> stages;
  double events_per_sec = 0.0;  // rasterize+enhance stage throughput
  std::size_t events_per_run = 0;
  std::size_t peak_points = 0;
  std::string machine;
  PipelineConfig config;
  std::uint64_t input_checksum = 0;

  std::string to_json() const;
  std::string to_table() const;
};

struct BenchOptions {
  std::size_t runs = 100;
  std::size_t warmup = 10;
  std::vector<std::string> stages;  // empty = all
};

// Times each stage separately on a deterministic synthetic sample.
BenchReport run_bench(const PipelineConfig& cfg, const BenchOptions& opts);

// FNV-1a, used for the config-echo checksums in bench reports.
std::uint64_t fnv1a(const void* data, std::size_t size);

}  // namespace evpose
