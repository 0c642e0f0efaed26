#include "evpose/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "nlohmann/json.hpp"

namespace evpose {

void PipelineConfig::validate() const {
  if (sensor_width <= 0 || sensor_height <= 0) {
    throw std::invalid_argument("sensor dimensions must be positive");
  }
  if (window_value <= 0) throw std::invalid_argument("window value must be positive");
  if (k < 1) throw std::invalid_argument("K must be >= 1");
  if (alpha < 0 || alpha > 1) throw std::invalid_argument("alpha must be in [0,1]");
  if (epsilon <= 0) throw std::invalid_argument("epsilon must be positive");
  if (sample_n < 1) throw std::invalid_argument("sample_n must be >= 1");
}

std::string PipelineConfig::to_json() const {
  nlohmann::json j;
  j["sensor_width"] = sensor_width;
  j["sensor_height"] = sensor_height;
  j["window_mode"] = window_mode == WindowMode::TimeUs ? "time_us" : "count";
  j["window_value"] = window_value;
  j["k"] = k;
  j["alpha"] = alpha;
  j["epsilon"] = epsilon;
  j["sample_n"] = sample_n;
  j["seed"] = seed;
  j["precision"] = precision == Precision::F64 ? "f64" : "f32";
  return j.dump(2);
}

PipelineConfig PipelineConfig::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  PipelineConfig cfg;
  cfg.sensor_width = j.value("sensor_width", cfg.sensor_width);
  cfg.sensor_height = j.value("sensor_height", cfg.sensor_height);
  if (j.contains("window_mode")) {
    const std::string mode = j["window_mode"];
    if (mode == "time_us") cfg.window_mode = WindowMode::TimeUs;
    else if (mode == "count") cfg.window_mode = WindowMode::Count;
    else throw std::invalid_argument("window_mode must be time_us or count");
  }
  cfg.window_value = j.value("window_value", cfg.window_value);
  cfg.k = j.value("k", cfg.k);
  cfg.alpha = j.value("alpha", cfg.alpha);
  cfg.epsilon = j.value("epsilon", cfg.epsilon);
  cfg.sample_n = j.value("sample_n", cfg.sample_n);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("precision")) {
    const std::string p = j["precision"];
    if (p == "f64") cfg.precision = Precision::F64;
    else if (p == "f32") cfg.precision = Precision::F32;
    else throw std::invalid_argument("precision must be f64 or f32");
  }
  cfg.validate();
  return cfg;
}

PipelineConfig PipelineConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::vector<WindowSpan> make_windows(const EventStream& stream,
                                     const PipelineConfig& cfg) {
  if (cfg.window_mode == WindowMode::TimeUs) {
    return window_iter(stream, cfg.window_value);
  }
  return window_by_count(stream, static_cast<std::size_t>(cfg.window_value));
}

RasterCloud window_to_cloud(const WindowSpan& span, const PipelineConfig& cfg,
                            std::uint64_t sample_seed) {
  VoxelGrid grid = rasterize(span.events, span.window, cfg.sensor_width,
                             cfg.sensor_height, cfg.k);
  VoxelGrid enhanced = enhance(grid, {cfg.alpha, cfg.epsilon});
  RasterCloud cloud = to_point_cloud(enhanced);
  if (cloud.points.empty()) return cloud;
  return sample_points(cloud, static_cast<std::size_t>(cfg.sample_n),
                       sample_seed);
}

std::uint64_t fnv1a(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const std::uint8_t*>(data);
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

StageStats summarize(const std::string& name, std::vector<double>& samples_us) {
  StageStats stats;
  stats.name = name;
  stats.runs = samples_us.size();
  std::sort(samples_us.begin(), samples_us.end());
  double sum = 0.0;
  for (double v : samples_us) sum += v;
  stats.mean_us = sum / samples_us.size();
  auto pct = [&](double q) {
    const auto idx = static_cast<std::size_t>(
        std::min<double>(q * (samples_us.size() - 1), samples_us.size() - 1));
    return samples_us[idx];
  };
  stats.p50_us = pct(0.50);
  stats.p99_us = pct(0.99);
  return stats;
}

template <typename Fn>
StageStats time_stage(const std::string& name, const BenchOptions& opts,
                      Fn&& fn) {
  for (std::size_t i = 0; i < opts.warmup; ++i) fn();
  std::vector<double> samples;
  samples.reserve(opts.runs);
  for (std::size_t i = 0; i < opts.runs; ++i) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    const auto stop = std::chrono::steady_clock::now();
    samples.push_back(
        std::chrono::duration<double, std::micro>(stop - start).count());
  }
  return summarize(name, samples);
}

bool stage_enabled(const BenchOptions& opts, const std::string& name) {
  if (opts.stages.empty()) return true;
  return std::find(opts.stages.begin(), opts.stages.end(), name) !=
         opts.stages.end();
}

}  // namespace

BenchReport run_bench(const PipelineConfig& cfg, const BenchOptions& opts) {
  cfg.validate();
  if (opts.runs < 1) throw std::invalid_argument("bench needs at least one run");
  BenchReport report;
  report.config = cfg;
  report.machine = "cpu-generic";
#if defined(__x86_64__)
  report.machine = "x86_64";
#elif defined(__aarch64__)
  report.machine = "aarch64";
#endif

  // one window of exactly window_value events, deterministic
  SynthSpec spec;
  spec.pattern = SynthPattern::Random;
  spec.duration_us = 130000;  // ~0.13 s per sample
  spec.rate = static_cast<double>(cfg.window_value) / spec.duration_us * 1e6;
  spec.seed = cfg.seed;
  spec.width = cfg.sensor_width;
  spec.height = cfg.sensor_height;
  EventStream stream = synth_events(spec);
  auto windows = window_by_count(stream, static_cast<std::size_t>(cfg.window_value));
  const WindowSpan& span = windows.front();
  report.events_per_run = span.events.size();
  {
    // hash packed fields; the struct itself has padding bytes
    std::vector<std::uint8_t> packed;
    packed.reserve(span.events.size() * 13);
    for (const Event& e : span.events) {
      auto push = [&](const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        packed.insert(packed.end(), b, b + n);
      };
      push(&e.x, sizeof e.x);
      push(&e.y, sizeof e.y);
      push(&e.t, sizeof e.t);
      push(&e.p, sizeof e.p);
    }
    report.input_checksum = fnv1a(packed.data(), packed.size());
  }

  VoxelGrid grid = rasterize(span.events, span.window, cfg.sensor_width,
                             cfg.sensor_height, cfg.k);
  VoxelGrid enhanced = enhance(grid, {cfg.alpha, cfg.epsilon});
  RasterCloud sampled = sample_points(to_point_cloud(enhanced),
                                      static_cast<std::size_t>(cfg.sample_n),
                                      cfg.seed);
  report.peak_points = to_point_cloud(enhanced).points.size();
  MicroNetParams params = MicroNetParams::default_init(
      cfg.seed, cfg.sensor_width, cfg.sensor_height);
  PointFeatures pf = pointwise_features(sampled, params);

  if (stage_enabled(opts, "rasterize")) {
    report.stages.push_back(time_stage("rasterize", opts, [&] {
      VoxelGrid g = rasterize(span.events, span.window, cfg.sensor_width,
                              cfg.sensor_height, cfg.k);
      (void)g;
    }));
  }
  if (stage_enabled(opts, "enhance")) {
    report.stages.push_back(time_stage("enhance", opts, [&] {
      VoxelGrid g = enhance(grid, {cfg.alpha, cfg.epsilon});
      (void)g;
    }));
  }
  if (stage_enabled(opts, "temporal")) {
    report.stages.push_back(time_stage("temporal", opts, [&] {
      SliceTokens tokens = es_seq(pf, cfg.k);
      SliceTokens refined = etsc_forward(tokens, params.etsc);
      (void)refined;
    }));
  }
  if (stage_enabled(opts, "forward")) {
    report.stages.push_back(time_stage("forward", opts, [&] {
      SimdrLogits logits = forward(sampled, params, cfg.k);
      (void)logits;
    }));
  }

  // throughput of the raster+enhance front end, events per second; medians
  // so that scheduler spikes do not dominate the figure
  double front_us = 0.0;
  for (const StageStats& s : report.stages) {
    if (s.name == "rasterize" || s.name == "enhance") front_us += s.p50_us;
  }
  if (front_us > 0.0) {
    report.events_per_sec =
        static_cast<double>(report.events_per_run) / (front_us * 1e-6);
  }
  return report;
}

std::string BenchReport::to_json() const {
  nlohmann::json j;
  j["config"] = nlohmann::json::parse(config.to_json());
  j["machine"] = machine;
  j["events_per_run"] = events_per_run;
  j["events_per_sec"] = events_per_sec;
  j["peak_points"] = peak_points;
  j["input_checksum"] = input_checksum;
  j["stages"] = nlohmann::json::array();
  for (const StageStats& s : stages) {
    j["stages"].push_back({{"name", s.name},
                           {"mean_us", s.mean_us},
                           {"p50_us", s.p50_us},
                           {"p99_us", s.p99_us},
                           {"runs", s.runs}});
  }
  return j.dump(2);
}

std::string BenchReport::to_table() const {
  std::ostringstream out;
  out << "stage        mean_us      p50_us      p99_us   runs\n";
  char buf[128];
  for (const StageStats& s : stages) {
    std::snprintf(buf, sizeof buf, "%-10s %10.2f %11.2f %11.2f %6zu\n",
                  s.name.c_str(), s.mean_us, s.p50_us, s.p99_us, s.runs);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "throughput %.3g events/s over %zu events\n",
                events_per_sec, events_per_run);
  out << buf;
  return out.str();
}

}  // namespace evpose
