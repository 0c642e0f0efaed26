#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "evpose/geometry.hpp"
#include "evpose/pipeline.hpp"
#include "evpose/temporal.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

using namespace evpose;

// Options resolve in three layers: built-in defaults, then the JSON config
// file, then explicitly passed flags.
struct ConfigLayer {
  std::string config_path;
  PipelineConfig cfg;

  void add_common(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON pipeline config file");
    cmd->add_option("--width", cfg.sensor_width, "sensor width in pixels");
    cmd->add_option("--height", cfg.sensor_height, "sensor height in pixels");
    cmd->add_option("--k", cfg.k, "temporal slice count");
    cmd->add_option("--alpha", cfg.alpha, "edge enhancement strength");
    cmd->add_option("--epsilon", cfg.epsilon, "edge normalization guard");
    cmd->add_option("--sample-n", cfg.sample_n, "points per sampled cloud");
    cmd->add_option("--seed", cfg.seed, "deterministic seed");
  }

  // flags win over the config file
  PipelineConfig resolve(CLI::App* cmd) const {
    PipelineConfig out = cfg;
    if (!config_path.empty()) {
      PipelineConfig file_cfg = PipelineConfig::from_json_file(config_path);
      PipelineConfig defaults;
      auto pick = [&](auto member, auto flag_name) {
        if (cmd->get_option(flag_name)->count() == 0) {
          out.*member = file_cfg.*member;
        }
      };
      pick(&PipelineConfig::sensor_width, "--width");
      pick(&PipelineConfig::sensor_height, "--height");
      pick(&PipelineConfig::k, "--k");
      pick(&PipelineConfig::alpha, "--alpha");
      pick(&PipelineConfig::epsilon, "--epsilon");
      pick(&PipelineConfig::sample_n, "--sample-n");
      pick(&PipelineConfig::seed, "--seed");
      out.window_mode = file_cfg.window_mode;
      out.window_value = file_cfg.window_value;
      (void)defaults;
    }
    out.validate();
    return out;
  }
};

struct WindowFlags {
  std::int64_t window_us = 0;
  std::int64_t count = 0;

  void add(CLI::App* cmd) {
    cmd->add_option("--window-us", window_us, "fixed-duration windows (us)");
    cmd->add_option("--count", count, "fixed-count windows (events)");
  }

  void apply(PipelineConfig& cfg) const {
    if (window_us > 0 && count > 0) {
      throw CLI::ValidationError("--window-us and --count are exclusive");
    }
    if (window_us > 0) {
      cfg.window_mode = WindowMode::TimeUs;
      cfg.window_value = window_us;
    } else if (count > 0) {
      cfg.window_mode = WindowMode::Count;
      cfg.window_value = count;
    }
  }
};

std::string window_file(const std::string& prefix, std::size_t idx) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%04zu.csv", idx);
  return prefix + buf;
}

// rasterize and enhance share everything except alpha
int run_raster_like(const PipelineConfig& cfg, const std::string& input,
                    const std::string& out_prefix, bool zero_one,
                    bool apply_enhance) {
  EventStream stream =
      load_events(input, cfg.sensor_width, cfg.sensor_height, zero_one);
  auto windows = make_windows(stream, cfg);
  std::size_t idx = 0;
  for (const WindowSpan& span : windows) {
    VoxelGrid grid = rasterize(span.events, span.window, cfg.sensor_width,
                               cfg.sensor_height, cfg.k);
    if (apply_enhance) grid = enhance(grid, {cfg.alpha, cfg.epsilon});
    save_cloud(to_point_cloud(grid), window_file(out_prefix, idx));
    ++idx;
  }
  std::cout << "wrote " << idx << " window cloud(s) to " << out_prefix
            << "_*.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"event-camera pose pipeline"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "generate a synthetic event stream");
  ConfigLayer synth_cfg;
  synth_cfg.add_common(synth);
  std::string synth_pattern = "random";
  double synth_rate = 10000.0;
  std::int64_t synth_duration = 100000;
  std::string synth_out;
  synth->add_option("--pattern", synth_pattern, "moving_bar|random|two_blobs");
  synth->add_option("--rate", synth_rate, "events per second");
  synth->add_option("--duration-us", synth_duration, "stream duration");
  synth->add_option("-o,--output", synth_out, "output .evb or .csv")->required();

  // ---- rasterize / enhance ----
  auto* rast = app.add_subcommand("rasterize", "events to raster point clouds");
  ConfigLayer rast_cfg;
  rast_cfg.add_common(rast);
  WindowFlags rast_win;
  rast_win.add(rast);
  std::string rast_in, rast_out;
  bool rast_p01 = false;
  rast->add_option("input", rast_in, "event file (.evb or .csv)")->required();
  rast->add_option("-o,--output", rast_out, "output prefix")->required();
  rast->add_flag("--p01", rast_p01, "input polarity encoded as {0,1}");

  auto* enh = app.add_subcommand("enhance",
                                 "events to edge-enhanced raster point clouds");
  ConfigLayer enh_cfg;
  enh_cfg.add_common(enh);
  WindowFlags enh_win;
  enh_win.add(enh);
  std::string enh_in, enh_out;
  bool enh_p01 = false;
  enh->add_option("input", enh_in, "event file (.evb or .csv)")->required();
  enh->add_option("-o,--output", enh_out, "output prefix")->required();
  enh->add_flag("--p01", enh_p01, "input polarity encoded as {0,1}");

  // ---- sliceseq ----
  auto* seq = app.add_subcommand(
      "sliceseq", "slice tokens (per-slice max of normalized point attributes)");
  ConfigLayer seq_cfg;
  seq_cfg.add_common(seq);
  std::string seq_in, seq_out;
  seq->add_option("input", seq_in, "cloud CSV")->required();
  seq->add_option("-o,--output", seq_out, "token CSV")->required();

  // ---- forward ----
  auto* fwd = app.add_subcommand("forward",
                                 "random-weight forward pass and SimDR decode");
  ConfigLayer fwd_cfg;
  fwd_cfg.add_common(fwd);
  std::string fwd_in, fwd_out, fwd_weights, fwd_save_weights;
  bool fwd_soft = false;
  fwd->add_option("input", fwd_in, "cloud CSV")->required();
  fwd->add_option("-o,--output", fwd_out, "pose CSV")->required();
  fwd->add_option("--weights", fwd_weights, "load weights instead of seeding");
  fwd->add_option("--save-weights", fwd_save_weights, "write the weights used");
  fwd->add_flag("--soft", fwd_soft, "softmax-expectation decoding");

  // ---- triangulate ----
  auto* tri = app.add_subcommand("triangulate", "two-view DLT triangulation");
  std::string tri_cam_a, tri_cam_b, tri_pose_a, tri_pose_b, tri_out;
  tri->add_option("--cam-a", tri_cam_a, "camera A JSON")->required();
  tri->add_option("--cam-b", tri_cam_b, "camera B JSON")->required();
  tri->add_option("--pose-a", tri_pose_a, "2D pose CSV, view A")->required();
  tri->add_option("--pose-b", tri_pose_b, "2D pose CSV, view B")->required();
  tri->add_option("-o,--output", tri_out, "3D pose CSV")->required();

  // ---- eval ----
  auto* eval = app.add_subcommand("eval", "MPJPE between two pose files");
  std::string eval_pred, eval_gt;
  int eval_dim = 2;
  eval->add_option("--pred", eval_pred, "predicted pose CSV")->required();
  eval->add_option("--gt", eval_gt, "ground-truth pose CSV")->required();
  eval->add_option("--dim", eval_dim, "2 or 3")
      ->check(CLI::IsMember({2, 3}));

  // ---- bench ----
  auto* bench = app.add_subcommand("bench", "per-stage latency benchmark");
  ConfigLayer bench_cfg;
  bench_cfg.add_common(bench);
  WindowFlags bench_win;
  bench_win.add(bench);
  std::size_t bench_runs = 100, bench_warmup = 10;
  std::vector<std::string> bench_stages;
  std::string bench_out;
  bench->add_option("--runs", bench_runs, "timed runs per stage");
  bench->add_option("--warmup", bench_warmup, "discarded warmup runs");
  bench->add_option("--stages", bench_stages,
                    "subset of rasterize,enhance,temporal,forward")
      ->delimiter(',');
  bench->add_option("-o,--output", bench_out, "JSON report file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth) {
      PipelineConfig cfg = synth_cfg.resolve(synth);
      SynthSpec spec;
      spec.pattern = parse_pattern(synth_pattern);
      spec.rate = synth_rate;
      spec.duration_us = synth_duration;
      spec.seed = cfg.seed;
      spec.width = cfg.sensor_width;
      spec.height = cfg.sensor_height;
      save_events(synth_events(spec), synth_out);
      std::cout << "wrote " << synth_out << "\n";
    } else if (*rast) {
      PipelineConfig cfg = rast_cfg.resolve(rast);
      rast_win.apply(cfg);
      return run_raster_like(cfg, rast_in, rast_out, rast_p01, false);
    } else if (*enh) {
      PipelineConfig cfg = enh_cfg.resolve(enh);
      enh_win.apply(cfg);
      return run_raster_like(cfg, enh_in, enh_out, enh_p01, true);
    } else if (*seq) {
      PipelineConfig cfg = seq_cfg.resolve(seq);
      RasterCloud cloud = load_cloud(seq_in, cfg.sensor_width,
                                     cfg.sensor_height, cfg.k);
      // tokens over the raw normalized 5-D attributes (C = 5)
      PointFeatures pf;
      pf.channels = 5;
      pf.n_points = static_cast<int>(cloud.points.size());
      pf.feat.resize(std::size_t(5) * pf.n_points);
      pf.t_avg.resize(pf.n_points);
      for (int i = 0; i < pf.n_points; ++i) {
        auto row = normalize_point(cloud.points[i], cfg.sensor_width,
                                   cfg.sensor_height);
        for (int c = 0; c < 5; ++c) pf.feat[std::size_t(c) * pf.n_points + i] = row[c];
        pf.t_avg[i] = cloud.points[i].t_avg;
      }
      SliceTokens tokens = es_seq(pf, cfg.k);
      std::ofstream out(seq_out, std::ios::trunc);
      if (!out) throw std::runtime_error("cannot write " + seq_out);
      out << "slice,x_n,y_n,t_avg,p_acc_n,e_cnt_log\n";
      char buf[160];
      for (int s = 0; s < tokens.k; ++s) {
        std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g,%.9g\n", s,
                      tokens.at(s, 0), tokens.at(s, 1), tokens.at(s, 2),
                      tokens.at(s, 3), tokens.at(s, 4));
        out << buf;
      }
      std::cout << "wrote " << seq_out << "\n";
    } else if (*fwd) {
      PipelineConfig cfg = fwd_cfg.resolve(fwd);
      RasterCloud cloud = load_cloud(fwd_in, cfg.sensor_width,
                                     cfg.sensor_height, cfg.k);
      if (cloud.points.empty()) throw std::runtime_error("empty input cloud");
      if (static_cast<int>(cloud.points.size()) != cfg.sample_n) {
        cloud = sample_points(cloud, static_cast<std::size_t>(cfg.sample_n),
                              cfg.seed);
      }
      MicroNetParams params =
          fwd_weights.empty()
              ? MicroNetParams::default_init(cfg.seed, cfg.sensor_width,
                                             cfg.sensor_height)
              : load_micronet_params(fwd_weights);
      if (!fwd_save_weights.empty()) {
        save_micronet_params(params, fwd_save_weights);
      }
      SimdrLogits logits = forward(cloud, params, cfg.k);
      Pose2D pose = simdr_decode(logits, cfg.sensor_width, cfg.sensor_height,
                                 fwd_soft ? DecodeMode::Soft : DecodeMode::Argmax);
      save_poses_2d({pose}, fwd_out);
      std::cout << "wrote " << fwd_out << "\n";
    } else if (*tri) {
      CameraModel cam_a = load_camera(tri_cam_a);
      CameraModel cam_b = load_camera(tri_cam_b);
      auto poses_a = load_poses_2d(tri_pose_a);
      auto poses_b = load_poses_2d(tri_pose_b);
      if (poses_a.size() != poses_b.size()) {
        throw std::runtime_error("view A and B sample counts differ");
      }
      std::vector<Pose3D> out;
      for (std::size_t i = 0; i < poses_a.size(); ++i) {
        out.push_back(triangulate(cam_a, cam_b, poses_a[i], poses_b[i]));
      }
      save_poses_3d(out, tri_out);
      std::cout << "wrote " << tri_out << "\n";
    } else if (*eval) {
      MpjpeReport report;
      if (eval_dim == 2) {
        report = mpjpe_2d(load_poses_2d(eval_pred), load_poses_2d(eval_gt));
        std::printf("MPJPE_2D %.3f px over %zu samples, %zu valid joints\n",
                    report.mpjpe, report.n_samples, report.n_valid);
      } else {
        report = mpjpe_3d(load_poses_3d(eval_pred), load_poses_3d(eval_gt));
        std::printf("MPJPE_3D %.3f mm over %zu samples, %zu valid joints\n",
                    report.mpjpe, report.n_samples, report.n_valid);
      }
    } else if (*bench) {
      PipelineConfig cfg = bench_cfg.resolve(bench);
      bench_win.apply(cfg);
      BenchOptions opts;
      opts.runs = bench_runs;
      opts.warmup = bench_warmup;
      opts.stages = bench_stages;
      BenchReport report = run_bench(cfg, opts);
      std::cout << report.to_table();
      if (!bench_out.empty()) {
        std::ofstream out(bench_out, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + bench_out);
        out << report.to_json() << "\n";
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
