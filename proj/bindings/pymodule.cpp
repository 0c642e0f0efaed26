#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "evpose/edge.hpp"
#include "evpose/geometry.hpp"
#include "evpose/micronet.hpp"
#include "evpose/pipeline.hpp"

namespace py = pybind11;
using namespace evpose;

namespace {

std::vector<Event> events_from_arrays(py::array_t<std::uint16_t> x,
                                      py::array_t<std::uint16_t> y,
                                      py::array_t<std::int64_t> t,
                                      py::array_t<std::int8_t> p) {
  auto xr = x.unchecked<1>();
  auto yr = y.unchecked<1>();
  auto tr = t.unchecked<1>();
  auto pr = p.unchecked<1>();
  const py::ssize_t n = xr.shape(0);
  if (yr.shape(0) != n || tr.shape(0) != n || pr.shape(0) != n) {
    throw std::invalid_argument("event arrays must have equal length");
  }
  std::vector<Event> events(static_cast<std::size_t>(n));
  for (py::ssize_t i = 0; i < n; ++i) {
    events[i] = Event{xr(i), yr(i), tr(i), pr(i)};
  }
  return events;
}

py::dict events_to_arrays(const std::vector<Event>& events) {
  const py::ssize_t n = static_cast<py::ssize_t>(events.size());
  py::array_t<std::uint16_t> x(n), y(n);
  py::array_t<std::int64_t> t(n);
  py::array_t<std::int8_t> p(n);
  auto xw = x.mutable_unchecked<1>();
  auto yw = y.mutable_unchecked<1>();
  auto tw = t.mutable_unchecked<1>();
  auto pw = p.mutable_unchecked<1>();
  for (py::ssize_t i = 0; i < n; ++i) {
    xw(i) = events[i].x;
    yw(i) = events[i].y;
    tw(i) = events[i].t;
    pw(i) = events[i].p;
  }
  py::dict out;
  out["x"] = x;
  out["y"] = y;
  out["t"] = t;
  out["p"] = p;
  return out;
}

py::dict grid_to_arrays(const VoxelGrid& grid) {
  const py::ssize_t k = grid.k(), h = grid.height(), w = grid.width();
  py::array_t<std::int64_t> t_sum({k, h, w});
  py::array_t<double> p_acc({k, h, w});
  py::array_t<std::uint32_t> e_cnt({k, h, w});
  auto ts = t_sum.mutable_unchecked<3>();
  auto pa = p_acc.mutable_unchecked<3>();
  auto ec = e_cnt.mutable_unchecked<3>();
  for (py::ssize_t s = 0; s < k; ++s) {
    for (py::ssize_t yy = 0; yy < h; ++yy) {
      for (py::ssize_t xx = 0; xx < w; ++xx) {
        const VoxelCell& c = grid.at(int(s), int(yy), int(xx));
        ts(s, yy, xx) = c.t_sum;
        pa(s, yy, xx) = c.p_acc;
        ec(s, yy, xx) = c.e_cnt;
      }
    }
  }
  py::dict out;
  out["t_sum"] = t_sum;
  out["p_acc"] = p_acc;
  out["e_cnt"] = e_cnt;
  out["t_start"] = grid.window().t_start;
  out["t_end"] = grid.window().t_end;
  return out;
}

VoxelGrid grid_from_arrays(py::dict d) {
  auto t_sum = d["t_sum"].cast<py::array_t<std::int64_t>>();
  auto p_acc = d["p_acc"].cast<py::array_t<double>>();
  auto e_cnt = d["e_cnt"].cast<py::array_t<std::uint32_t>>();
  auto ts = t_sum.unchecked<3>();
  auto pa = p_acc.unchecked<3>();
  auto ec = e_cnt.unchecked<3>();
  TimeWindow win{d["t_start"].cast<std::int64_t>(),
                 d["t_end"].cast<std::int64_t>()};
  VoxelGrid grid(int(ts.shape(2)), int(ts.shape(1)), int(ts.shape(0)), win);
  for (py::ssize_t s = 0; s < ts.shape(0); ++s) {
    for (py::ssize_t yy = 0; yy < ts.shape(1); ++yy) {
      for (py::ssize_t xx = 0; xx < ts.shape(2); ++xx) {
        VoxelCell& c = grid.at(int(s), int(yy), int(xx));
        c.t_sum = ts(s, yy, xx);
        c.p_acc = pa(s, yy, xx);
        c.e_cnt = ec(s, yy, xx);
      }
    }
  }
  return grid;
}

py::array_t<double> cloud_to_array(const RasterCloud& cloud) {
  py::array_t<double> out({py::ssize_t(cloud.points.size()), py::ssize_t(5)});
  auto w = out.mutable_unchecked<2>();
  for (py::ssize_t i = 0; i < w.shape(0); ++i) {
    const RasterPoint& p = cloud.points[static_cast<std::size_t>(i)];
    w(i, 0) = p.x;
    w(i, 1) = p.y;
    w(i, 2) = p.t_avg;
    w(i, 3) = p.p_acc;
    w(i, 4) = p.e_cnt;
  }
  return out;
}

RasterCloud cloud_from_array(py::array_t<double> points, int width, int height,
                             int k) {
  auto r = points.unchecked<2>();
  if (r.shape(1) != 5) throw std::invalid_argument("points must be (N, 5)");
  RasterCloud cloud;
  cloud.width = width;
  cloud.height = height;
  cloud.k = k;
  cloud.points.resize(static_cast<std::size_t>(r.shape(0)));
  for (py::ssize_t i = 0; i < r.shape(0); ++i) {
    RasterPoint& p = cloud.points[static_cast<std::size_t>(i)];
    p.x = static_cast<std::uint16_t>(r(i, 0));
    p.y = static_cast<std::uint16_t>(r(i, 1));
    p.t_avg = r(i, 2);
    p.p_acc = r(i, 3);
    p.e_cnt = static_cast<std::uint32_t>(r(i, 4));
  }
  return cloud;
}

CameraModel camera_from_array(py::array_t<double> p, int width, int height) {
  auto r = p.unchecked<2>();
  if (r.shape(0) != 3 || r.shape(1) != 4) {
    throw std::invalid_argument("projection matrix must be (3, 4)");
  }
  CameraModel cam;
  cam.sensor_width = width;
  cam.sensor_height = height;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) cam.p[i * 4 + j] = r(i, j);
  }
  return cam;
}

}  // namespace

PYBIND11_MODULE(_evpose, m) {
  m.doc() = "event-camera pose estimation core";
  m.attr("__version__") = "0.1.0";

  m.def(
      "synth_events",
      [](const std::string& pattern, double rate, std::int64_t duration_us,
         std::uint64_t seed, int width, int height) {
        SynthSpec spec;
        spec.pattern = parse_pattern(pattern);
        spec.rate = rate;
        spec.duration_us = duration_us;
        spec.seed = seed;
        spec.width = width;
        spec.height = height;
        return events_to_arrays(synth_events(spec).events());
      },
      py::arg("pattern"), py::arg("rate"), py::arg("duration_us"),
      py::arg("seed") = 0, py::arg("width") = 346, py::arg("height") = 260,
      "Generate a deterministic synthetic event stream; returns a dict of "
      "x, y, t, p arrays.");

  m.def(
      "rasterize",
      [](py::array_t<std::uint16_t> x, py::array_t<std::uint16_t> y,
         py::array_t<std::int64_t> t, py::array_t<std::int8_t> p,
         std::int64_t t_start, std::int64_t t_end, int width, int height,
         int k) {
        auto events = events_from_arrays(x, y, t, p);
        return grid_to_arrays(
            rasterize(events, {t_start, t_end}, width, height, k));
      },
      py::arg("x"), py::arg("y"), py::arg("t"), py::arg("p"),
      py::arg("t_start"), py::arg("t_end"), py::arg("width"),
      py::arg("height"), py::arg("k") = 4,
      "Accumulate events into a K-slice voxel grid; returns a dict with "
      "t_sum, p_acc, e_cnt arrays of shape (K, H, W).");

  m.def(
      "enhance",
      [](py::dict grid, double alpha, double epsilon) {
        return grid_to_arrays(
            enhance(grid_from_arrays(grid), {alpha, epsilon}));
      },
      py::arg("grid"), py::arg("alpha") = 0.5, py::arg("epsilon") = 1e-8,
      "Edge-weight the polarity channel of a voxel grid dict.");

  m.def(
      "point_cloud",
      [](py::dict grid) {
        return cloud_to_array(to_point_cloud(grid_from_arrays(grid)));
      },
      py::arg("grid"),
      "Export nonzero voxel cells as an (N, 5) array of "
      "x, y, t_avg, p_acc, e_cnt rows.");

  m.def(
      "sample_points",
      [](py::array_t<double> points, int width, int height, int k,
         std::size_t m, std::uint64_t seed) {
        RasterCloud cloud = cloud_from_array(points, width, height, k);
        return cloud_to_array(sample_points(cloud, m, seed));
      },
      py::arg("points"), py::arg("width"), py::arg("height"), py::arg("k"),
      py::arg("m"), py::arg("seed") = 0,
      "Deterministically resample an (N, 5) cloud to exactly m points.");

  m.def(
      "es_seq",
      [](py::array_t<double> feat, py::array_t<double> t_avg, int k) {
        auto fr = feat.unchecked<2>();
        auto tr = t_avg.unchecked<1>();
        if (fr.shape(1) != tr.shape(0)) {
          throw std::invalid_argument("feat is (C, N) and t_avg is (N,)");
        }
        PointFeatures pf;
        pf.channels = int(fr.shape(0));
        pf.n_points = int(fr.shape(1));
        pf.feat.resize(static_cast<std::size_t>(fr.shape(0) * fr.shape(1)));
        pf.t_avg.resize(static_cast<std::size_t>(tr.shape(0)));
        for (py::ssize_t c = 0; c < fr.shape(0); ++c) {
          for (py::ssize_t n = 0; n < fr.shape(1); ++n) {
            pf.feat[std::size_t(c) * fr.shape(1) + n] = fr(c, n);
          }
        }
        for (py::ssize_t n = 0; n < tr.shape(0); ++n) pf.t_avg[n] = tr(n);
        SliceTokens tokens = es_seq(pf, k);
        py::array_t<double> out({py::ssize_t(k), fr.shape(0)});
        std::memcpy(out.mutable_data(), tokens.t.data(),
                    tokens.t.size() * sizeof(double));
        return out;
      },
      py::arg("feat"), py::arg("t_avg"), py::arg("k") = 4,
      "Slice-wise channel max over per-point features; returns (K, C).");

  m.def(
      "etsc_forward",
      [](py::array_t<double> tokens, std::uint64_t seed) {
        auto tr = tokens.unchecked<2>();
        SliceTokens in(int(tr.shape(0)), int(tr.shape(1)));
        std::memcpy(in.t.data(), tokens.data(), in.t.size() * sizeof(double));
        EtscParams params = EtscParams::random_init(int(tr.shape(1)), seed);
        SliceTokens out = etsc_forward(in, params);
        py::array_t<double> res({tr.shape(0), tr.shape(1)});
        std::memcpy(res.mutable_data(), out.t.data(),
                    out.t.size() * sizeof(double));
        return res;
      },
      py::arg("tokens"), py::arg("seed") = 0,
      "Residual dilated temporal refinement of (K, C) tokens with "
      "seed-initialized weights.");

  m.def(
      "forward",
      [](py::array_t<double> points, int width, int height, int k,
         std::uint64_t seed, bool soft) {
        RasterCloud cloud = cloud_from_array(points, width, height, k);
        MicroNetParams params =
            MicroNetParams::default_init(seed, width, height);
        SimdrLogits logits = forward(cloud, params, k);
        Pose2D pose = simdr_decode(logits, width, height,
                                   soft ? DecodeMode::Soft
                                        : DecodeMode::Argmax);
        py::array_t<double> out(
            {py::ssize_t(pose.joints.size()), py::ssize_t(2)});
        auto w = out.mutable_unchecked<2>();
        for (py::ssize_t j = 0; j < w.shape(0); ++j) {
          w(j, 0) = pose.joints[static_cast<std::size_t>(j)].u;
          w(j, 1) = pose.joints[static_cast<std::size_t>(j)].v;
        }
        return out;
      },
      py::arg("points"), py::arg("width") = 346, py::arg("height") = 260,
      py::arg("k") = 4, py::arg("seed") = 0, py::arg("soft") = false,
      "Run the full point-cloud forward path with seed-initialized weights "
      "and decode per-joint (u, v) coordinates; returns (J, 2).");

  m.def(
      "triangulate",
      [](py::array_t<double> p_a, py::array_t<double> p_b,
         py::array_t<double> uv_a, py::array_t<double> uv_b, int width,
         int height) {
        CameraModel cam_a = camera_from_array(p_a, width, height);
        CameraModel cam_b = camera_from_array(p_b, width, height);
        auto ra = uv_a.unchecked<2>();
        auto rb = uv_b.unchecked<2>();
        if (ra.shape(0) != rb.shape(0) || ra.shape(1) != 2 ||
            rb.shape(1) != 2) {
          throw std::invalid_argument("observations must both be (J, 2)");
        }
        Pose2D pa, pb;
        for (py::ssize_t j = 0; j < ra.shape(0); ++j) {
          pa.joints.push_back({ra(j, 0), ra(j, 1), true});
          pb.joints.push_back({rb(j, 0), rb(j, 1), true});
        }
        Pose3D pose = triangulate(cam_a, cam_b, pa, pb);
        py::array_t<double> pts(
            {py::ssize_t(pose.joints.size()), py::ssize_t(3)});
        py::array_t<bool> valid(py::ssize_t(pose.joints.size()));
        auto pw = pts.mutable_unchecked<2>();
        auto vw = valid.mutable_unchecked<1>();
        for (py::ssize_t j = 0; j < pw.shape(0); ++j) {
          const Joint3D& jt = pose.joints[static_cast<std::size_t>(j)];
          pw(j, 0) = jt.x;
          pw(j, 1) = jt.y;
          pw(j, 2) = jt.z;
          vw(j) = jt.valid;
        }
        return py::make_tuple(pts, valid);
      },
      py::arg("p_a"), py::arg("p_b"), py::arg("uv_a"), py::arg("uv_b"),
      py::arg("width") = 346, py::arg("height") = 260,
      "Two-view linear triangulation from (3, 4) projection matrices and "
      "(J, 2) observations; returns ((J, 3) points, (J,) validity).");

  m.def(
      "project",
      [](py::array_t<double> p, py::array_t<double> xyz, int width,
         int height) {
        CameraModel cam = camera_from_array(p, width, height);
        auto r = xyz.unchecked<2>();
        if (r.shape(1) != 3) throw std::invalid_argument("points must be (J, 3)");
        py::array_t<double> out({r.shape(0), py::ssize_t(2)});
        auto w = out.mutable_unchecked<2>();
        for (py::ssize_t j = 0; j < r.shape(0); ++j) {
          auto [u, v] = project(cam, {r(j, 0), r(j, 1), r(j, 2)});
          w(j, 0) = u;
          w(j, 1) = v;
        }
        return out;
      },
      py::arg("p"), py::arg("xyz"), py::arg("width") = 346,
      py::arg("height") = 260,
      "Project (J, 3) world points through a (3, 4) matrix to (J, 2) pixels.");

  m.def(
      "mpjpe_2d",
      [](py::array_t<double> pred, py::array_t<double> gt) {
        auto pr = pred.unchecked<3>();
        auto gr = gt.unchecked<3>();
        if (pr.shape(0) != gr.shape(0) || pr.shape(1) != gr.shape(1) ||
            pr.shape(2) != 2 || gr.shape(2) != 2) {
          throw std::invalid_argument("poses must both be (S, J, 2)");
        }
        std::vector<Pose2D> a, b;
        for (py::ssize_t s = 0; s < pr.shape(0); ++s) {
          Pose2D pa, pb;
          for (py::ssize_t j = 0; j < pr.shape(1); ++j) {
            pa.joints.push_back({pr(s, j, 0), pr(s, j, 1), true});
            pb.joints.push_back({gr(s, j, 0), gr(s, j, 1), true});
          }
          a.push_back(pa);
          b.push_back(pb);
        }
        return mpjpe_2d(a, b).mpjpe;
      },
      py::arg("pred"), py::arg("gt"),
      "Mean per-joint position error over (S, J, 2) pose arrays, in pixels.");

  m.def(
      "mpjpe_3d",
      [](py::array_t<double> pred, py::array_t<double> gt) {
        auto pr = pred.unchecked<3>();
        auto gr = gt.unchecked<3>();
        if (pr.shape(0) != gr.shape(0) || pr.shape(1) != gr.shape(1) ||
            pr.shape(2) != 3 || gr.shape(2) != 3) {
          throw std::invalid_argument("poses must both be (S, J, 3)");
        }
        std::vector<Pose3D> a, b;
        for (py::ssize_t s = 0; s < pr.shape(0); ++s) {
          Pose3D pa, pb;
          for (py::ssize_t j = 0; j < pr.shape(1); ++j) {
            pa.joints.push_back({pr(s, j, 0), pr(s, j, 1), pr(s, j, 2), true});
            pb.joints.push_back({gr(s, j, 0), gr(s, j, 1), gr(s, j, 2), true});
          }
          a.push_back(pa);
          b.push_back(pb);
        }
        return mpjpe_3d(a, b).mpjpe;
      },
      py::arg("pred"), py::arg("gt"),
      "Mean per-joint position error over (S, J, 3) pose arrays, in mm.");

  m.def(
      "grad_check",
      [](const std::string& op, std::uint64_t seed) {
        GradCheckReport r = grad_check(op, seed);
        py::dict out;
        out["op"] = r.op;
        out["max_rel_err"] = r.max_rel_err;
        out["n_checked"] = r.n_checked;
        out["n_excluded"] = r.n_excluded;
        out["pass"] = r.pass;
        return out;
      },
      py::arg("op"), py::arg("seed") = 1,
      "Compare analytic gradients of one op against central finite "
      "differences on a small random instance.");
}
