#include <cmath>

#include "doctest.h"
#include "evpose/edge.hpp"
#include "test_helpers.hpp"

using namespace evpose;
using evpose::testing::random_stream;

namespace {

// nested-loop cross-correlation oracle, explicit kernels
void sobel_oracle(const Image& in, Image& gx, Image& gy) {
  static const int kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
  static const int ky[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
  gx = Image(in.width, in.height);
  gy = Image(in.width, in.height);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      double sx = 0, sy = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          int yy = y + dy, xx = x + dx;
          if (xx < 0 || xx >= in.width || yy < 0 || yy >= in.height) continue;
          sx += kx[dy + 1][dx + 1] * in.at(yy, xx);
          sy += ky[dy + 1][dx + 1] * in.at(yy, xx);
        }
      }
      gx.at(y, x) = sx;
      gy.at(y, x) = sy;
    }
  }
}

Image random_image(Rng& rng, int w, int h) {
  Image img(w, h);
  for (double& v : img.data) v = rng.next_uniform(0.0, 20.0);
  return img;
}

}  // namespace

TEST_SUITE("edge_enhance") {

TEST_CASE("constant map has zero gradients") {
  Image img(7, 5);
  for (double& v : img.data) v = 3.0;
  Image gx, gy;
  sobel_gradients(img, gx, gy);
  // interior only: zero padding makes the border see a step
  for (int y = 1; y < 4; ++y) {
    for (int x = 1; x < 6; ++x) {
      CHECK(gx.at(y, x) == 0.0);
      CHECK(gy.at(y, x) == 0.0);
    }
  }
}

TEST_CASE("vertical step has the analytic G_x column") {
  const int c = 4;
  Image img(9, 7);
  for (int y = 0; y < 7; ++y) {
    for (int x = c; x < 9; ++x) img.at(y, x) = 1.0;
  }
  Image gx, gy;
  sobel_gradients(img, gx, gy);
  for (int y = 1; y < 6; ++y) {
    CHECK(gx.at(y, c - 1) == 4.0);  // right kernel column weights 1+2+1
    CHECK(gy.at(y, c - 1) == 0.0);
  }
}

TEST_CASE("G_y of a map equals G_x of its transpose") {
  Rng rng(21);
  Image img = random_image(rng, 8, 6);
  Image transposed(6, 8);
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 8; ++x) transposed.at(x, y) = img.at(y, x);
  }
  Image gx, gy, tgx, tgy;
  sobel_gradients(img, gx, gy);
  sobel_gradients(transposed, tgx, tgy);
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 8; ++x) {
      CHECK(gy.at(y, x) == doctest::Approx(tgx.at(x, y)).epsilon(1e-15));
    }
  }
}

TEST_CASE("matches the nested-loop oracle on random maps") {
  Rng rng(22);
  for (int trial = 0; trial < 30; ++trial) {
    Image img = random_image(rng, 2 + int(rng.next_below(20)),
                             2 + int(rng.next_below(20)));
    Image gx, gy, ox, oy;
    sobel_gradients(img, gx, gy);
    sobel_oracle(img, ox, oy);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
      CHECK(gx.data[i] == doctest::Approx(ox.data[i]).epsilon(1e-12));
      CHECK(gy.data[i] == doctest::Approx(oy.data[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("edge magnitude is the elementwise euclidean norm") {
  Image gx(2, 1), gy(2, 1);
  gx.data = {3.0, 0.0};
  gy.data = {4.0, 0.0};
  Image e = edge_magnitude(gx, gy);
  CHECK(e.data[0] == 5.0);
  CHECK(e.data[1] == 0.0);

  Rng rng(23);
  Image rx = random_image(rng, 6, 6), ry = random_image(rng, 6, 6);
  Image re = edge_magnitude(rx, ry);
  for (std::size_t i = 0; i < re.data.size(); ++i) {
    CHECK(re.data[i] ==
          doctest::Approx(std::sqrt(rx.data[i] * rx.data[i] +
                                    ry.data[i] * ry.data[i]))
              .epsilon(1e-15));
  }
}

TEST_CASE("normalize keeps zero maps zero") {
  Image e(4, 4);
  Image n = normalize_edges(e, 1e-8);
  for (double v : n.data) CHECK(v == 0.0);
}

TEST_CASE("single nonzero pixel normalizes toward one") {
  Image e(4, 4);
  e.at(2, 2) = 7.0;
  Image n = normalize_edges(e, 1e-8);
  CHECK(n.at(2, 2) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(n.at(2, 2) < 1.0);
}

TEST_CASE("normalize preserves the argmax and stays below one") {
  Rng rng(24);
  Image e = random_image(rng, 10, 8);
  Image n = normalize_edges(e, 1e-8);
  std::size_t arg_in = 0, arg_out = 0;
  for (std::size_t i = 0; i < e.data.size(); ++i) {
    if (e.data[i] > e.data[arg_in]) arg_in = i;
    if (n.data[i] > n.data[arg_out]) arg_out = i;
  }
  CHECK(arg_in == arg_out);
  for (double v : n.data) {
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("alpha zero is the exact identity") {
  Rng rng(25);
  auto stream = random_stream(rng, 400, 32, 24, 5000);
  VoxelGrid grid = rasterize(stream.events(), {0, 5000}, 32, 24, 4);
  CHECK(enhance(grid, {0.0, 1e-8}) == grid);
}

TEST_CASE("constant count map leaves p_acc unchanged in the interior") {
  // every pixel of slice 0 gets exactly one event: interior edges vanish
  std::vector<Event> events;
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      events.push_back({std::uint16_t(x), std::uint16_t(y),
                        std::int64_t(y * 8 + x), 1});
    }
  }
  VoxelGrid grid = rasterize(events, {0, 64}, 8, 8, 1);
  VoxelGrid out = enhance(grid, {0.5, 1e-8});
  for (int y = 2; y < 6; ++y) {
    for (int x = 2; x < 6; ++x) {
      CHECK(out.at(0, y, x).p_acc == grid.at(0, y, x).p_acc);
    }
  }
}

TEST_CASE("enhanced polarity bound and sign preservation") {
  Rng rng(26);
  for (int trial = 0; trial < 10; ++trial) {
    auto stream = random_stream(rng, 600, 32, 24, 5000);
    VoxelGrid grid = rasterize(stream.events(), {0, 5000}, 32, 24, 4);
    VoxelGrid out = enhance(grid, {0.5, 1e-8});
    for (std::size_t i = 0; i < grid.cells().size(); ++i) {
      const double before = grid.cells()[i].p_acc;
      const double after = out.cells()[i].p_acc;
      CHECK(std::abs(after) <= 1.5 * std::abs(before) + 1e-12);
      if (before > 0) CHECK(after > 0);
      if (before < 0) CHECK(after < 0);
      if (grid.cells()[i].e_cnt == 0) CHECK(after == 0.0);
      CHECK(out.cells()[i].e_cnt == grid.cells()[i].e_cnt);
      CHECK(out.cells()[i].t_sum == grid.cells()[i].t_sum);
    }
  }
}

TEST_CASE("moving bar gains magnitude only at edge pixels") {
  SynthSpec spec;
  spec.pattern = SynthPattern::MovingBar;
  spec.rate = 40000;
  spec.duration_us = 100000;
  spec.seed = 4;
  spec.width = 64;
  spec.height = 48;
  auto stream = synth_events(spec);
  VoxelGrid grid =
      rasterize(stream.events(), {0, spec.duration_us}, 64, 48, 4);
  VoxelGrid out = enhance(grid, {0.5, 1e-8});
  bool any_increase = false;
  for (std::size_t i = 0; i < grid.cells().size(); ++i) {
    const double before = std::abs(grid.cells()[i].p_acc);
    const double after = std::abs(out.cells()[i].p_acc);
    CHECK(after >= before - 1e-12);
    CHECK(after <= 1.5 * before + 1e-12);
    if (after > before + 1e-9) any_increase = true;
  }
  CHECK(any_increase);  // a one-pixel bar is all edge
}

TEST_CASE("enhancement of one slice never touches another") {
  Rng rng(27);
  auto stream = random_stream(rng, 500, 32, 24, 4000);
  VoxelGrid grid = rasterize(stream.events(), {0, 4000}, 32, 24, 4);
  VoxelGrid out = enhance(grid, {0.5, 1e-8});
  // zero out slice 2 of the input and re-enhance: slices 0,1,3 unchanged
  VoxelGrid modified = grid;
  for (int y = 0; y < 24; ++y) {
    for (int x = 0; x < 32; ++x) modified.at(2, y, x) = VoxelCell{};
  }
  VoxelGrid out2 = enhance(modified, {0.5, 1e-8});
  for (int s : {0, 1, 3}) {
    for (int y = 0; y < 24; ++y) {
      for (int x = 0; x < 32; ++x) {
        CHECK(out2.at(s, y, x).p_acc == out.at(s, y, x).p_acc);
      }
    }
  }
}

TEST_CASE("count scaling leaves normalized edges invariant as eps -> 0") {
  Rng rng(28);
  Image img = random_image(rng, 12, 10);
  Image scaled = img;
  for (double& v : scaled.data) v *= 10.0;
  auto normalized = [](const Image& in) {
    Image gx, gy;
    sobel_gradients(in, gx, gy);
    return normalize_edges(edge_magnitude(gx, gy), 1e-12);
  };
  Image a = normalized(img);
  Image b = normalized(scaled);
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    CHECK(a.data[i] == doctest::Approx(b.data[i]).epsilon(1e-6));
  }
}

TEST_CASE("fused enhance equals the composed modular path") {
  Rng rng(29);
  auto stream = random_stream(rng, 800, 32, 24, 4000);
  VoxelGrid grid = rasterize(stream.events(), {0, 4000}, 32, 24, 3);
  const EdgeParams params{0.5, 1e-8};
  VoxelGrid fast = enhance(grid, params);
  for (int s = 0; s < 3; ++s) {
    Image gx, gy;
    sobel_gradients(count_map(grid, s), gx, gy);
    Image n = normalize_edges(edge_magnitude(gx, gy), params.epsilon);
    for (int y = 0; y < 24; ++y) {
      for (int x = 0; x < 32; ++x) {
        const VoxelCell& in = grid.at(s, y, x);
        if (in.e_cnt == 0) continue;
        const double expect = in.p_acc * (1.0 + params.alpha * n.at(y, x));
        CHECK(fast.at(s, y, x).p_acc ==
              doctest::Approx(expect).epsilon(1e-12));
      }
    }
  }
}

}  // TEST_SUITE
