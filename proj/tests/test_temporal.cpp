#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "evpose/rng.hpp"
#include "evpose/temporal.hpp"

using namespace evpose;

namespace {

PointFeatures random_features(Rng& rng, int c, int n) {
  PointFeatures pf;
  pf.channels = c;
  pf.n_points = n;
  pf.feat.resize(std::size_t(c) * n);
  pf.t_avg.resize(n);
  for (double& v : pf.feat) v = rng.next_uniform(-2.0, 2.0);
  for (double& v : pf.t_avg) v = rng.next_double();
  return pf;
}

// per-slice nested-loop max oracle
SliceTokens es_seq_oracle(const PointFeatures& pf, int k) {
  SliceTokens tokens(k, pf.channels);
  for (int s = 0; s < k; ++s) {
    for (int c = 0; c < pf.channels; ++c) {
      double best = 0.0;
      bool found = false;
      for (int n = 0; n < pf.n_points; ++n) {
        if (std::min(int(pf.t_avg[n] * k), k - 1) != s) continue;
        if (!found || pf.feat[std::size_t(c) * pf.n_points + n] > best) {
          best = pf.feat[std::size_t(c) * pf.n_points + n];
          found = true;
        }
      }
      tokens.at(s, c) = found ? best : 0.0;
    }
  }
  return tokens;
}

SliceTokens random_tokens(Rng& rng, int k, int c) {
  SliceTokens t(k, c);
  for (double& v : t.t) v = rng.next_uniform(-1.0, 1.0);
  return t;
}

// direct-summation oracle for the whole ETSC block
SliceTokens etsc_oracle(const SliceTokens& in, const EtscParams& p) {
  const int k = in.k, c = in.channels;
  auto conv = [&](const SliceTokens& x, const std::vector<double>& w,
                  const std::vector<double>& b, int dil) {
    SliceTokens y(k, c);
    for (int pos = 0; pos < k; ++pos) {
      for (int co = 0; co < c; ++co) {
        double acc = b[co];
        for (int ci = 0; ci < c; ++ci) {
          for (int tap = 0; tap < 3; ++tap) {
            int src = pos + (tap - 1) * dil;
            if (src < 0 || src >= k) continue;
            acc += w[(std::size_t(co) * c + ci) * 3 + tap] * x.at(src, ci);
          }
        }
        y.at(pos, co) = acc;
      }
    }
    return y;
  };
  SliceTokens h = conv(in, p.w1, p.b1, 1);
  for (double& v : h.t) v = std::max(v, 0.0);
  SliceTokens out = conv(h, p.w2, p.b2, 2);
  for (std::size_t i = 0; i < out.t.size(); ++i) out.t[i] += in.t[i];
  return out;
}

}  // namespace

TEST_SUITE("temporal") {

TEST_CASE("slice assignment follows the clamped floor") {
  CHECK(slice_assign(0.0, 4) == 0);
  CHECK(slice_assign(1.0, 4) == 3);
  CHECK(slice_assign(0.5, 4) == 2);
  CHECK(slice_assign(0.2499, 4) == 0);
  CHECK(slice_assign(0.25, 4) == 1);
  CHECK_THROWS_AS(slice_assign(-0.1, 4), std::invalid_argument);
  CHECK_THROWS_AS(slice_assign(1.1, 4), std::invalid_argument);
  CHECK_THROWS_AS(slice_assign(0.5, 0), std::invalid_argument);
}

TEST_CASE("all points in one slice") {
  PointFeatures pf;
  pf.channels = 3;
  pf.n_points = 4;
  pf.feat = {1, 2, 3, 4, -1, -2, -3, -4, 0, 5, 0, 5};
  pf.t_avg = {0.6, 0.6, 0.7, 0.74};  // slice 2 of 4
  SliceTokens t = es_seq(pf, 4);
  CHECK(t.at(2, 0) == 4);
  CHECK(t.at(2, 1) == -1);
  CHECK(t.at(2, 2) == 5);
  for (int s : {0, 1, 3}) {
    for (int c = 0; c < 3; ++c) CHECK(t.at(s, c) == 0.0);
  }
}

TEST_CASE("one point per slice copies feature rows") {
  PointFeatures pf;
  pf.channels = 2;
  pf.n_points = 4;
  pf.feat = {10, 20, 30, 40, 1, 2, 3, 4};
  pf.t_avg = {0.1, 0.3, 0.6, 0.9};
  SliceTokens t = es_seq(pf, 4);
  for (int s = 0; s < 4; ++s) {
    CHECK(t.at(s, 0) == pf.feat[s]);
    CHECK(t.at(s, 1) == pf.feat[4 + s]);
  }
}

TEST_CASE("matches the per-slice max oracle") {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    PointFeatures pf = random_features(rng, 16, 512);
    SliceTokens got = es_seq(pf, 4);
    SliceTokens want = es_seq_oracle(pf, 4);
    CHECK(got.t == want.t);
  }
}

TEST_CASE("es_seq is permutation invariant") {
  Rng rng(32);
  PointFeatures pf = random_features(rng, 8, 128);
  SliceTokens base = es_seq(pf, 4);
  for (int trial = 0; trial < 5; ++trial) {
    PointFeatures shuffled = pf;
    for (int i = pf.n_points - 1; i > 0; --i) {
      int j = int(rng.next_below(i + 1));
      std::swap(shuffled.t_avg[i], shuffled.t_avg[j]);
      for (int c = 0; c < pf.channels; ++c) {
        std::swap(shuffled.feat[std::size_t(c) * pf.n_points + i],
                  shuffled.feat[std::size_t(c) * pf.n_points + j]);
      }
    }
    CHECK(es_seq(shuffled, 4).t == base.t);
  }
}

TEST_CASE("perturbing a point changes at most its slice token") {
  Rng rng(33);
  PointFeatures pf = random_features(rng, 8, 64);
  SliceTokens base = es_seq(pf, 4);
  PointFeatures bumped = pf;
  const int victim = 10;
  const int victim_slice = slice_assign(pf.t_avg[victim], 4);
  for (int c = 0; c < 8; ++c) {
    bumped.feat[std::size_t(c) * 64 + victim] += 100.0;
  }
  SliceTokens after = es_seq(bumped, 4);
  for (int s = 0; s < 4; ++s) {
    for (int c = 0; c < 8; ++c) {
      if (s != victim_slice) CHECK(after.at(s, c) == base.at(s, c));
    }
  }
}

TEST_CASE("zero parameters give the residual identity") {
  Rng rng(34);
  SliceTokens t = random_tokens(rng, 4, 8);
  SliceTokens out = etsc_forward(t, EtscParams(8));
  CHECK(out.t == t.t);
}

TEST_CASE("K=1 reduces to the center taps") {
  Rng rng(35);
  const int c = 3;
  SliceTokens t = random_tokens(rng, 1, c);
  EtscParams p = EtscParams::random_init(c, 77);
  SliceTokens out = etsc_forward(t, p);
  // closed form: both convs only see tap 1 (the center)
  for (int co = 0; co < c; ++co) {
    double h;
    std::vector<double> hidden(c);
    for (int m = 0; m < c; ++m) {
      h = p.b1[m];
      for (int ci = 0; ci < c; ++ci) {
        h += p.w1[(std::size_t(m) * c + ci) * 3 + 1] * t.at(0, ci);
      }
      hidden[m] = std::max(h, 0.0);
    }
    double acc = p.b2[co];
    for (int ci = 0; ci < c; ++ci) {
      acc += p.w2[(std::size_t(co) * c + ci) * 3 + 1] * hidden[ci];
    }
    acc += t.at(0, co);
    CHECK(out.at(0, co) == doctest::Approx(acc).epsilon(1e-12));
  }
}

TEST_CASE("matches the direct-summation oracle") {
  Rng rng(36);
  for (int trial = 0; trial < 10; ++trial) {
    const int k = 1 + int(rng.next_below(8));
    const int c = 1 + int(rng.next_below(12));
    SliceTokens t = random_tokens(rng, k, c);
    EtscParams p = EtscParams::random_init(c, rng.next_u64());
    SliceTokens got = etsc_forward(t, p);
    SliceTokens want = etsc_oracle(t, p);
    REQUIRE(got.t.size() == want.t.size());
    for (std::size_t i = 0; i < got.t.size(); ++i) {
      CHECK(got.t[i] == doctest::Approx(want.t[i]).epsilon(1e-6));
    }
  }
}

TEST_CASE("channel mismatch is rejected") {
  SliceTokens t(4, 8);
  CHECK_THROWS_AS(etsc_forward(t, EtscParams(16)), std::invalid_argument);
}

TEST_CASE("receptive field is bounded by distance 3") {
  Rng rng(37);
  const int k = 12, c = 4;
  SliceTokens t = random_tokens(rng, k, c);
  EtscParams p = EtscParams::random_init(c, 9);
  SliceTokens base = etsc_forward(t, p);
  for (int j = 0; j < k; ++j) {
    SliceTokens bumped = t;
    bumped.at(j, 0) += 1.0;
    SliceTokens out = etsc_forward(bumped, p);
    for (int pos = 0; pos < k; ++pos) {
      if (std::abs(pos - j) > 3) {
        for (int ch = 0; ch < c; ++ch) {
          CHECK(out.at(pos, ch) == base.at(pos, ch));  // bit-identical
        }
      }
    }
  }
}

TEST_CASE("temporal mean") {
  SliceTokens t(2, 3);
  for (int c = 0; c < 3; ++c) {
    t.at(0, c) = c + 1.0;
    t.at(1, c) = -(c + 1.0);
  }
  auto mean = temporal_global(t);
  for (double v : mean) CHECK(v == 0.0);

  SliceTokens same(3, 2);
  for (int s = 0; s < 3; ++s) {
    same.at(s, 0) = 4.0;
    same.at(s, 1) = -2.5;
  }
  auto m = temporal_global(same);
  CHECK(m[0] == 4.0);
  CHECK(m[1] == -2.5);

  Rng rng(38);
  SliceTokens r = random_tokens(rng, 7, 5);
  auto got = temporal_global(r);
  for (int c = 0; c < 5; ++c) {
    double sum = 0;
    for (int s = 0; s < 7; ++s) sum += r.at(s, c);
    CHECK(got[c] == doctest::Approx(sum / 7).epsilon(1e-15));
  }
}

TEST_CASE("fuse concatenates in order") {
  auto fused = fuse({1, 2}, {3, 4}, {5, 6});
  CHECK(fused == std::vector<double>{1, 2, 3, 4, 5, 6});
  CHECK_THROWS_AS(fuse({1}, {1, 2}, {1}), std::invalid_argument);
}

TEST_CASE("etsc weight file round trip") {
  EtscParams p = EtscParams::random_init(6, 123);
  auto path = std::filesystem::temp_directory_path() / "evpose_etsc_test.bin";
  save_etsc_params(p, path.string());
  EtscParams back = load_etsc_params(path.string());
  CHECK(back.channels == 6);
  CHECK(back.w1 == p.w1);
  CHECK(back.b1 == p.b1);
  CHECK(back.w2 == p.w2);
  CHECK(back.b2 == p.b2);
  std::filesystem::remove(path);
}

}  // TEST_SUITE
