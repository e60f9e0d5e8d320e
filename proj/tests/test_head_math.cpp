#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include <nlohmann/json.hpp>

#include "rpca/head.hpp"
#include "rpca/head_ops.hpp"
#include "rpca/regions.hpp"
#include "rpca/rng.hpp"

using namespace rpca;

namespace {

// Independent reference bilinear interpolator (corner-aligned). Deliberately
// written as a direct per-pixel evaluation, no shared code with the library.
double ref_bilinear_at(const DTensor& src, int out_side, int i, int j, int k) {
  int h = src.dim(0), w = src.dim(1);
  double sy = (h == 1 || out_side == 1)
                  ? 0.0
                  : static_cast<double>(i) * (h - 1) / (out_side - 1);
  double sx = (w == 1 || out_side == 1)
                  ? 0.0
                  : static_cast<double>(j) * (w - 1) / (out_side - 1);
  int y0 = static_cast<int>(std::floor(sy));
  int x0 = static_cast<int>(std::floor(sx));
  if (y0 >= h - 1) y0 = h >= 2 ? h - 2 : 0;
  if (x0 >= w - 1) x0 = w >= 2 ? w - 2 : 0;
  int y1 = std::min(y0 + 1, h - 1);
  int x1 = std::min(x0 + 1, w - 1);
  double fy = sy - y0, fx = sx - x0;
  double top = src.at(y0, x0, k) * (1 - fx) + src.at(y0, x1, k) * fx;
  double bot = src.at(y1, x0, k) * (1 - fx) + src.at(y1, x1, k) * fx;
  return top * (1 - fy) + bot * fy;
}

// Brute-force nested-loop region mean.
double ref_region_mean(const DTensor& map, const RegionRect& r, int k) {
  double sum = 0.0;
  int count = 0;
  for (int i = 0; i < map.dim(0); ++i) {
    for (int j = 0; j < map.dim(1); ++j) {
      if (i >= r.row0 && i < r.row1 && j >= r.col0 && j < r.col1) {
        sum += map.at(i, j, k);
        ++count;
      }
    }
  }
  return sum / count;
}

DTensor random_map(int h, int w, int c, uint64_t seed) {
  DTensor t({h, w, c});
  Rng rng(seed);
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-2.0, 2.0);
  return t;
}

}  // namespace

TEST_CASE("bilinear upsample preserves constants") {
  for (auto [h, w] : std::vector<std::pair<int, int>>{{1, 1}, {3, 5}, {7, 7}}) {
    DTensor m = DTensor::full({h, w, 2}, 3.25);
    DTensor up = upsample_bilinear(m, 32);
    REQUIRE(up.shape() == std::vector<int>({32, 32, 2}));
    for (int64_t i = 0; i < up.size(); ++i) CHECK(up[i] == doctest::Approx(3.25).epsilon(1e-12));
  }
}

TEST_CASE("bilinear upsample 2x2 matches the reference interpolator") {
  DTensor m({2, 2, 1});
  m.at(0, 0, 0) = 0;
  m.at(0, 1, 0) = 1;
  m.at(1, 0, 0) = 2;
  m.at(1, 1, 0) = 3;
  DTensor up = upsample_bilinear(m, 32);
  for (int i = 0; i < 32; ++i) {
    for (int j = 0; j < 32; ++j) {
      CHECK(std::abs(up.at(i, j, 0) - ref_bilinear_at(m, 32, i, j, 0)) <= 1e-6);
    }
  }
  // corners map onto corners
  CHECK(up.at(0, 0, 0) == doctest::Approx(0.0));
  CHECK(up.at(0, 31, 0) == doctest::Approx(1.0));
  CHECK(up.at(31, 0, 0) == doctest::Approx(2.0));
  CHECK(up.at(31, 31, 0) == doctest::Approx(3.0));
}

TEST_CASE("bilinear upsample matches reference on random maps") {
  for (auto [h, w] : std::vector<std::pair<int, int>>{{2, 3}, {7, 7}, {5, 9}}) {
    DTensor m = random_map(h, w, 3, 77 + h * 10 + w);
    DTensor up = upsample_bilinear(m, 32);
    for (int i = 0; i < 32; ++i) {
      for (int j = 0; j < 32; ++j) {
        for (int k = 0; k < 3; ++k) {
          CHECK(std::abs(up.at(i, j, k) - ref_bilinear_at(m, 32, i, j, k)) <= 1e-9);
        }
      }
    }
  }
}

TEST_CASE("upsample rejects bad arguments") {
  DTensor m({2, 2, 1});
  CHECK_THROWS_AS(upsample_bilinear(m, 0), Error);
  CHECK_THROWS_AS(upsample_bilinear(m, -3), Error);
}

TEST_CASE("region pool of a constant map is constant") {
  DTensor m = DTensor::full({32, 32, 4}, -1.5);
  DTensor pooled = region_pool(m, RegionSpec::default_four());
  REQUIRE(pooled.shape() == std::vector<int>({4, 4}));
  for (int64_t i = 0; i < pooled.size(); ++i) {
    CHECK(pooled[i] == doctest::Approx(-1.5).epsilon(1e-12));
  }
}

TEST_CASE("region pool top/bottom half pattern") {
  DTensor m({32, 32, 2});
  for (int i = 0; i < 32; ++i) {
    for (int j = 0; j < 32; ++j) {
      for (int k = 0; k < 2; ++k) m.at(i, j, k) = i < 16 ? 1.0 : 0.0;
    }
  }
  DTensor pooled = region_pool(m, RegionSpec::default_four());
  for (int k = 0; k < 2; ++k) {
    CHECK(pooled.at(0, k) == doctest::Approx(1.0));   // top
    CHECK(pooled.at(1, k) == doctest::Approx(0.0));   // bottom
    CHECK(pooled.at(2, k) == doctest::Approx(0.5));   // left
    CHECK(pooled.at(3, k) == doctest::Approx(0.5));   // right
  }
}

TEST_CASE("region pool matches the nested-loop oracle on a random 4x4 map") {
  DTensor m = random_map(4, 4, 2, 1234);
  RegionSpec spec = RegionSpec::default_four(4);
  DTensor pooled = region_pool(m, spec);
  for (int n = 0; n < spec.count(); ++n) {
    for (int k = 0; k < 2; ++k) {
      CHECK(std::abs(pooled.at(n, k) -
                     ref_region_mean(m, spec.regions[static_cast<size_t>(n)], k)) <=
            1e-9);
    }
  }
}

TEST_CASE("region pool with one full-frame region equals GAP") {
  DTensor m = random_map(32, 32, 5, 99);
  RegionSpec spec;
  spec.grid_side = 32;
  spec.regions = {{0, 32, 0, 32}};
  DTensor pooled = region_pool(m, spec);
  DTensor gap = global_average_pool(m);
  for (int k = 0; k < 5; ++k) {
    CHECK(std::abs(pooled.at(0, k) - gap[k]) <= 1e-9);
  }
}

TEST_CASE("region spec validation") {
  RegionSpec spec;
  spec.grid_side = 32;
  spec.regions = {{4, 4, 0, 8}};  // empty rows
  CHECK_THROWS_AS(spec.validate(), Error);
  spec.regions = {{0, 40, 0, 8}};  // out of bounds
  CHECK_THROWS_AS(spec.validate(), Error);
  CHECK_NOTHROW(RegionSpec::default_four().validate());
}

TEST_CASE("region spec JSON round trip") {
  RegionSpec spec = RegionSpec::default_four();
  RegionSpec back = RegionSpec::from_json(spec.to_json());
  CHECK(back.grid_side == spec.grid_side);
  CHECK(back.regions == spec.regions);
}

TEST_CASE("channel attention closed forms") {
  DTensor x({1, 4});
  x.at(0, 0) = 0.0;
  x.at(0, 1) = 100.0;
  x.at(0, 2) = std::log(3.0);
  x.at(0, 3) = -100.0;
  DTensor y = sigmoid_gate(x);
  CHECK(std::abs(y.at(0, 0) - 0.0) <= 1e-10);
  CHECK(std::abs(y.at(0, 1) - 100.0) <= 1e-10);
  // sigma(ln 3) = 0.75, output = 0.75 * ln 3
  CHECK(std::abs(y.at(0, 2) - 0.8239592165010824) <= 1e-10);
  CHECK(std::abs(y.at(0, 3) - 0.0) <= 1e-10);
}

TEST_CASE("channel attention stage tracking") {
  PooledFeatures pooled{DTensor({2, 3}), PooledFeatures::Stage::pooled};
  PooledFeatures att = channel_attention(pooled);
  CHECK(att.stage == PooledFeatures::Stage::attended);
  CHECK_THROWS_AS(channel_attention(att), Error);
}

TEST_CASE("channel attention properties") {
  Rng rng(5);
  double prev_pos = 0.0;
  for (int i = 0; i < 2000; ++i) {
    double x = rng.uniform(-50.0, 50.0);
    double f = x * sigmoid(x);
    CHECK(std::abs(f) <= std::abs(x) + 1e-12);
    if (f < 0.0) CHECK(x < 0.0);
  }
  // monotone nondecreasing on x >= 0
  for (double x = 0.0; x < 20.0; x += 0.01) {
    double f = x * sigmoid(x);
    CHECK(f + 1e-12 >= prev_pos);
    prev_pos = f;
  }
}

TEST_CASE("head forward with zero dense weights is uniform") {
  HeadConfig cfg;
  cfg.input_dim = 8;
  cfg.num_classes = 5;
  Rng rng(1);
  HeadParams p = HeadParams::init(cfg, rng);
  p.dense_w.fill(0.0);
  p.dense_b.fill(0.0);
  DTensor x = random_map(2, 1, 4, 3).cast<double>();
  PooledFeatures att{DTensor({2, 4}), PooledFeatures::Stage::attended};
  std::copy(x.data(), x.data() + 8, att.data.data());
  DTensor probs = head_forward(att, p, false, 0);
  for (int k = 0; k < 5; ++k) CHECK(probs[k] == doctest::Approx(0.2).epsilon(1e-9));
}

TEST_CASE("head forward two-element layer norm example") {
  // input (1, 3): layer norm -> (-1, 1) up to eps, identity dense,
  // softmax -> (0.1192, 0.8808)
  HeadConfig cfg;
  cfg.input_dim = 2;
  cfg.num_classes = 2;
  Rng rng(1);
  HeadParams p = HeadParams::init(cfg, rng);
  p.dense_w.fill(0.0);
  p.dense_w.at(0, 0) = 1.0;
  p.dense_w.at(1, 1) = 1.0;
  p.dense_b.fill(0.0);
  PooledFeatures att{DTensor({1, 2}), PooledFeatures::Stage::attended};
  att.data.at(0, 0) = 1.0;
  att.data.at(0, 1) = 3.0;
  DTensor probs = head_forward(att, p, false, 0);
  CHECK(std::abs(probs[0] - 0.1192) <= 1e-3);
  CHECK(std::abs(probs[1] - 0.8808) <= 1e-3);
}

TEST_CASE("head eval path ignores the dropout seed") {
  HeadConfig cfg;
  cfg.input_dim = 12;
  cfg.num_classes = 4;
  cfg.dropout_rate = 0.5;
  Rng rng(7);
  HeadParams p = HeadParams::init(cfg, rng);
  PooledFeatures att{random_map(3, 1, 4, 11).cast<double>(),
                     PooledFeatures::Stage::attended};
  att.data = DTensor({3, 4});
  Rng fill(13);
  for (int64_t i = 0; i < att.data.size(); ++i) att.data[i] = fill.uniform(-1, 1);
  DTensor a = head_forward(att, p, false, 111);
  DTensor b = head_forward(att, p, false, 999);
  for (int64_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("head dropout is deterministic per seed and scales") {
  HeadConfig cfg;
  cfg.input_dim = 1000;
  cfg.num_classes = 3;
  cfg.dropout_rate = 0.25;
  cfg.layer_norm = false;
  Rng rng(7);
  HeadParams p = HeadParams::init(cfg, rng);
  DTensor x = DTensor::full({1000}, 1.0);
  HeadCache c1, c2;
  head_forward_flat(x, p, true, 42, &c1);
  head_forward_flat(x, p, true, 42, &c2);
  for (int64_t i = 0; i < c1.after_drop.size(); ++i) {
    CHECK(c1.after_drop[i] == c2.after_drop[i]);
    bool kept = c1.after_drop[i] != 0.0;
    if (kept) CHECK(c1.after_drop[i] == doctest::Approx(1.0 / 0.75));
  }
}

TEST_CASE("softmax output is a strictly positive distribution") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    HeadConfig cfg;
    cfg.input_dim = 4 * 16;
    cfg.num_classes = 7;
    HeadParams p = HeadParams::init(cfg, rng);
    PooledFeatures att{DTensor({4, 16}), PooledFeatures::Stage::attended};
    for (int64_t i = 0; i < att.data.size(); ++i) att.data[i] = rng.uniform(-4, 4);
    DTensor probs = head_forward(att, p, false, 0);
    double sum = 0.0;
    for (int64_t i = 0; i < probs.size(); ++i) {
      CHECK(probs[i] > 0.0);
      CHECK(probs[i] < 1.0);
      sum += probs[i];
    }
    CHECK(std::abs(sum - 1.0) <= 1e-6);
  }
}

TEST_CASE("head parameter count closed forms") {
  // 2*8192 + 8192*50 + 50
  CHECK(head_param_count(2048, 4, 50) == 426034);
  // layer norm 16384, hidden 8192*512 + 512, classifier 512*50 + 50
  CHECK(head_param_count(2048, 4, 50, 512) == 4236850);
  CHECK(head_param_count(1, 1, 1) == 4);
  CHECK_THROWS_AS(head_param_count(0, 4, 50), Error);
}

TEST_CASE("head parameter count matches initialized parameters") {
  Rng rng(3);
  for (int hidden : {0, 512}) {
    HeadConfig cfg;
    cfg.input_dim = 4 * 128;
    cfg.num_classes = 50;
    cfg.hidden = hidden;
    HeadParams p = HeadParams::init(cfg, rng);
    int64_t expect = head_param_count(128, 4, 50,
                                      hidden > 0 ? std::optional<int>(hidden)
                                                 : std::nullopt);
    CHECK(p.count() == expect);
  }
}

TEST_CASE("head gradients match central finite differences") {
  Rng rng(17);
  for (int hidden : {0, 8}) {
    HeadConfig cfg;
    cfg.input_dim = 4 * 6;
    cfg.num_classes = 5;
    cfg.hidden = hidden;
    HeadParams p = HeadParams::init(cfg, rng);
    DTensor x({cfg.input_dim});
    for (int64_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.5, 1.5);
    int label = 2;

    auto loss_of = [&]() {
      DTensor probs = head_forward_flat(x, p, false, 0);
      return -std::log(std::max(probs[label], 1e-12));
    };

    // analytic
    HeadCache cache;
    DTensor probs = head_forward_flat(x, p, false, 0, &cache);
    DTensor dlogits(probs.shape());
    for (int64_t i = 0; i < probs.size(); ++i) {
      dlogits[i] = probs[i] - (i == label ? 1.0 : 0.0);
    }
    HeadGrads grads = HeadGrads::zeros_like(p);
    DTensor dx = head_backward(dlogits, p, cache, grads);

    auto probe = [&](DTensor& theta, const DTensor& analytic) {
      for (int rep = 0; rep < 40; ++rep) {
        int64_t idx = static_cast<int64_t>(rng.next_u64() %
                                           static_cast<uint64_t>(theta.size()));
        double keep = theta[idx];
        double h = 1e-5;
        theta[idx] = keep + h;
        double lp = loss_of();
        theta[idx] = keep - h;
        double lm = loss_of();
        theta[idx] = keep;
        double fd = (lp - lm) / (2 * h);
        double a = analytic[idx];
        double denom = std::max({std::abs(a), std::abs(fd), 1e-8});
        CHECK(std::abs(a - fd) / denom <= 1e-4);
      }
    };
    probe(p.ln_gain, grads.ln_gain);
    probe(p.ln_bias, grads.ln_bias);
    probe(p.dense_w, grads.dense_w);
    probe(p.dense_b, grads.dense_b);
    if (hidden > 0) {
      probe(p.hidden_w, grads.hidden_w);
      probe(p.hidden_b, grads.hidden_b);
    }

    // gradient w.r.t. the input descriptor (the Grad-CAM path)
    for (int rep = 0; rep < 20; ++rep) {
      int64_t idx = static_cast<int64_t>(rng.next_u64() %
                                         static_cast<uint64_t>(x.size()));
      double keep = x[idx];
      double h = 1e-5;
      x[idx] = keep + h;
      double lp = loss_of();
      x[idx] = keep - h;
      double lm = loss_of();
      x[idx] = keep;
      double fd = (lp - lm) / (2 * h);
      double denom = std::max({std::abs(dx[idx]), std::abs(fd), 1e-8});
      CHECK(std::abs(dx[idx] - fd) / denom <= 1e-4);
    }
  }
}

TEST_CASE("permuting regions permutes pooled rows and preserves the head output") {
  DTensor m = random_map(32, 32, 6, 2024);
  RegionSpec spec = RegionSpec::default_four();
  RegionSpec perm = spec;
  std::vector<int> order = {2, 0, 3, 1};
  for (size_t i = 0; i < order.size(); ++i) {
    perm.regions[i] = spec.regions[static_cast<size_t>(order[i])];
  }

  DTensor pooled = region_pool(m, spec);
  DTensor pooled_perm = region_pool(m, perm);
  int c = 6;
  for (int n = 0; n < 4; ++n) {
    for (int k = 0; k < c; ++k) {
      CHECK(pooled_perm.at(n, k) == doctest::Approx(pooled.at(order[static_cast<size_t>(n)], k)).epsilon(1e-12));
    }
  }

  // fresh-init layer norm (gain 1, bias 0) plus a block-permuted dense layer
  HeadConfig cfg;
  cfg.input_dim = 4 * c;
  cfg.num_classes = 3;
  Rng rng(9);
  HeadParams p = HeadParams::init(cfg, rng);
  HeadParams p_perm = p;
  for (int n = 0; n < 4; ++n) {
    for (int k = 0; k < c; ++k) {
      for (int o = 0; o < 3; ++o) {
        p_perm.dense_w.at(n * c + k, o) =
            p.dense_w.at(order[static_cast<size_t>(n)] * c + k, o);
      }
    }
  }
  auto run = [&](const DTensor& pool, const HeadParams& params) {
    PooledFeatures att = channel_attention({pool, PooledFeatures::Stage::pooled});
    return head_forward(att, params, false, 0);
  };
  DTensor out = run(pooled, p);
  DTensor out_perm = run(pooled_perm, p_perm);
  for (int64_t i = 0; i < out.size(); ++i) {
    CHECK(std::abs(out[i] - out_perm[i]) <= 1e-9);
  }
}

TEST_CASE("constant maps give the same pipeline output as their 1x1 reduction") {
  for (double v : {0.0, 1.0, -2.5, 7.75}) {
    HeadConfig cfg;
    cfg.input_dim = 4 * 3;
    cfg.num_classes = 4;
    Rng rng(31);
    HeadParams p = HeadParams::init(cfg, rng);
    auto pipeline = [&](const DTensor& fmap) {
      DTensor up = upsample_bilinear(fmap, 32);
      DTensor pooled = region_pool(up, RegionSpec::default_four());
      PooledFeatures att =
          channel_attention({pooled, PooledFeatures::Stage::pooled});
      return head_forward(att, p, false, 0);
    };
    DTensor big = DTensor::full({5, 9, 3}, v);
    DTensor tiny = DTensor::full({1, 1, 3}, v);
    DTensor a = pipeline(big);
    DTensor b = pipeline(tiny);
    for (int64_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-6);
  }
}

TEST_CASE("upsample backward is the transpose of forward") {
  // <up(x), y> == <x, up_backward(y)> for random x, y
  Rng rng(55);
  DTensor x = random_map(5, 7, 2, 3001);
  DTensor y = random_map(32, 32, 2, 3002);
  DTensor ux = upsample_bilinear(x, 32);
  DTensor bty = upsample_bilinear_backward(y, 5, 7);
  double lhs = 0.0, rhs = 0.0;
  for (int64_t i = 0; i < ux.size(); ++i) lhs += ux[i] * y[i];
  for (int64_t i = 0; i < x.size(); ++i) rhs += x[i] * bty[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("region pool backward is the transpose of forward") {
  Rng rng(66);
  RegionSpec spec = RegionSpec::default_four();
  DTensor x = random_map(32, 32, 3, 4001);
  DTensor y({4, 3});
  for (int64_t i = 0; i < y.size(); ++i) y[i] = rng.uniform(-1, 1);
  DTensor px = region_pool(x, spec);
  DTensor bty = region_pool_backward(y, spec);
  double lhs = 0.0, rhs = 0.0;
  for (int64_t i = 0; i < px.size(); ++i) lhs += px[i] * y[i];
  for (int64_t i = 0; i < x.size(); ++i) rhs += x[i] * bty[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}
