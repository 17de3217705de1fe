#include <cmath>
#include <random>

#include "../oracles/oracles.hpp"
#include "doctest.h"
#include "pcgs/masking.hpp"
#include "pcgs/quantizer.hpp"

using namespace pcgs;

TEST_SUITE("reference cross-checks") {

TEST_CASE("quantizer matches the rational walk across scales") {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 4000; trial++) {
    int64_t q1 = 1 + int64_t(std::exp(std::abs(u(rng)) * 14.0));  // 2^-16 .. ~18
    int s = 1 + int(rng() % kMaxLevels);
    int t = 1 + int(rng() % s);
    double f = u(rng) * 6.0 * double(q1) / kStepOne;
    if (trial % 5 == 0) {
      // Land exactly on a level-t boundary.
      int64_t k = int64_t(rng() % 20) - 10;
      f = (double(k) + 0.5) * Step{q1, t}.value();
    }
    QuantLattice got = quantize_at_level(f, Step{q1, 1}, t, s);
    oracle::WalkResult want = oracle::quantize_walk(f, q1, t, s);
    REQUIRE(got.index == want.index_at_s);
    REQUIRE(got.index == oracle::round_index(f, q1, s));
    if (s > t)
      REQUIRE(got.trit == want.last_trit);
  }
}

TEST_CASE("mask decisions match the long-double reference") {
  std::mt19937_64 rng(102);
  std::normal_distribution<float> g(0.f, 4.f);
  const int s = 4;
  MaskParams p = MaskParams::zeros(4000, 1, s);
  for (auto& v : p.base_feats)
    v = g(rng) - 4.6f;
  for (auto& v : p.level_feats)
    v = g(rng) - 3.f;
  for (int l = 1; l <= s; l++) {
    BitMask m = compute_gauss_mask(p, l);
    for (int i = 0; i < p.num_anchors; i++) {
      std::vector<double> feats;
      for (int j = 1; j <= s; j++)
        feats.push_back(p.level_feat(j, i, 0));
      REQUIRE(bool(m[i]) == oracle::gauss_valid(p.base(i, 0), feats, l, p.threshold));
    }
  }
}

}
