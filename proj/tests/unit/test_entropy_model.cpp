#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "../oracles/oracles.hpp"
#include "doctest.h"
#include "pcgs/error.hpp"
#include "pcgs/entropy_model.hpp"

using namespace pcgs;

namespace {

HashGrid
small_grid(std::mt19937_64& rng, double density = 0.5)
{
  HashGrid g;
  g.resolutions = {4, 9, 16};
  g.table_size_log2 = 10;
  g.feat_per_level = 3;
  g.bbox_min = {-1.f, 0.f, 2.f};
  g.bbox_max = {1.f, 4.f, 3.f};
  g.allocate();
  std::bernoulli_distribution b(density);
  for (size_t e = 0; e < g.num_entries(); e++)
    g.set_bit(e, b(rng));
  return g;
}

oracle::GridSpec
to_spec(const HashGrid& g)
{
  oracle::GridSpec s;
  s.resolutions = g.resolutions;
  s.table_size_log2 = g.table_size_log2;
  s.feat_per_level = g.feat_per_level;
  for (int a = 0; a < 3; a++) {
    s.lo[a] = g.bbox_min[a];
    s.hi[a] = g.bbox_max[a];
  }
  s.bits = g.bits;
  return s;
}

std::array<float, 3>
random_point(std::mt19937_64& rng, const HashGrid& g)
{
  std::array<float, 3> x;
  for (int a = 0; a < 3; a++) {
    std::uniform_real_distribution<float> u(g.bbox_min[a], g.bbox_max[a]);
    x[a] = u(rng);
  }
  return x;
}

void
randomize(Mlp& mlp, std::mt19937_64& rng, float scale)
{
  std::normal_distribution<float> n(0.f, scale);
  for (auto& l : mlp.layers) {
    for (auto& w : l.weight)
      w = n(rng);
    for (auto& b : l.bias)
      b = n(rng);
  }
}

EntropyNet
zero_net(int levels = 3)
{
  HashGrid g;
  g.resolutions = {4};
  g.table_size_log2 = 6;
  g.feat_per_level = 2;
  g.allocate();
  std::vector<float> lambdas(levels, 1e-4f);
  return EntropyNet::make(ChannelLayout{2, 1}, lambdas, g, 8, 4);
}

}  // namespace

TEST_SUITE("hash grid") {

TEST_CASE("a vertex reads back its own entry") {
  HashGrid g = HashGrid::make({0.f, 0.f, 0.f}, {1.f, 1.f, 1.f});
  const size_t slot = spatial_hash(0, 0, 0) & (g.table_size() - 1);
  for (int l = 0; l < g.num_levels(); l++)
    for (int f = 0; f < g.feat_per_level; f++)
      g.set_bit(g.entry_index(l, slot, f), true);
  auto feats = hash_feature({0.f, 0.f, 0.f}, g);
  for (double v : feats)
    CHECK(v == 1.0);
  CHECK(hash_feature({0.f, 0.f, 0.f}, HashGrid::make({0, 0, 0}, {1, 1, 1}))[0] == -1.0);
}

TEST_CASE("a cell centre with four +1 and four -1 corners reads 0") {
  HashGrid g;
  g.resolutions = {16};
  g.table_size_log2 = 15;
  g.feat_per_level = 1;
  g.allocate();
  std::set<size_t> slots;
  for (int c = 0; c < 8; c++) {
    size_t slot = spatial_hash(c & 1, (c >> 1) & 1, (c >> 2) & 1) & (g.table_size() - 1);
    slots.insert(slot);
    if (c < 4)
      g.set_bit(g.entry_index(0, slot, 0), true);
  }
  REQUIRE(slots.size() == 8);
  const float h = 0.5f / 16;
  CHECK(hash_feature({h, h, h}, g)[0] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("features match the reference interpolation and stay in [-1, 1]") {
  std::mt19937_64 rng(5);
  HashGrid g = small_grid(rng);
  auto spec = to_spec(g);
  for (int i = 0; i < 2000; i++) {
    auto x = random_point(rng, g);
    auto got = hash_feature(x, g);
    auto want = oracle::hash_feature(spec, {x[0], x[1], x[2]});
    REQUIRE(got.size() == want.size());
    for (size_t j = 0; j < got.size(); j++) {
      REQUIRE(got[j] >= -1.0);
      REQUIRE(got[j] <= 1.0);
      REQUIRE(got[j] == doctest::Approx(want[j]).epsilon(1e-12));
    }
  }
  // Points outside the box are clamped onto it.
  auto far = hash_feature({-50.f, 50.f, 2.5f}, g);
  auto edge = hash_feature({-1.f, 4.f, 2.5f}, g);
  CHECK(far == edge);
}

TEST_CASE("per-level features are Lipschitz in normalized coordinates") {
  // Each trilinear partial derivative is bounded by 2 * res, so a move of
  // du changes a level-l feature by at most 2 * res_l * |du|_1.
  std::mt19937_64 rng(9);
  HashGrid g = small_grid(rng);
  std::normal_distribution<float> step(0.f, 0.02f);
  for (int i = 0; i < 3000; i++) {
    auto x = random_point(rng, g);
    auto y = x;
    double du1 = 0;
    for (int a = 0; a < 3; a++) {
      y[a] = std::clamp(x[a] + step(rng), g.bbox_min[a], g.bbox_max[a]);
      du1 += std::abs(double(y[a]) - x[a]) / (double(g.bbox_max[a]) - g.bbox_min[a]);
    }
    auto fx = hash_feature(x, g), fy = hash_feature(y, g);
    for (int l = 0; l < g.num_levels(); l++)
      for (int f = 0; f < g.feat_per_level; f++) {
        size_t j = size_t(l) * g.feat_per_level + f;
        REQUIRE(std::abs(fx[j] - fy[j]) <= 2.0 * g.resolutions[l] * du1 + 1e-9);
      }
  }
}

}

TEST_SUITE("rate head") {

TEST_CASE("zero weights give the base step and softplus(0) scale") {
  EntropyNet net = zero_net();
  std::vector<double> fh(net.grid.feature_width(), 0.3);
  auto models = eval_rate_head(fh, 2, net);
  REQUIRE(models.size() == size_t(ChannelLayout{2, 1}.total()));
  for (const auto& m : models) {
    CHECK(m.q1_fixed == kStepOne);
    CHECK(m.mu_fixed == 0);
    CHECK(m.sigma() == doctest::Approx(std::log(2.0) + 1e-4).epsilon(1e-4));
  }
}

TEST_CASE("a saturated step output gives exactly twice the base step") {
  ChannelModel m = snap_channel_model(1e30, 0.0, 0.0, 1.0, 1e-4);
  CHECK(m.q1_fixed == 2 * kStepOne);
  CHECK(snap_channel_model(-1e30, 0.0, 0.0, 1.0, 1e-4).q1_fixed >= 1);
  CHECK(snap_channel_model(0.0, 0.0, -1e6, 1.0, 1e-4).sigma() >= 1e-4);
}

TEST_CASE("evaluation is deterministic") {
  std::mt19937_64 rng(1);
  EntropyNet net = zero_net();
  randomize(net.rate_head, rng, 0.5f);
  std::vector<double> fh(net.grid.feature_width());
  for (auto& v : fh)
    v = std::uniform_real_distribution<double>(-1, 1)(rng);
  CHECK(eval_rate_head(fh, 1, net) == eval_rate_head(fh, 1, net));
  CHECK_THROWS_AS(eval_rate_head(fh, 4, net), Error);
}

TEST_CASE("trit context reproduces the full network") {
  std::mt19937_64 rng(2);
  EntropyNet net = zero_net();
  randomize(net.trit_head, rng, 0.7f);
  std::vector<double> fh(net.grid.feature_width());
  for (auto& v : fh)
    v = std::uniform_real_distribution<double>(-1, 1)(rng);
  for (int level = 2; level <= 3; level++) {
    TritContext ctx(fh, level, net);
    for (double prev : {-3.5, 0.0, 0.25, 11.0}) {
      std::vector<double> in{prev};
      in.insert(in.end(), fh.begin(), fh.end());
      for (int l = 1; l <= 3; l++)
        in.push_back(l == level ? 1.0 : 0.0);
      std::vector<double> want(3);
      mlp_forward(net.trit_head, in, want);
      auto got = ctx.logits(prev);
      for (int j = 0; j < 3; j++)
        CHECK(got[j] == doctest::Approx(want[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("normalized previous value is the value over q1") {
  QuantLattice p{-7, Step{3 * kStepOne, 3}, 0, false};
  CHECK(normalized_prev(p) == doctest::Approx(-7.0 / 9).epsilon(1e-15));
}

}

TEST_SUITE("gaussian bins") {

TEST_CASE("bin probability examples") {
  CHECK(gaussian_bin_prob(0, 2, 0, 1) == doctest::Approx(0.682689).epsilon(1e-6));
  // The bin containing the mean has the largest mass.
  double peak = gaussian_bin_prob(0.3, 0.5, 0.3, 1.0);
  CHECK(peak > gaussian_bin_prob(0.8, 0.5, 0.3, 1.0));
  CHECK(peak > gaussian_bin_prob(-0.2, 0.5, 0.3, 1.0));
  // Small bins approach density times width.
  const double q = 1e-3, sd = 1.0;
  double approx = q * std::exp(-0.5) / (sd * std::sqrt(2 * M_PI));
  CHECK(gaussian_bin_prob(1.0, q, 0.0, sd) == doctest::Approx(approx).epsilon(0.01));
}

TEST_CASE("normal CDF stays within 1e-7 of the reference") {
  for (double x = -9.0; x <= 9.0; x += 1.0 / 64) {
    double ref = 0.5 * std::erfc(-x / std::sqrt(2.0));
    REQUIRE(std::abs(normal_cdf(x) - ref) < 1e-7);
    REQUIRE(std::abs(normal_cdf(x) + normal_sf(x) - 1.0) < 1e-7);
  }
}

TEST_CASE("bin probabilities agree with direct quadrature") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int i = 0; i < 200; i++) {
    double mu = u(rng), sd = std::exp(u(rng)), q = std::exp(u(rng) / 2);
    double fhat = q * std::round(u(rng) * 2);
    long double ref = oracle::normal_mass(fhat - q / 2, fhat + q / 2, mu, sd);
    REQUIRE(std::abs(gaussian_bin_prob(fhat, q, mu, sd) - double(ref)) < 2e-7);
  }
}

TEST_CASE("a very narrow Gaussian concentrates the table") {
  ChannelModel m{kStepOne, 0, 7};  // sigma ~ 1e-4
  GaussianTable t = gaussian_freq_table(m, Step{kStepOne, 1});
  CHECK(t.table.size() == kWindowSymbols);
  CHECK(t.first_index == -kWindowHalf);
  CHECK(t.table.freq(t.symbol_of(0)) >= kFreqTotal - 2 * kWindowHalf);
}

TEST_CASE("a very wide Gaussian spreads evenly across the interior") {
  ChannelModel m{kStepOne, 0, int64_t(1e6 * 65536)};
  GaussianTable t = gaussian_freq_table(m, Step{kStepOne, 1});
  auto f = t.table.frequencies();
  uint32_t lo = *std::min_element(f.begin() + 1, f.end() - 1);
  uint32_t hi = *std::max_element(f.begin() + 1, f.end() - 1);
  CHECK(lo >= 1);
  CHECK(hi - lo <= 1);
  // Both tails land on the window edges.
  CHECK(f.front() > 1000);
  CHECK(f.back() > 1000);
}

TEST_CASE("tables are valid and track the folded-window distribution") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1, 1);
  const double rest = double(kFreqTotal) - kWindowSymbols;
  for (int trial = 0; trial < 40; trial++) {
    ChannelModel m;
    m.q1_fixed = int64_t(kStepOne * std::exp(u(rng)));
    m.mu_fixed = int64_t(65536 * 20 * u(rng));
    m.sigma_fixed = int64_t(65536 * std::exp(3 * u(rng)));
    const int level = 1 + int(rng() % 3);
    Step q = m.step(level);
    GaussianTable t = gaussian_freq_table(m, q);
    auto f = t.table.frequencies();
    REQUIRE(f.size() == size_t(kWindowSymbols));
    REQUIRE(std::accumulate(f.begin(), f.end(), uint64_t(0)) == kFreqTotal);
    REQUIRE(t.first_index == std::llround(m.mu() / q.value()) - kWindowHalf);
    const double qv = q.value();
    for (int sym = 0; sym < kWindowSymbols; sym += (sym % 97 == 0 ? 1 : 13)) {
      long double a = (t.index_of(sym) - 0.5L) * qv, b = a + qv;
      if (sym == 0)
        a = -INFINITY;
      if (sym == kWindowSymbols - 1)
        b = INFINITY;
      long double p = oracle::normal_mass(a, b, m.mu(), m.sigma());
      REQUIRE(std::abs(double(f[sym]) - (1.0 + double(p) * rest)) <= 1.01);
    }
  }
}

TEST_CASE("clamp_index keeps indices inside the window") {
  GaussianTable t = gaussian_freq_table(ChannelModel{kStepOne, 0, 65536}, Step{kStepOne, 1});
  CHECK(t.clamp_index(10'000'000) == t.last_index());
  CHECK(t.clamp_index(-10'000'000) == t.first_index);
  CHECK(t.clamp_index(3) == 3);
}

}

TEST_SUITE("frequency tables") {

TEST_CASE("normalization agrees exactly with the rational reference") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 300; trial++) {
    size_t n = 1 + rng() % 600;
    size_t units = (trial % 3 == 0) ? rng() % 5000 : 0;
    std::vector<double> w(n);
    std::exponential_distribution<double> e(1.0);
    for (auto& v : w)
      v = (rng() % 7 == 0) ? 0.0 : std::pow(e(rng), 4);
    auto got = quantize_probabilities(w, units);
    auto want = oracle::normalize_frequencies(w, units);
    REQUIRE(got == want);
    REQUIRE(std::accumulate(got.begin(), got.end(), uint64_t(0)) + units == kFreqTotal);
  }
}

TEST_CASE("frequency table rejects malformed input") {
  std::vector<uint32_t> zero{0, kFreqTotal};
  std::vector<uint32_t> short_sum{1, 2, 3};
  CHECK_THROWS_AS(FreqTable::from_frequencies(zero), Error);
  CHECK_THROWS_AS(FreqTable::from_frequencies(short_sum), Error);
  std::vector<double> too_many(kFreqTotal + 1, 1.0);
  CHECK_THROWS_AS(quantize_probabilities(too_many), Error);
}

TEST_CASE("find inverts the cumulative table") {
  std::vector<uint32_t> dense{100, 60000, 39};
  FreqTable t = FreqTable::sparse(5400, 2000, dense);
  uint32_t sum = 0;
  for (int s = 0; s < t.size(); s++)
    sum += t.freq(s);
  REQUIRE(sum == kFreqTotal);
  for (int s : {0, 1999, 2000, 2001, 2002, 2003, 5399}) {
    CHECK(t.find(t.cum(s)) == s);
    CHECK(t.find(t.cum(s + 1) - 1) == s);
  }
}

TEST_CASE("trinomial tables") {
  FreqTable uniform = trit_table_from_logits({0.0, 0.0, 0.0});
  CHECK(uniform.frequencies() == std::vector<uint32_t>{21846, 21845, 21845});
  FreqTable half = trit_table_from_logits({std::log(2.0), 0.0, 0.0});
  CHECK(half.frequencies() == std::vector<uint32_t>{32768, 16384, 16384});
  auto p = softmax3({std::log(2.0), 0.0, 0.0});
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[1] == doctest::Approx(0.25));
  // Extreme logits keep every symbol codable.
  FreqTable sharp = trit_table_from_logits({-1e9, 1e9, 0.0});
  CHECK(sharp.freq(0) >= 1);
  CHECK(sharp.freq(2) >= 1);
}

}
