#include "pcgs/entropy_model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>

#include "pcgs/activations.hpp"
#include "pcgs/error.hpp"

namespace pcgs {

//============================================================================
// FreqTable

FreqTable
FreqTable::from_frequencies(std::span<const uint32_t> freqs)
{
  return sparse(int(freqs.size()), 0, freqs);
}

FreqTable
FreqTable::sparse(int num_symbols, int dense_begin, std::span<const uint32_t> dense_freqs)
{
  FreqTable t;
  t.assign_sparse(num_symbols, dense_begin, dense_freqs);
  return t;
}

void
FreqTable::assign_sparse(int num_symbols, int dense_begin, std::span<const uint32_t> dense_freqs)
{
  if (num_symbols <= 0 || dense_begin < 0
      || size_t(dense_begin) + dense_freqs.size() > size_t(num_symbols))
    fail(ErrorKind::invariant, "frequency table extents are inconsistent");

  num_symbols_ = num_symbols;
  dense_begin_ = dense_begin;
  dense_cum_.resize(dense_freqs.size() + 1);
  dense_cum_[0] = 0;
  uint64_t acc = 0;
  for (size_t i = 0; i < dense_freqs.size(); i++) {
    if (dense_freqs[i] == 0)
      fail(ErrorKind::invariant, "frequency table has a zero-frequency symbol");
    acc += dense_freqs[i];
    if (acc > kFreqTotal)
      fail(ErrorKind::invariant, "frequency table exceeds 2^16");
    dense_cum_[i + 1] = uint32_t(acc);
  }
  uint64_t total = acc + uint64_t(num_symbols) - dense_freqs.size();
  if (total != kFreqTotal)
    fail(ErrorKind::invariant,
         "frequency table totals " + std::to_string(total) + ", expected 65536");
}

uint32_t
FreqTable::cum(int sym) const
{
  if (sym <= dense_begin_)
    return uint32_t(sym);
  size_t d = size_t(sym - dense_begin_);
  size_t count = dense_cum_.size() - 1;
  if (d <= count)
    return uint32_t(dense_begin_) + dense_cum_[d];
  return uint32_t(dense_begin_) + dense_cum_[count] + uint32_t(d - count);
}

int
FreqTable::find(uint32_t target) const
{
  if (target < uint32_t(dense_begin_))
    return int(target);
  uint32_t rel = target - uint32_t(dense_begin_);
  size_t count = dense_cum_.size() - 1;
  if (rel < dense_cum_[count]) {
    auto it = std::upper_bound(dense_cum_.begin(), dense_cum_.end(), rel);
    return dense_begin_ + int(it - dense_cum_.begin()) - 1;
  }
  return dense_begin_ + int(count) + int(rel - dense_cum_[count]);
}

std::vector<uint32_t>
FreqTable::frequencies() const
{
  std::vector<uint32_t> f(num_symbols_);
  for (int s = 0; s < num_symbols_; s++)
    f[s] = freq(s);
  return f;
}

uint64_t
FreqTable::digest() const
{
  uint64_t h = 1469598103934665603ull;
  auto mix = [&](uint64_t v) {
    for (int b = 0; b < 8; b++) {
      h ^= (v >> (8 * b)) & 0xFF;
      h *= 1099511628211ull;
    }
  };
  mix(uint64_t(num_symbols_));
  mix(uint64_t(dense_begin_));
  for (uint32_t c : dense_cum_)
    mix(c);
  return h;
}

void
quantize_probabilities(std::span<const double> weights, size_t unit_symbols,
                       std::span<uint32_t> freq)
{
  const size_t n = weights.size();
  const size_t m = n + unit_symbols;
  if (n == 0 || m > kFreqTotal)
    fail(ErrorKind::argument, "alphabet size out of range for a 2^16 table");
  if (freq.size() != n)
    fail(ErrorKind::argument, "frequency output has wrong size");

  double sum = 0;
  for (double w : weights)
    sum += std::max(w, 0.0);

  // Selection key: remainder in 2^-48 units above the complemented index,
  // so a descending sort puts larger remainders and then lower indices first.
  thread_local std::vector<uint64_t> keys_tls;
  auto& keys = keys_tls;
  keys.resize(n);

  const int64_t rest = int64_t(kFreqTotal) - int64_t(m);
  int64_t assigned = 0;
  for (size_t i = 0; i < n; i++) {
    double p = sum > 0 ? std::max(weights[i], 0.0) / sum : 1.0 / double(n);
    double x = p * double(rest);
    double fl = std::floor(x);
    freq[i] = 1 + uint32_t(fl);
    auto frac = uint64_t((x - fl) * 0x1p48);
    keys[i] = (frac << 16) | (0xFFFFu - uint32_t(i));
    assigned += int64_t(fl);
  }

  int64_t leftover = rest - assigned;
  if (leftover > 0) {
    auto take = size_t(std::min<int64_t>(leftover, int64_t(n)));
    if (take < n)
      std::nth_element(keys.begin(), keys.begin() + (take - 1), keys.end(),
                       std::greater<uint64_t>());
    for (size_t j = 0; j < take; j++)
      freq[0xFFFFu - (keys[j] & 0xFFFFu)]++;
    leftover -= int64_t(take);
    for (size_t j = 0; leftover > 0; j = (j + 1) % n, leftover--)
      freq[j]++;
  }
  while (leftover < 0) {
    // Only reachable through rounding in p * rest; trim the largest.
    auto it = std::max_element(freq.begin(), freq.end());
    if (*it <= 1)
      fail(ErrorKind::invariant, "cannot normalize frequency table");
    (*it)--;
    leftover++;
  }
}

std::vector<uint32_t>
quantize_probabilities(std::span<const double> weights, size_t unit_symbols)
{
  std::vector<uint32_t> freq(weights.size());
  quantize_probabilities(weights, unit_symbols, freq);
  return freq;
}

//============================================================================
// Hash grid

uint32_t
spatial_hash(int32_t x, int32_t y, int32_t z)
{
  return uint32_t(x) * 1u ^ uint32_t(y) * 2654435761u ^ uint32_t(z) * 805459861u;
}

void
hash_feature(std::array<float, 3> x, const HashGrid& grid, std::span<double> out)
{
  const int f = grid.feat_per_level;
  if (out.size() != size_t(grid.feature_width()))
    fail(ErrorKind::argument, "hash feature output has wrong width");
  const uint32_t mask = uint32_t(grid.table_size() - 1);

  double u[3];
  for (int a = 0; a < 3; a++) {
    double lo = grid.bbox_min[a];
    double ext = double(grid.bbox_max[a]) - lo;
    double t = ext > 0 ? (double(x[a]) - lo) / ext : 0.0;
    u[a] = std::clamp(t, 0.0, 1.0);
  }

  for (int l = 0; l < grid.num_levels(); l++) {
    const int res = grid.resolutions[l];
    int32_t cell[3];
    double frac[3];
    for (int a = 0; a < 3; a++) {
      double pos = u[a] * res;
      int32_t c = std::min(int32_t(std::floor(pos)), int32_t(res - 1));
      cell[a] = c;
      frac[a] = pos - c;
    }
    auto feat = out.subspan(size_t(l) * f, f);
    std::fill(feat.begin(), feat.end(), 0.0);
    for (int corner = 0; corner < 8; corner++) {
      int dx = corner & 1, dy = (corner >> 1) & 1, dz = (corner >> 2) & 1;
      double w = (dx ? frac[0] : 1 - frac[0]) * (dy ? frac[1] : 1 - frac[1])
        * (dz ? frac[2] : 1 - frac[2]);
      if (w == 0)
        continue;
      size_t slot = spatial_hash(cell[0] + dx, cell[1] + dy, cell[2] + dz) & mask;
      for (int j = 0; j < f; j++)
        feat[j] += w * HashGrid::dequantize(grid.bit(grid.entry_index(l, slot, j)));
    }
    // The corner weights sum to 1 only up to rounding.
    for (double& v : feat)
      v = std::clamp(v, -1.0, 1.0);
  }
}

std::vector<double>
hash_feature(std::array<float, 3> x, const HashGrid& grid)
{
  std::vector<double> out(grid.feature_width());
  hash_feature(x, grid, out);
  return out;
}

//============================================================================
// Networks

namespace {

void
dense_forward(const DenseLayer& layer, const double* in, double* out, bool relu)
{
  for (int o = 0; o < layer.out; o++) {
    const float* w = &layer.weight[size_t(o) * layer.in];
    double acc = layer.bias[o];
    for (int i = 0; i < layer.in; i++)
      acc += double(w[i]) * in[i];
    out[o] = relu ? std::max(acc, 0.0) : acc;
  }
}

// Runs layers [first, end) on `in`.
void
forward_from(const Mlp& mlp, size_t first, std::span<const double> in, std::span<double> out)
{
  thread_local std::vector<double> a_tls, b_tls;
  auto& a = a_tls;
  auto& b = b_tls;
  size_t width = size_t(mlp.max_width());
  a.resize(width);
  b.resize(width);
  std::copy(in.begin(), in.end(), a.begin());
  for (size_t l = first; l < mlp.layers.size(); l++) {
    bool last = l + 1 == mlp.layers.size();
    dense_forward(mlp.layers[l], a.data(), last ? out.data() : b.data(), !last);
    if (!last)
      std::swap(a, b);
  }
}

}  // namespace

void
mlp_forward(const Mlp& mlp, std::span<const double> in, std::span<double> out)
{
  if (mlp.layers.empty() || in.size() != size_t(mlp.input_width())
      || out.size() != size_t(mlp.output_width()))
    fail(ErrorKind::argument, "network input/output width mismatch");
  forward_from(mlp, 0, in, out);
}

ChannelModel
snap_channel_model(double q_raw, double mu, double sigma_raw, double q_base, double sigma_min)
{
  constexpr double scale = double(int64_t(1) << kModelFracBits);
  constexpr double mu_limit = double(int64_t(1) << 40);

  ChannelModel m;
  double q = q_base * (1.0 + std::tanh(q_raw));
  auto q_max = int64_t(std::llround(2.0 * q_base * double(kStepOne)));
  m.q1_fixed = std::clamp<int64_t>(std::llround(q * double(kStepOne)), 1, q_max);

  double mu_scaled = std::isfinite(mu) ? std::clamp(mu * scale, -mu_limit, mu_limit) : 0.0;
  m.mu_fixed = std::llround(mu_scaled);

  double sigma = softplus(sigma_raw) + sigma_min;
  auto floor_fixed = int64_t(std::ceil(sigma_min * scale));
  double sigma_scaled = std::isfinite(sigma) ? std::min(sigma * scale, mu_limit) : mu_limit;
  m.sigma_fixed = std::max<int64_t>({std::llround(sigma_scaled), floor_fixed, int64_t(1)});
  return m;
}

std::vector<ChannelModel>
eval_rate_head(std::span<const double> fh, int level, const EntropyNet& net)
{
  const int s = net.num_levels();
  if (level < 1 || level > s)
    fail(ErrorKind::argument, "rate head level out of range");

  thread_local std::vector<double> in_tls, out_tls;
  auto& in = in_tls;
  auto& out = out_tls;
  in.assign(fh.begin(), fh.end());
  in.resize(fh.size() + s, 0.0);
  in[fh.size() + level - 1] = 1.0;
  out.resize(net.rate_head.output_width());
  mlp_forward(net.rate_head, in, out);

  size_t channels = out.size() / 3;
  std::vector<ChannelModel> models(channels);
  for (size_t c = 0; c < channels; c++)
    models[c] = snap_channel_model(out[3 * c], out[3 * c + 1], out[3 * c + 2],
                                   net.q_base, net.sigma_min);
  return models;
}

//============================================================================
// Gaussian bins

double
approx_erfc(double x)
{
  // Chebyshev fit, fractional error < 1.2e-7 everywhere.
  double z = std::abs(x);
  double t = 1.0 / (1.0 + 0.5 * z);
  double poly = -1.26551223
    + t * (1.00002368
    + t * (0.37409196
    + t * (0.09678418
    + t * (-0.18628806
    + t * (0.27886807
    + t * (-1.13520398
    + t * (1.48851587
    + t * (-0.82215223
    + t * 0.17087277))))))));
  double ans = t * std::exp(-z * z + poly);
  return x >= 0 ? ans : 2.0 - ans;
}

double
normal_cdf(double x)
{
  return 0.5 * approx_erfc(-x * M_SQRT1_2);
}

double
normal_sf(double x)
{
  return 0.5 * approx_erfc(x * M_SQRT1_2);
}

namespace {

// Both tails at one standardized edge, each from the accurate side.
struct Edge {
  double cdf;
  double sf;
};

Edge
edge_at(double x)
{
  if (x == -std::numeric_limits<double>::infinity())
    return {0.0, 1.0};
  if (x == std::numeric_limits<double>::infinity())
    return {1.0, 0.0};
  if (x >= 0) {
    double sf = normal_sf(x);
    return {1.0 - sf, sf};
  }
  double cdf = normal_cdf(x);
  return {cdf, 1.0 - cdf};
}

double
mass_between(double a, Edge ea, double b, Edge eb)
{
  double p;
  if (a >= 0)
    p = ea.sf - eb.sf;
  else if (b <= 0)
    p = eb.cdf - ea.cdf;
  else
    p = 1.0 - ea.cdf - eb.sf;
  return std::max(p, 0.0);
}

}  // namespace

double
gaussian_bin_prob(double fhat, double q, double mu, double sigma)
{
  double a = (fhat - 0.5 * q - mu) / sigma;
  double b = (fhat + 0.5 * q - mu) / sigma;
  return mass_between(a, edge_at(a), b, edge_at(b));
}

double
gaussian_bin_prob(double fhat, double q, const ChannelModel& model)
{
  return gaussian_bin_prob(fhat, q, model.mu(), model.sigma());
}

int64_t
GaussianTable::clamp_index(int64_t k) const
{
  return std::clamp(k, first_index, last_index());
}

GaussianTable
gaussian_freq_table(const ChannelModel& model, const Step& q)
{
  GaussianTable g;
  gaussian_freq_table(model, q, g);
  return g;
}

void
gaussian_freq_table(const ChannelModel& model, const Step& q, GaussianTable& g)
{
  // Standardized half-width of the explicitly evaluated core. Outside it
  // every bin holds less than Phi(-6) ~ 1e-9 of mass; that mass is folded
  // into the core's outermost bins and the remaining window symbols get the
  // floor frequency of 1.
  constexpr double kCoreSigmas = 6.0;

  const double qv = q.value();
  const double mu = model.mu();
  const double sigma = model.sigma();
  const int64_t k_mu = lattice_index(mu, q);

  g.first_index = k_mu - kWindowHalf;

  double half = std::ceil(kCoreSigmas * sigma / qv) + 1.0;
  int64_t h = half >= double(kWindowHalf) ? kWindowHalf : int64_t(half);
  int64_t core_lo = k_mu - h;
  int64_t core_hi = k_mu + h;
  const size_t n = size_t(core_hi - core_lo + 1);

  thread_local std::vector<double> xs_tls, probs_tls;
  auto& xs = xs_tls;
  auto& probs = probs_tls;
  thread_local std::vector<Edge> edges_tls;
  auto& edges = edges_tls;
  xs.resize(n + 1);
  edges.resize(n + 1);
  xs[0] = -std::numeric_limits<double>::infinity();
  xs[n] = std::numeric_limits<double>::infinity();
  for (size_t j = 1; j < n; j++)
    xs[j] = ((double(core_lo + int64_t(j)) - 0.5) * qv - mu) / sigma;
  for (size_t j = 0; j <= n; j++)
    edges[j] = edge_at(xs[j]);

  probs.resize(n);
  for (size_t j = 0; j < n; j++)
    probs[j] = mass_between(xs[j], edges[j], xs[j + 1], edges[j + 1]);

  thread_local std::vector<uint32_t> freqs_tls;
  auto& freqs = freqs_tls;
  freqs.resize(n);
  quantize_probabilities(probs, size_t(kWindowSymbols) - n, freqs);
  g.table.assign_sparse(kWindowSymbols, int(core_lo - g.first_index), freqs);
}

//============================================================================
// Trinomial head

TritContext::TritContext(std::span<const double> fh, int level, const EntropyNet& net)
  : mlp_(&net.trit_head)
{
  const int s = net.num_levels();
  if (level < 2 || level > s)
    fail(ErrorKind::argument, "trit head level out of range");
  if (mlp_->layers.empty() || size_t(mlp_->input_width()) != 1 + fh.size() + size_t(s))
    fail(ErrorKind::argument, "trit head input width mismatch");
  if (mlp_->output_width() != 3)
    fail(ErrorKind::argument, "trit head must produce 3 logits");

  const DenseLayer& first = mlp_->layers.front();
  base_.resize(first.out);
  value_weight_.resize(first.out);
  for (int o = 0; o < first.out; o++) {
    const float* w = &first.weight[size_t(o) * first.in];
    double acc = first.bias[o];
    for (size_t i = 0; i < fh.size(); i++)
      acc += double(w[1 + i]) * fh[i];
    acc += double(w[1 + fh.size() + level - 1]);
    base_[o] = acc;
    value_weight_[o] = w[0];
  }
}

std::array<double, 3>
TritContext::logits(double prev_normalized) const
{
  std::array<double, 3> out{};
  const size_t width = base_.size();
  thread_local std::vector<double> hidden_tls;
  auto& hidden = hidden_tls;
  hidden.resize(width);
  for (size_t o = 0; o < width; o++)
    hidden[o] = base_[o] + value_weight_[o] * prev_normalized;

  if (mlp_->layers.size() == 1) {
    std::copy_n(hidden.begin(), 3, out.begin());
    return out;
  }
  for (double& h : hidden)
    h = std::max(h, 0.0);
  forward_from(*mlp_, 1, hidden, out);
  return out;
}

double
normalized_prev(const QuantLattice& prev)
{
  return double(prev.index) / pow3(prev.step.level - 1);
}

std::array<double, 3>
softmax3(const std::array<double, 3>& z)
{
  double m = std::max({z[0], z[1], z[2]});
  std::array<double, 3> e{std::exp(z[0] - m), std::exp(z[1] - m), std::exp(z[2] - m)};
  double sum = e[0] + e[1] + e[2];
  return {e[0] / sum, e[1] / sum, e[2] / sum};
}

FreqTable
trit_table_from_logits(const std::array<double, 3>& logits)
{
  FreqTable t;
  trit_table_from_logits(logits, t);
  return t;
}

void
trit_table_from_logits(const std::array<double, 3>& logits, FreqTable& out)
{
  auto p = softmax3(logits);
  std::array<uint32_t, 3> f;
  quantize_probabilities(p, 0, f);
  out.assign_sparse(3, 0, f);
}

FreqTable
trinomial_table(const QuantLattice& prev, std::span<const double> fh, int level,
                const EntropyNet& net)
{
  TritContext ctx(fh, level, net);
  return trit_table_from_logits(ctx.logits(normalized_prev(prev)));
}

std::array<double, 3>
trinomial_probs(const QuantLattice& prev, std::span<const double> fh, int level,
                const EntropyNet& net)
{
  FreqTable t = trinomial_table(prev, fh, level, net);
  return {t.probability(0), t.probability(1), t.probability(2)};
}

}  // namespace pcgs
