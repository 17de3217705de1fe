#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/multiprecision/cpp_int.hpp>

namespace oracle {

namespace {

using boost::multiprecision::cpp_int;
using boost::multiprecision::cpp_rational;

cpp_rational
step_at(int64_t q1_fixed, int level)
{
  cpp_int den = 65536;
  for (int l = 1; l < level; l++)
    den *= 3;
  return cpp_rational(cpp_int(q1_fixed), den);
}

cpp_rational
exact(double f)
{
  // A double is m * 2^e exactly.
  int e = 0;
  double m = std::frexp(f, &e);
  auto mant = int64_t(std::ldexp(m, 53));
  e -= 53;
  cpp_rational r{cpp_int(mant)};
  cpp_int p2 = cpp_int(1) << std::abs(e);
  return e >= 0 ? cpp_rational(r * p2) : cpp_rational(r / p2);
}

}  // namespace

int64_t
round_index(double f, int64_t q1_fixed, int level)
{
  const cpp_rational q = step_at(q1_fixed, level);
  const cpp_rational x = exact(f);
  // Smallest k with x < (k + 1/2) q: start from a floating guess and step
  // until both exact inequalities hold.
  const long double qd = (long double)q1_fixed / 65536.0L / std::pow(3.0L, level - 1);
  auto k = int64_t(std::floor((long double)f / qd));
  auto upper = [&](int64_t j) { return (cpp_rational(j) + cpp_rational(1, 2)) * q; };
  while (!(x < upper(k)))
    k++;
  while (x < upper(k - 1))
    k--;
  return k;
}

WalkResult
quantize_walk(double f, int64_t q1_fixed, int t, int s)
{
  if (t < 1 || s < t)
    throw std::invalid_argument("quantize_walk needs 1 <= t <= s");
  const cpp_rational x = exact(f);
  const cpp_rational qt = step_at(q1_fixed, t);
  const int64_t k = round_index(f, q1_fixed, t);
  cpp_rational lo = (cpp_rational(k) - cpp_rational(1, 2)) * qt;
  cpp_rational hi = (cpp_rational(k) + cpp_rational(1, 2)) * qt;

  WalkResult out{0, 0.0, 0, false};
  for (int l = t + 1; l <= s; l++) {
    cpp_rational w = (hi - lo) / 3;
    int pick;
    if (x < lo + w)
      pick = 0;
    else if (x < lo + 2 * w)
      pick = 1;
    else
      pick = 2;
    if (x < lo || x >= hi)
      out.clamped = true;
    lo = lo + pick * w;
    hi = lo + w;
    out.last_trit = pick + 1;
  }
  cpp_rational mid = (lo + hi) / 2;
  cpp_rational idx = mid / step_at(q1_fixed, s);
  if (denominator(idx) != 1)
    throw std::logic_error("walk midpoint is off the level-s lattice");
  out.index_at_s = int64_t(numerator(idx));
  out.value = double(numerator(mid).convert_to<long double>()
                     / denominator(mid).convert_to<long double>());
  return out;
}

//============================================================================

double
entropy_bits(const std::vector<uint32_t>& freqs, int symbol)
{
  long double total = 0;
  for (uint32_t f : freqs)
    total += f;
  return double(-std::log2((long double)freqs.at(symbol) / total));
}

double
entropy_bits(const std::vector<CodedSymbol>& seq)
{
  long double sum = 0;
  for (const auto& cs : seq)
    sum += entropy_bits(cs.freqs, cs.symbol);
  return double(sum);
}

std::vector<uint32_t>
normalize_frequencies(const std::vector<double>& weights, size_t unit_symbols, uint32_t total)
{
  const size_t n = weights.size();
  const size_t m = n + unit_symbols;
  if (n == 0 || m > total)
    throw std::invalid_argument("alphabet too large");
  cpp_rational sum = 0;
  for (double w : weights)
    sum += exact(std::max(w, 0.0));
  const int64_t rest = int64_t(total) - int64_t(m);

  std::vector<uint32_t> freq(n, 1);
  std::vector<cpp_int> rem(n);  // floor(remainder * 2^48)
  int64_t assigned = 0;
  for (size_t i = 0; i < n; i++) {
    cpp_rational p = sum > 0 ? exact(std::max(weights[i], 0.0)) / sum
                             : cpp_rational(1, int64_t(n));
    cpp_rational x = p * rest;
    cpp_int fl = numerator(x) / denominator(x);  // x >= 0, truncation is floor
    freq[i] += uint32_t(fl);
    cpp_rational r48 = (x - cpp_rational(fl)) * (cpp_int(1) << 48);
    rem[i] = numerator(r48) / denominator(r48);
    assigned += int64_t(fl);
  }
  int64_t leftover = rest - assigned;
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t(0));
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return rem[a] > rem[b]; });
  for (size_t j = 0; j < order.size() && leftover > 0; j++, leftover--)
    freq[order[j]]++;
  for (size_t j = 0; leftover > 0; j = (j + 1) % n, leftover--)
    freq[j]++;
  return freq;
}

long double
normal_mass(long double a, long double b, long double mu, long double sigma)
{
  using boost::math::quadrature::gauss_kronrod;
  if (!(b > a))
    return 0.0L;
  const long double c = 1.0L / (sigma * std::sqrt(2.0L * 3.14159265358979323846264338327950288L));
  auto pdf = [&](long double x) {
    long double z = (x - mu) / sigma;
    return c * std::exp(-0.5L * z * z);
  };
  // Split at the mean and at +-8 sigma so every piece is smooth and finite
  // or a clean half-line.
  std::vector<long double> cuts{a};
  for (long double p : {mu - 8 * sigma, mu, mu + 8 * sigma})
    if (p > a && p < b)
      cuts.push_back(p);
  cuts.push_back(b);
  long double total = 0;
  for (size_t i = 0; i + 1 < cuts.size(); i++)
    total += gauss_kronrod<long double, 61>::integrate(pdf, cuts[i], cuts[i + 1], 10, 1e-15L);
  return total;
}

//============================================================================

std::vector<double>
hash_feature(const GridSpec& g, std::array<double, 3> x)
{
  const size_t table = size_t(1) << g.table_size_log2;
  auto entry = [&](size_t level, uint64_t slot, int feat) {
    size_t e = (level * table + slot) * size_t(g.feat_per_level) + feat;
    bool bit = (g.bits[e / 64] >> (e % 64)) & 1u;
    return bit ? 1.0 : -1.0;
  };
  auto hash = [&](int64_t cx, int64_t cy, int64_t cz) {
    uint64_t h = (uint64_t(cx) * 1u) ^ (uint64_t(cy) * 2654435761u) ^ (uint64_t(cz) * 805459861u);
    return (h & 0xFFFFFFFFu) % table;
  };

  std::vector<double> out;
  double u[3];
  for (int a = 0; a < 3; a++) {
    double t = (x[a] - g.lo[a]) / (g.hi[a] - g.lo[a]);
    u[a] = t < 0 ? 0 : (t > 1 ? 1 : t);
  }
  for (size_t l = 0; l < g.resolutions.size(); l++) {
    const int res = g.resolutions[l];
    int64_t base[3];
    double fr[3];
    for (int a = 0; a < 3; a++) {
      double p = u[a] * res;
      int64_t c = int64_t(std::floor(p));
      if (c > res - 1)
        c = res - 1;
      base[a] = c;
      fr[a] = p - double(c);
    }
    for (int f = 0; f < g.feat_per_level; f++) {
      double acc = 0;
      for (int dx = 0; dx <= 1; dx++)
        for (int dy = 0; dy <= 1; dy++)
          for (int dz = 0; dz <= 1; dz++) {
            double w = (dx ? fr[0] : 1 - fr[0]) * (dy ? fr[1] : 1 - fr[1])
              * (dz ? fr[2] : 1 - fr[2]);
            acc += w * entry(l, hash(base[0] + dx, base[1] + dy, base[2] + dz), f);
          }
      out.push_back(acc);
    }
  }
  return out;
}

bool
gauss_valid(double base, const std::vector<double>& level_feats, int s, double eps)
{
  long double arg = base;
  for (int l = 0; l < s; l++) {
    long double f = level_feats.at(l);
    arg += f > 0 ? f + std::log1p(std::exp(-f)) : std::log1p(std::exp(f));
  }
  long double sig = 1.0L / (1.0L + std::exp(-arg));
  return sig > (long double)eps;
}

double
shannon_bits(const std::vector<double>& p)
{
  long double h = 0;
  for (double v : p)
    if (v > 0)
      h -= (long double)v * std::log2((long double)v);
  return double(h);
}

}  // namespace oracle
