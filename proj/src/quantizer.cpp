#include "pcgs/quantizer.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "pcgs/core_model.hpp"
#include "pcgs/error.hpp"

namespace pcgs {

namespace {

using i128 = __int128;

i128
pow3_int(int n)
{
  i128 r = 1;
  for (int i = 0; i < n; i++)
    r *= 3;
  return r;
}

i128
floor_div(i128 num, i128 den)
{
  i128 q = num / den;
  if (num % den != 0 && num < 0)
    q -= 1;
  return q;
}

void
check_step(const Step& q)
{
  if (q.q1_fixed <= 0)
    fail(ErrorKind::argument, "quantization step must be positive");
  if (q.level < 1 || q.level > kMaxLevels)
    fail(ErrorKind::argument, "step level " + std::to_string(q.level) + " out of range");
}

}  // namespace

double
pow3(int n)
{
  double r = 1.0;
  for (int i = 0; i < n; i++)
    r *= 3.0;
  return r;
}

Step
Step::from_real(double q)
{
  if (!(q > 0) || !std::isfinite(q))
    fail(ErrorKind::argument, "quantization step must be positive");
  auto fixed = int64_t(std::llround(q * double(kStepOne)));
  if (fixed < 1)
    fail(ErrorKind::argument, "quantization step below 2^-16 resolution");
  return {fixed, 1};
}

double
Step::value() const
{
  return lattice_value(1, *this);
}

int64_t
lattice_index(double f, const Step& step)
{
  check_step(step);
  if (!std::isfinite(f))
    fail(ErrorKind::argument, "cannot quantize a non-finite value");
  if (f == 0.0)
    return 0;

  // f = m * 2^e exactly; step = Q * 2^-16 / 3^L.
  // floor(f / step + 1/2) = floor((2 m 3^L 2^(e+16) + Q) / (2 Q)).
  int exp2 = 0;
  double frac = std::frexp(f, &exp2);
  auto mant = int64_t(std::ldexp(frac, 53));
  int e = exp2 - 53;

  i128 p = i128(2) * mant * pow3_int(step.level - 1);  // |p| < 2^72
  i128 q = step.q1_fixed;
  int sh = e + kStepFracBits;

  i128 result;
  if (sh >= 0) {
    if (sh > 50)
      fail(ErrorKind::argument, "value too large for its quantization lattice");
    result = floor_div((p << sh) + q, 2 * q);
  } else {
    int n = -sh;
    if (n > 100)
      return 0;  // |f / step| < 2^-28
    result = floor_div(p + (q << n), (2 * q) << n);
  }

  constexpr i128 lim = std::numeric_limits<int64_t>::max();
  if (result > lim || result < -lim)
    fail(ErrorKind::argument, "lattice index overflow");
  return int64_t(result);
}

double
lattice_value(int64_t index, const Step& step)
{
  // index * Q is exact below 2^53; a single rounding at the division.
  i128 prod = i128(index) * step.q1_fixed;
  double num = double(prod);
  return std::ldexp(num, -kStepFracBits) / pow3(step.level - 1);
}

double
QuantLattice::value() const
{
  return lattice_value(index, step);
}

QuantLattice
round_quantize(double f, const Step& q)
{
  return {lattice_index(f, q), q, 0, false};
}

double
round_quantize(double f, double q)
{
  return round_quantize(f, Step::from_real(q)).value();
}

QuantLattice
trit_refine(double f, const QuantLattice& prev)
{
  check_step(prev.step);
  Step next = prev.step.finer();
  check_step(next);

  // Candidates (3k - 1, 3k, 3k + 1) * next: exactly prev -/0/+ prev.step/3.
  int64_t center = 3 * prev.index;
  int64_t j = lattice_index(f, next);
  QuantLattice out{j, next, 0, false};
  if (j < center - 1) {
    out.index = center - 1;
    out.clamped = true;
  } else if (j > center + 1) {
    out.index = center + 1;
    out.clamped = true;
  }
  out.trit = int(out.index - center) + kTritMid;
  return out;
}

Step
step_schedule(const Step& q1, int s)
{
  if (s < 1)
    fail(ErrorKind::argument, "level must be >= 1");
  Step out{q1.q1_fixed, s};
  check_step(out);
  return out;
}

double
step_schedule(double q1, int s)
{
  if (!(q1 > 0))
    fail(ErrorKind::argument, "q1 must be positive");
  if (s < 1)
    fail(ErrorKind::argument, "level must be >= 1");
  return q1 / pow3(s - 1);
}

QuantLattice
quantize_at_level(double f, const Step& q1, int first_level, int target_level)
{
  if (first_level < 1 || first_level > target_level)
    fail(ErrorKind::argument, "quantize_at_level requires 1 <= t <= s");
  QuantLattice v = round_quantize(f, step_schedule(q1, first_level));
  for (int s = first_level + 1; s <= target_level; s++)
    v = trit_refine(f, v);
  return v;
}

}  // namespace pcgs
