#pragma once

#include <cstdint>

namespace pcgs {

// Fixed-point resolution of level-1 quantization steps.
inline constexpr int kStepFracBits = 16;
inline constexpr int64_t kStepOne = int64_t(1) << kStepFracBits;

// A quantization step q_s = q1 / 3^(s-1), with q1 held exactly as an
// integer multiple of 2^-16. Every lattice point of a channel is an integer
// multiple of its step, which keeps refinement arithmetic exact.
struct Step {
  int64_t q1_fixed = kStepOne;
  int level = 1;

  // Snaps a positive real step onto the 2^-16 grid (level 1).
  static Step from_real(double q);

  double q1() const { return double(q1_fixed) / double(kStepOne); }
  double value() const;
  Step finer() const { return {q1_fixed, level + 1}; }
  Step at_level(int s) const { return {q1_fixed, s}; }

  bool operator==(const Step&) const = default;
};

// Trit symbols of the refine path.
enum : int { kTritLeft = 1, kTritMid = 2, kTritRight = 3 };

// A quantized channel value: index * step.
struct QuantLattice {
  int64_t index = 0;
  Step step;
  int trit = 0;          // 1..3 when produced by a refinement, 0 otherwise
  bool clamped = false;  // input fell outside the refinement interval

  int level() const { return step.level; }
  double value() const;

  bool operator==(const QuantLattice& o) const
  {
    return index == o.index && step == o.step && trit == o.trit;
  }
};

// floor(f / step + 1/2), evaluated exactly for any finite double f.
int64_t lattice_index(double f, const Step& step);

// Real value of index * step, correctly rounded.
double lattice_value(int64_t index, const Step& step);

double pow3(int n);

// Round with ties toward +infinity.
QuantLattice round_quantize(double f, const Step& q);
double round_quantize(double f, double q);

// One trit-plane refinement: choose among prev -/0/+ prev.step/3, with a
// boundary tie going to the right-hand candidate.
QuantLattice trit_refine(double f, const QuantLattice& prev);

Step step_schedule(const Step& q1, int s);
double step_schedule(double q1, int s);

// Round at the first-decode level t, then s - t refinements.
QuantLattice quantize_at_level(double f, const Step& q1, int first_level, int target_level);

}  // namespace pcgs
