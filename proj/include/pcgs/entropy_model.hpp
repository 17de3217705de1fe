#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "pcgs/core_model.hpp"
#include "pcgs/quantizer.hpp"

namespace pcgs {

inline constexpr int kFreqBits = 16;
inline constexpr uint32_t kFreqTotal = uint32_t(1) << kFreqBits;

// Half-width of the Gaussian symbol window, in lattice steps.
inline constexpr int64_t kWindowHalf = 4096;
inline constexpr int kWindowSymbols = int(2 * kWindowHalf + 1);

// Fixed-point resolution of mu and sigma.
inline constexpr int kModelFracBits = 16;

//============================================================================
// Static cumulative-frequency table summing to 2^16, every symbol >= 1.
//
// Symbols outside [dense_begin, dense_begin + dense_count) have frequency
// exactly 1, which lets the 8193-symbol Gaussian window be stored as its
// high-probability core only.

class FreqTable {
public:
  FreqTable() = default;

  // Dense table; throws unless every freq >= 1 and the sum is 2^16.
  static FreqTable from_frequencies(std::span<const uint32_t> freqs);

  // num_symbols symbols, with dense_freqs at [dense_begin, ...) and 1 elsewhere.
  static FreqTable sparse(int num_symbols, int dense_begin, std::span<const uint32_t> dense_freqs);

  // Rebuilds in place, reusing storage.
  void assign_sparse(int num_symbols, int dense_begin, std::span<const uint32_t> dense_freqs);

  int size() const { return num_symbols_; }
  uint32_t cum(int sym) const;
  uint32_t freq(int sym) const { return cum(sym + 1) - cum(sym); }
  double probability(int sym) const { return double(freq(sym)) / kFreqTotal; }

  // The symbol s with cum(s) <= target < cum(s + 1).
  int find(uint32_t target) const;

  std::vector<uint32_t> frequencies() const;
  uint64_t digest() const;

  bool operator==(const FreqTable&) const = default;

private:
  int num_symbols_ = 0;
  int dense_begin_ = 0;
  std::vector<uint32_t> dense_cum_{0};  // dense_count + 1 entries, from 0
};

// Integer frequencies (total 2^16, each >= 1) from non-negative weights.
// Every symbol is first given one count; the remaining 2^16 - M counts
// are shared as floor(p * rest) and the leftover goes to the largest
// fractional remainders, compared at 2^-48 resolution with the lower index
// first on ties. unit_symbols extra zero-weight symbols count toward M
// without being listed.
std::vector<uint32_t> quantize_probabilities(std::span<const double> weights,
                                             size_t unit_symbols = 0);
void quantize_probabilities(std::span<const double> weights, size_t unit_symbols,
                            std::span<uint32_t> out);

//============================================================================

uint32_t spatial_hash(int32_t x, int32_t y, int32_t z);

// Concatenated trilinear interpolation over every resolution level.
void hash_feature(std::array<float, 3> x, const HashGrid& grid, std::span<double> out);
std::vector<double> hash_feature(std::array<float, 3> x, const HashGrid& grid);

// Forward pass: ReLU hidden layers, linear output.
void mlp_forward(const Mlp& mlp, std::span<const double> in, std::span<double> out);

//============================================================================

// Rate-head output for one channel, snapped to fixed point.
struct ChannelModel {
  int64_t q1_fixed = kStepOne;  // units of 2^-16
  int64_t mu_fixed = 0;         // units of 2^-16
  int64_t sigma_fixed = 1;      // units of 2^-16

  double q1() const { return double(q1_fixed) / double(kStepOne); }
  double mu() const { return double(mu_fixed) / double(int64_t(1) << kModelFracBits); }
  double sigma() const { return double(sigma_fixed) / double(int64_t(1) << kModelFracBits); }
  Step step(int level) const { return {q1_fixed, level}; }

  bool operator==(const ChannelModel&) const = default;
};

ChannelModel snap_channel_model(double q_raw, double mu, double sigma_raw, double q_base,
                                double sigma_min);

// Evaluates the rate head at one anchor; one model per channel.
std::vector<ChannelModel> eval_rate_head(std::span<const double> fh, int level,
                                         const EntropyNet& net);

//============================================================================

// Standard normal CDF and upper tail by a fixed Chebyshev-fitted erfc
// (absolute error below 1e-7).
double approx_erfc(double z);
double normal_cdf(double x);
double normal_sf(double x);

double gaussian_bin_prob(double fhat, double q, double mu, double sigma);
double gaussian_bin_prob(double fhat, double q, const ChannelModel& model);

// Window of symbols k in [k_mu - W, k_mu + W] on the lattice of step q,
// where k_mu = round(mu / q). Symbol index = k - first_index.
struct GaussianTable {
  FreqTable table;
  int64_t first_index = 0;

  int64_t last_index() const { return first_index + table.size() - 1; }
  int64_t clamp_index(int64_t k) const;
  int symbol_of(int64_t k) const { return int(k - first_index); }
  int64_t index_of(int sym) const { return first_index + sym; }
};

GaussianTable gaussian_freq_table(const ChannelModel& model, const Step& q);
void gaussian_freq_table(const ChannelModel& model, const Step& q, GaussianTable& out);

//============================================================================

// First-layer partial sums of the trit head for one (anchor, level); the
// per-channel input is only the normalized previous value.
class TritContext {
public:
  TritContext(std::span<const double> fh, int level, const EntropyNet& net);

  std::array<double, 3> logits(double prev_normalized) const;

private:
  const Mlp* mlp_;
  std::vector<double> base_;  // first-layer pre-activation without the value term
  std::vector<double> value_weight_;
};

// prev.value() / q1, exact from the lattice index.
double normalized_prev(const QuantLattice& prev);

std::array<double, 3> softmax3(const std::array<double, 3>& logits);
FreqTable trit_table_from_logits(const std::array<double, 3>& logits);
void trit_table_from_logits(const std::array<double, 3>& logits, FreqTable& out);

// Snapped probabilities of the three refinement candidates.
std::array<double, 3> trinomial_probs(const QuantLattice& prev, std::span<const double> fh,
                                      int level, const EntropyNet& net);
FreqTable trinomial_table(const QuantLattice& prev, std::span<const double> fh, int level,
                          const EntropyNet& net);

}  // namespace pcgs
