#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "pcgs/container.hpp"
#include "pcgs/core_model.hpp"
#include "pcgs/entropy_model.hpp"
#include "pcgs/masking.hpp"
#include "pcgs/quantizer.hpp"

namespace pcgs {

// Quantized value of one channel: index on the lattice of Step{q1, level}.
struct ChannelState {
  int64_t index = 0;
  uint32_t q1_fixed = 0;

  bool operator==(const ChannelState&) const = default;
};

// Decoded scene after some number of levels. Anchor channels of present
// anchors sit on the level-s lattice; an offset stays on the lattice of the
// level its Gaussian was first decoded at.
struct Reconstruction {
  int level = 0;
  int num_anchors = 0;
  ChannelLayout layout;
  MaskState masks;
  std::vector<float> locations;             // N x 3, dequantized
  std::vector<ChannelState> anchor_state;   // N x (D + 6)
  std::vector<ChannelState> offset_state;   // N x 3K

  bool anchor_present(int i) const { return masks.anchor_valid(i, level); }
  bool gauss_present(int i, int k) const
  {
    int t = masks.gauss_level(i, k);
    return t != 0 && t <= level;
  }

  QuantLattice anchor_lattice(int i, int c) const;
  QuantLattice offset_lattice(int i, int k, int j) const;
  double anchor_value(int i, int c) const { return anchor_lattice(i, c).value(); }
  double offset_value(int i, int k, int j) const { return offset_lattice(i, k, j).value(); }

  double anchor_coverage() const { return masks.anchor_ratio(level); }
  double gauss_coverage() const { return masks.gauss_ratio(level); }

  bool operator==(const Reconstruction&) const = default;
};

enum class SymbolKind : uint8_t { new_anchor, refine, new_offset };

// One coded symbol with the table it was coded under, reported in coding
// order on both the encode and decode paths.
struct TableEvent {
  int level;
  int anchor;
  int channel;
  SymbolKind kind;
  const FreqTable* table;
  int symbol;
};

using TableObserver = std::function<void(const TableEvent&)>;

// Ideal bits -log2 p per term of the incremental entropy sum.
struct RateTerms {
  double new_anchor_bits = 0;
  double refine_bits = 0;
  double new_offset_bits = 0;
  size_t new_anchor_symbols = 0;
  size_t refine_symbols = 0;
  size_t new_offset_symbols = 0;
  size_t clamped = 0;  // values pulled into the representable range

  double total_bits() const { return new_anchor_bits + refine_bits + new_offset_bits; }
  size_t total_symbols() const
  {
    return new_anchor_symbols + refine_symbols + new_offset_symbols;
  }
};

struct EncodeOptions {
  int max_levels = 0;  // 0 = every configured level
  int threads = 0;     // 0 = PCGS_THREADS or hardware count
  bool keep_states = false;
  TableObserver observer;
};

struct EncodeResult {
  ProgressiveBitstream stream;
  std::vector<RateTerms> rates;         // per encoded level
  std::vector<Reconstruction> states;   // per level, when keep_states
};

EncodeResult encode(const SceneModel& model, const EncodeOptions& opts = {});

inline ProgressiveBitstream
encode(const AnchorScene& scene, const MaskParams& params, const EntropyNet& net,
       const LevelConfig& cfg)
{
  return encode(SceneModel{scene, params, net, cfg}).stream;
}

struct DecodeOptions {
  int threads = 0;
  TableObserver observer;
  std::function<void(const Reconstruction&)> on_level;
};

// s_max = 0 decodes every level present in the stream.
Reconstruction decode(const ProgressiveBitstream& bs, int s_max = 0,
                      const DecodeOptions& opts = {});

// Runs the coding schedule without a coder; level is 1-based.
RateTerms estimate_rate(const SceneModel& model, int level);
std::vector<RateTerms> estimate_rates(const SceneModel& model);

struct ErrorReport {
  double mse_feat = 0;
  double mse_scaling = 0;
  double mse_offsets = 0;
  double anchor_coverage = 0;
  double gauss_coverage = 0;
  size_t anchors_counted = 0;
  size_t gaussians_counted = 0;
};

// MSE over present anchors (and present Gaussians for offsets). When
// `subset` is given, only anchors with subset[i] != 0 are counted.
ErrorReport reconstruction_error(const AnchorScene& scene, const Reconstruction& recon,
                                 std::span<const uint8_t> subset = {});

// PCGS_THREADS if set, else `requested` if positive, else hardware count.
int resolve_threads(int requested);

}  // namespace pcgs
