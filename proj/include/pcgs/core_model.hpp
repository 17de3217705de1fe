#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pcgs {

// Deepest supported level count. Steps are q1 / 3^(s-1) and the exact
// lattice arithmetic keeps 3^(s-1) inside 128-bit intermediates.
inline constexpr int kMaxLevels = 12;

//============================================================================
// Channel layout: D anchor-feature channels, 6 scaling channels and 3K
// offset channels, in that order.

struct ChannelLayout {
  int feat_dim = 50;
  int offsets_per_anchor = 10;

  int anchor_channels() const { return feat_dim + 6; }
  int offset_channels() const { return 3 * offsets_per_anchor; }
  int total() const { return anchor_channels() + offset_channels(); }
  int offset_channel(int k, int j) const { return anchor_channels() + 3 * k + j; }

  bool operator==(const ChannelLayout&) const = default;
};

//============================================================================

struct AnchorScene {
  int num_anchors = 0;
  int offsets_per_anchor = 0;
  int feat_dim = 0;

  std::vector<float> locations;     // N x 3
  std::vector<float> anchor_feats;  // N x D
  std::vector<float> scalings;      // N x 6
  std::vector<float> offsets;       // N x 3K

  static AnchorScene zeros(int n, int k, int d);

  ChannelLayout layout() const { return {feat_dim, offsets_per_anchor}; }

  // Unified per-channel view of an anchor's attributes.
  float channel(int anchor, int c) const;
  void set_channel(int anchor, int c, float v);

  std::array<float, 3> location(int anchor) const
  {
    const float* p = &locations[3 * size_t(anchor)];
    return {p[0], p[1], p[2]};
  }

  bool operator==(const AnchorScene&) const = default;
};

struct MaskParams {
  int num_anchors = 0;
  int offsets_per_anchor = 0;
  int num_levels = 0;
  std::vector<float> base_feats;   // N x K
  std::vector<float> level_feats;  // S x N x K, level-major
  float threshold = 0.01f;

  static MaskParams zeros(int n, int k, int s);

  float base(int anchor, int k) const
  {
    return base_feats[size_t(anchor) * offsets_per_anchor + k];
  }

  // level is 1-based.
  float level_feat(int level, int anchor, int k) const
  {
    return level_feats[(size_t(level - 1) * num_anchors + anchor) * offsets_per_anchor + k];
  }

  float& level_feat(int level, int anchor, int k)
  {
    return level_feats[(size_t(level - 1) * num_anchors + anchor) * offsets_per_anchor + k];
  }

  bool operator==(const MaskParams&) const = default;
};

//============================================================================
// Binary multiresolution hash grid. Every entry is one bit; a set bit reads
// as +1 and a cleared bit as -1.

struct HashGrid {
  std::vector<int> resolutions{16, 32, 64, 128};
  int table_size_log2 = 15;
  int feat_per_level = 4;
  std::array<float, 3> bbox_min{0.f, 0.f, 0.f};
  std::array<float, 3> bbox_max{1.f, 1.f, 1.f};
  std::vector<uint64_t> bits;

  // Allocates storage with every entry cleared (reads as -1).
  static HashGrid make(std::array<float, 3> lo, std::array<float, 3> hi);
  void allocate();

  int num_levels() const { return int(resolutions.size()); }
  int feature_width() const { return num_levels() * feat_per_level; }
  size_t table_size() const { return size_t(1) << table_size_log2; }
  size_t num_entries() const { return table_size() * num_levels() * feat_per_level; }

  size_t entry_index(int level, size_t slot, int feat) const
  {
    return (size_t(level) * table_size() + slot) * feat_per_level + feat;
  }

  bool bit(size_t entry) const { return (bits[entry >> 6] >> (entry & 63)) & 1u; }
  void set_bit(size_t entry, bool v)
  {
    uint64_t m = uint64_t(1) << (entry & 63);
    if (v)
      bits[entry >> 6] |= m;
    else
      bits[entry >> 6] &= ~m;
  }

  static float dequantize(bool b) { return b ? 1.f : -1.f; }

  bool operator==(const HashGrid&) const = default;
};

//============================================================================
// Feed-forward networks. ReLU between layers, linear output.

struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<float> weight;  // out x in, row-major
  std::vector<float> bias;    // out

  static DenseLayer zeros(int in, int out);
  bool operator==(const DenseLayer&) const = default;
};

struct Mlp {
  std::vector<DenseLayer> layers;

  // Zero-initialised network with the given widths (input, hidden..., output).
  static Mlp zeros(std::span<const int> widths);

  int input_width() const { return layers.empty() ? 0 : layers.front().in; }
  int output_width() const { return layers.empty() ? 0 : layers.back().out; }
  int max_width() const;

  bool operator==(const Mlp&) const = default;
};

struct EntropyNet {
  HashGrid grid;
  // (f^h, one-hot level) -> (q_raw, mu, sigma_raw) per channel.
  Mlp rate_head;
  // (prev value / q1, f^h, one-hot level) -> 3 logits.
  Mlp trit_head;
  std::vector<float> level_lambdas;
  float q_base = 1.0f;
  float sigma_min = 1e-4f;

  int num_levels() const { return int(level_lambdas.size()); }

  // Zero-weight network of the default shape for a layout and level set.
  static EntropyNet make(const ChannelLayout& layout, std::vector<float> lambdas,
                         HashGrid grid, int rate_hidden = 32, int trit_hidden = 16);

  bool operator==(const EntropyNet&) const = default;
};

struct LevelConfig {
  int num_levels = 0;
  std::vector<float> lambdas;
  ChannelLayout layout;

  bool operator==(const LevelConfig&) const = default;
};

// Example level sets from the reference experiments.
inline const std::vector<float> kLambdas3{8e-4f, 4e-4f, 0.5e-4f};
inline const std::vector<float> kLambdas4{4e-4f, 2.5e-4f, 1e-4f, 0.2e-4f};

// Everything the encoder consumes; the unit of the scene/model file.
struct SceneModel {
  AnchorScene scene;
  MaskParams masks;
  EntropyNet net;
  LevelConfig cfg;

  bool operator==(const SceneModel&) const = default;
};

// Returns one message per violated invariant; empty iff consistent.
std::vector<std::string> validate_scene(const AnchorScene& scene, const MaskParams& params,
                                        const EntropyNet& net, const LevelConfig& cfg);

inline std::vector<std::string>
validate_scene(const SceneModel& m)
{
  return validate_scene(m.scene, m.masks, m.net, m.cfg);
}

}  // namespace pcgs
