#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pcgs/core_model.hpp"

namespace pcgs {

using BitMask = std::vector<uint8_t>;

// m^g_s, N x K. level in [1, S].
BitMask compute_gauss_mask(const MaskParams& params, int level);

// m^a_s[i] = OR_k m^g_s[i, k].
BitMask derive_anchor_mask(std::span<const uint8_t> gauss_mask, int offsets_per_anchor);

// mask_s - mask_prev; throws ErrorKind::invariant unless mask_prev <= mask_s.
BitMask delta_mask(std::span<const uint8_t> mask_s, std::span<const uint8_t> mask_prev);

// First-decode level per Gaussian and anchor, 0 meaning never decoded.
struct MaskState {
  int num_anchors = 0;
  int offsets_per_anchor = 0;
  int num_levels = 0;
  std::vector<uint8_t> gauss_first_level;   // N x K
  std::vector<uint8_t> anchor_first_level;  // N

  // Rebuilds anchor_first_level from gauss_first_level.
  static MaskState from_gauss_levels(int n, int k, int s, std::vector<uint8_t> gauss_levels);

  uint8_t gauss_level(int anchor, int k) const
  {
    return gauss_first_level[size_t(anchor) * offsets_per_anchor + k];
  }

  BitMask gauss_mask(int level) const;
  BitMask anchor_mask(int level) const;

  bool anchor_valid(int anchor, int level) const
  {
    int t = anchor_first_level[anchor];
    return t != 0 && t <= level;
  }

  size_t anchors_valid(int level) const;
  size_t gaussians_valid(int level) const;
  double anchor_ratio(int level) const;
  double gauss_ratio(int level) const;

  bool operator==(const MaskState&) const = default;
};

MaskState build_mask_state(const MaskParams& params);

}  // namespace pcgs
