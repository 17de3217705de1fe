#include "pcgs/masking.hpp"

#include <algorithm>
#include <string>

#include "pcgs/activations.hpp"
#include "pcgs/error.hpp"

namespace pcgs {

BitMask
compute_gauss_mask(const MaskParams& params, int level)
{
  if (level < 1 || level > params.num_levels)
    fail(ErrorKind::argument, "mask level " + std::to_string(level) + " out of range");

  const int n = params.num_anchors;
  const int k = params.offsets_per_anchor;
  BitMask mask(size_t(n) * k);
  for (int i = 0; i < n; i++) {
    for (int g = 0; g < k; g++) {
      double arg = params.base(i, g);
      for (int l = 1; l <= level; l++)
        arg += softplus(params.level_feat(l, i, g));
      mask[size_t(i) * k + g] = sigmoid(arg) > double(params.threshold);
    }
  }
  return mask;
}

BitMask
derive_anchor_mask(std::span<const uint8_t> gauss_mask, int offsets_per_anchor)
{
  if (offsets_per_anchor <= 0 || gauss_mask.size() % offsets_per_anchor != 0)
    fail(ErrorKind::argument, "Gaussian mask size is not a multiple of K");
  size_t n = gauss_mask.size() / offsets_per_anchor;
  BitMask out(n);
  for (size_t i = 0; i < n; i++) {
    auto row = gauss_mask.subspan(i * offsets_per_anchor, offsets_per_anchor);
    out[i] = std::any_of(row.begin(), row.end(), [](uint8_t b) { return b != 0; });
  }
  return out;
}

BitMask
delta_mask(std::span<const uint8_t> mask_s, std::span<const uint8_t> mask_prev)
{
  if (mask_s.size() != mask_prev.size())
    fail(ErrorKind::argument, "mask sizes differ");
  BitMask out(mask_s.size());
  for (size_t i = 0; i < mask_s.size(); i++) {
    if (mask_prev[i] > mask_s[i])
      fail(ErrorKind::invariant,
           "mask is not monotone at element " + std::to_string(i));
    out[i] = mask_s[i] - mask_prev[i];
  }
  return out;
}

MaskState
MaskState::from_gauss_levels(int n, int k, int s, std::vector<uint8_t> gauss_levels)
{
  if (gauss_levels.size() != size_t(n) * k)
    fail(ErrorKind::invariant, "first-level table has wrong extent");
  MaskState st;
  st.num_anchors = n;
  st.offsets_per_anchor = k;
  st.num_levels = s;
  st.gauss_first_level = std::move(gauss_levels);
  st.anchor_first_level.assign(n, 0);
  for (int i = 0; i < n; i++) {
    uint8_t best = 0;
    for (int g = 0; g < k; g++) {
      uint8_t t = st.gauss_level(i, g);
      if (t > s)
        fail(ErrorKind::invariant, "first-decode level exceeds level count");
      if (t != 0 && (best == 0 || t < best))
        best = t;
    }
    st.anchor_first_level[i] = best;
  }
  return st;
}

BitMask
MaskState::gauss_mask(int level) const
{
  BitMask m(gauss_first_level.size());
  for (size_t j = 0; j < m.size(); j++)
    m[j] = gauss_first_level[j] != 0 && gauss_first_level[j] <= level;
  return m;
}

BitMask
MaskState::anchor_mask(int level) const
{
  BitMask m(anchor_first_level.size());
  for (size_t i = 0; i < m.size(); i++)
    m[i] = anchor_valid(int(i), level);
  return m;
}

size_t
MaskState::anchors_valid(int level) const
{
  return std::count_if(anchor_first_level.begin(), anchor_first_level.end(),
                       [&](uint8_t t) { return t != 0 && t <= level; });
}

size_t
MaskState::gaussians_valid(int level) const
{
  return std::count_if(gauss_first_level.begin(), gauss_first_level.end(),
                       [&](uint8_t t) { return t != 0 && t <= level; });
}

double
MaskState::anchor_ratio(int level) const
{
  return num_anchors ? double(anchors_valid(level)) / num_anchors : 0.0;
}

double
MaskState::gauss_ratio(int level) const
{
  return gauss_first_level.empty()
    ? 0.0
    : double(gaussians_valid(level)) / double(gauss_first_level.size());
}

MaskState
build_mask_state(const MaskParams& params)
{
  const int n = params.num_anchors;
  const int k = params.offsets_per_anchor;
  const int s = params.num_levels;
  if (s > kMaxLevels)
    fail(ErrorKind::invariant, "too many levels");

  // Same per-element evaluation as compute_gauss_mask, accumulated once.
  std::vector<uint8_t> first(size_t(n) * k, 0);
  for (int i = 0; i < n; i++) {
    for (int g = 0; g < k; g++) {
      double arg = params.base(i, g);
      for (int l = 1; l <= s; l++) {
        arg += softplus(params.level_feat(l, i, g));
        if (sigmoid(arg) > double(params.threshold)) {
          first[size_t(i) * k + g] = uint8_t(l);
          break;
        }
      }
    }
  }
  return MaskState::from_gauss_levels(n, k, s, std::move(first));
}

}  // namespace pcgs
