#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "pcgs/codec.hpp"
#include "pcgs/synth.hpp"

namespace test {

// Small scenes keep the unit suite fast; extents still exercise every path.
inline pcgs::SynthSpec
small_spec(uint64_t seed = 7, int levels = 3)
{
  pcgs::SynthSpec s;
  s.num_anchors = 300;
  s.offsets_per_anchor = 4;
  s.feat_dim = 8;
  s.num_levels = levels;
  s.seed = seed;
  s.anchor_ratio.clear();
  for (int l = 1; l <= levels; l++)
    s.anchor_ratio.push_back(l == levels ? 1.0 : 0.3 + 0.5 * (l - 1) / double(levels));
  return s;
}

inline pcgs::SceneModel
small_scene(uint64_t seed = 7, int levels = 3)
{
  return pcgs::generate(small_spec(seed, levels));
}

inline std::vector<uint8_t>
present_mask(const pcgs::Reconstruction& r)
{
  std::vector<uint8_t> m(r.num_anchors);
  for (int i = 0; i < r.num_anchors; i++)
    m[i] = r.anchor_present(i);
  return m;
}

}  // namespace test
