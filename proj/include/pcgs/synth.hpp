#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcgs/core_model.hpp"

namespace pcgs {

enum class SynthMode { calibrated, adversarial };
enum class TritInit { random, uniform };

// Synthetic scene recipe. Text form is one key=value per line; lists are
// comma-separated and '#' starts a comment.
struct SynthSpec {
  int num_anchors = 10000;
  int offsets_per_anchor = 10;
  int feat_dim = 50;
  int num_levels = 3;
  uint64_t seed = 1;

  // r(m^a_s) per level; must be non-decreasing in (0, 1].
  std::vector<double> anchor_ratio{0.5, 0.8, 1.0};
  // r(m^g_s) per level; empty picks a default between a_s / K and a_s.
  std::vector<double> gauss_ratio;

  SynthMode mode = SynthMode::calibrated;
  TritInit trit_init = TritInit::random;

  float mask_threshold = 0.01f;
  float q_base = 1.0f;
  float sigma_min = 1e-4f;
  double mu_scale = 4.0;     // spread of predicted means, in units of q_base
  double sigma_bias = 0.0;   // sigma = softplus(bias + ...) + sigma_min
  double grid_density = 0.5; // fraction of hash-grid bits set

  // Empty uses the built-in level set for 3 or 4 levels, else a geometric one.
  std::vector<float> lambdas;

  bool operator==(const SynthSpec&) const = default;
};

SynthSpec parse_synth_spec(const std::string& text);
std::string to_text(const SynthSpec& spec);

// Rejects unreachable or inconsistent targets with ErrorKind::argument.
void check_synth_spec(const SynthSpec& spec);

// Deterministic in the spec, including the seed.
SceneModel generate(const SynthSpec& spec);

}  // namespace pcgs
