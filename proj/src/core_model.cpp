#include "pcgs/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pcgs/entropy_model.hpp"

namespace pcgs {

AnchorScene
AnchorScene::zeros(int n, int k, int d)
{
  AnchorScene s;
  s.num_anchors = n;
  s.offsets_per_anchor = k;
  s.feat_dim = d;
  s.locations.assign(size_t(n) * 3, 0.f);
  s.anchor_feats.assign(size_t(n) * d, 0.f);
  s.scalings.assign(size_t(n) * 6, 0.f);
  s.offsets.assign(size_t(n) * 3 * k, 0.f);
  return s;
}

float
AnchorScene::channel(int anchor, int c) const
{
  if (c < feat_dim)
    return anchor_feats[size_t(anchor) * feat_dim + c];
  c -= feat_dim;
  if (c < 6)
    return scalings[size_t(anchor) * 6 + c];
  c -= 6;
  return offsets[size_t(anchor) * 3 * offsets_per_anchor + c];
}

void
AnchorScene::set_channel(int anchor, int c, float v)
{
  if (c < feat_dim) {
    anchor_feats[size_t(anchor) * feat_dim + c] = v;
    return;
  }
  c -= feat_dim;
  if (c < 6) {
    scalings[size_t(anchor) * 6 + c] = v;
    return;
  }
  c -= 6;
  offsets[size_t(anchor) * 3 * offsets_per_anchor + c] = v;
}

MaskParams
MaskParams::zeros(int n, int k, int s)
{
  MaskParams p;
  p.num_anchors = n;
  p.offsets_per_anchor = k;
  p.num_levels = s;
  p.base_feats.assign(size_t(n) * k, 0.f);
  p.level_feats.assign(size_t(s) * n * k, 0.f);
  return p;
}

HashGrid
HashGrid::make(std::array<float, 3> lo, std::array<float, 3> hi)
{
  HashGrid g;
  g.bbox_min = lo;
  g.bbox_max = hi;
  g.allocate();
  return g;
}

void
HashGrid::allocate()
{
  bits.assign((num_entries() + 63) / 64, 0);
}

DenseLayer
DenseLayer::zeros(int in, int out)
{
  return {in, out, std::vector<float>(size_t(in) * out, 0.f), std::vector<float>(out, 0.f)};
}

Mlp
Mlp::zeros(std::span<const int> widths)
{
  Mlp m;
  for (size_t i = 0; i + 1 < widths.size(); i++)
    m.layers.push_back(DenseLayer::zeros(widths[i], widths[i + 1]));
  return m;
}

int
Mlp::max_width() const
{
  int w = 0;
  for (const auto& l : layers)
    w = std::max({w, l.in, l.out});
  return w;
}

EntropyNet
EntropyNet::make(const ChannelLayout& layout, std::vector<float> lambdas, HashGrid grid,
                 int rate_hidden, int trit_hidden)
{
  EntropyNet net;
  const int s = int(lambdas.size());
  const int fw = grid.feature_width();
  net.grid = std::move(grid);
  const int rate[] = {fw + s, rate_hidden, rate_hidden, 3 * layout.total()};
  const int trit[] = {1 + fw + s, trit_hidden, trit_hidden, 3};
  net.rate_head = Mlp::zeros(rate);
  net.trit_head = Mlp::zeros(trit);
  net.level_lambdas = std::move(lambdas);
  return net;
}

//============================================================================

namespace {

bool
all_finite(std::span<const float> v)
{
  return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

void
check_extent(std::vector<std::string>& out, const char* what, size_t have, size_t want)
{
  if (have != want)
    out.push_back(std::string(what) + ": expected " + std::to_string(want)
                  + " values, found " + std::to_string(have));
}

void
check_mlp(std::vector<std::string>& out, const char* what, const Mlp& mlp, int in, int outw)
{
  if (mlp.layers.size() != 3) {
    out.push_back(std::string(what) + ": expected 2 hidden layers, found "
                  + std::to_string(int(mlp.layers.size()) - 1));
  }
  if (mlp.layers.empty())
    return;
  if (mlp.input_width() != in)
    out.push_back(std::string(what) + ": input width " + std::to_string(mlp.input_width())
                  + ", expected " + std::to_string(in));
  if (mlp.output_width() != outw)
    out.push_back(std::string(what) + ": output width " + std::to_string(mlp.output_width())
                  + ", expected " + std::to_string(outw));
  for (size_t l = 0; l < mlp.layers.size(); l++) {
    const auto& layer = mlp.layers[l];
    if (l > 0 && layer.in != mlp.layers[l - 1].out)
      out.push_back(std::string(what) + ": layer widths do not chain");
    if (layer.weight.size() != size_t(layer.in) * layer.out
        || layer.bias.size() != size_t(layer.out))
      out.push_back(std::string(what) + ": layer storage does not match its widths");
    else if (!all_finite(layer.weight) || !all_finite(layer.bias))
      out.push_back(std::string(what) + ": non-finite weight");
  }
}

}  // namespace

std::vector<std::string>
validate_scene(const AnchorScene& scene, const MaskParams& params, const EntropyNet& net,
               const LevelConfig& cfg)
{
  std::vector<std::string> out;
  const size_t n = size_t(std::max(scene.num_anchors, 0));
  const size_t k = size_t(std::max(scene.offsets_per_anchor, 0));
  const size_t d = size_t(std::max(scene.feat_dim, 0));

  if (scene.num_anchors < 0 || scene.offsets_per_anchor <= 0 || scene.feat_dim <= 0)
    out.push_back("scene extents must be positive");
  check_extent(out, "locations", scene.locations.size(), n * 3);
  check_extent(out, "anchor features", scene.anchor_feats.size(), n * d);
  check_extent(out, "scalings", scene.scalings.size(), n * 6);
  check_extent(out, "offsets", scene.offsets.size(), n * 3 * k);
  if (!all_finite(scene.locations))
    out.push_back("locations: non-finite value");
  if (!all_finite(scene.anchor_feats) || !all_finite(scene.scalings)
      || !all_finite(scene.offsets))
    out.push_back("attributes: non-finite value");

  const int s = cfg.num_levels;
  if (s < 1 || s > kMaxLevels)
    out.push_back("level count " + std::to_string(s) + " outside [1, "
                  + std::to_string(kMaxLevels) + "]");
  if (cfg.lambdas.size() != size_t(std::max(s, 0)))
    out.push_back("level config: lambda count does not match level count");
  if (cfg.layout != scene.layout())
    out.push_back("level config: channel layout does not match the scene");
  if (cfg.layout.total() != cfg.layout.feat_dim + 6 + 3 * cfg.layout.offsets_per_anchor)
    out.push_back("level config: channel layout total is inconsistent");

  if (params.num_anchors != scene.num_anchors || params.offsets_per_anchor != scene.offsets_per_anchor)
    out.push_back("mask params: anchor/offset extents do not match the scene");
  if (params.num_levels != s)
    out.push_back("mask params: level count does not match the level config");
  check_extent(out, "mask base features", params.base_feats.size(), n * k);
  check_extent(out, "mask level features", params.level_feats.size(),
               size_t(std::max(params.num_levels, 0)) * n * k);
  if (!(params.threshold > 0.f && params.threshold < 1.f))
    out.push_back("mask threshold must lie in (0, 1)");
  if (!all_finite(params.base_feats) || !all_finite(params.level_feats))
    out.push_back("mask params: non-finite value");

  const HashGrid& g = net.grid;
  if (g.resolutions.empty() || g.feat_per_level <= 0 || g.table_size_log2 < 1
      || g.table_size_log2 > 30)
    out.push_back("hash grid: invalid shape");
  else {
    if (std::any_of(g.resolutions.begin(), g.resolutions.end(), [](int r) { return r < 1; }))
      out.push_back("hash grid: resolutions must be positive");
    check_extent(out, "hash grid bits (u64 words)", g.bits.size(), (g.num_entries() + 63) / 64);
  }
  for (int a = 0; a < 3; a++) {
    if (!(g.bbox_max[a] > g.bbox_min[a]))
      out.push_back("hash grid: bounding box is empty on axis " + std::to_string(a));
  }
  for (size_t i = 0; i < n && scene.locations.size() == n * 3; i++) {
    auto x = scene.location(int(i));
    bool inside = true;
    for (int a = 0; a < 3; a++)
      inside = inside && x[a] >= g.bbox_min[a] && x[a] <= g.bbox_max[a];
    if (!inside) {
      out.push_back("anchor " + std::to_string(i) + " lies outside the hash-grid bounding box");
      break;
    }
  }

  if (net.level_lambdas != cfg.lambdas)
    out.push_back("entropy net: lambdas differ from the level config");
  for (size_t l = 1; l < net.level_lambdas.size(); l++) {
    if (!(net.level_lambdas[l] < net.level_lambdas[l - 1])) {
      out.push_back("entropy net: lambdas must be strictly decreasing");
      break;
    }
  }
  if (!(net.q_base > 0.f) || !std::isfinite(net.q_base))
    out.push_back("entropy net: q_base must be positive");
  if (!(net.sigma_min > 0.f) || !std::isfinite(net.sigma_min))
    out.push_back("entropy net: sigma_min must be positive");

  const int fw = g.resolutions.empty() ? 0 : g.feature_width();
  check_mlp(out, "rate head", net.rate_head, fw + s, 3 * cfg.layout.total());
  check_mlp(out, "trit head", net.trit_head, 1 + fw + s, 3);

  // Activation contract on a sample of anchors: q > 0 and sigma >= sigma_min.
  if (out.empty()) {
    const int sample = int(std::min<size_t>(n, 16));
    for (int i = 0; i < sample; i++) {
      auto fh = hash_feature(scene.location(i), g);
      for (int l = 1; l <= s; l++) {
        for (const auto& m : eval_rate_head(fh, l, net)) {
          if (m.q1_fixed < 1 || m.sigma() < double(net.sigma_min)) {
            out.push_back("rate head violates q > 0 / sigma >= sigma_min at anchor "
                          + std::to_string(i));
            return out;
          }
        }
      }
    }
  }
  return out;
}

}  // namespace pcgs
