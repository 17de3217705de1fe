#include "pcgs/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "pcgs/container.hpp"
#include "pcgs/entropy_model.hpp"
#include "pcgs/error.hpp"

namespace pcgs {

namespace {

// Portable draws on top of mt19937_64; the standard distributions are
// implementation-defined and would tie scene files to one library.
class Rng {
public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  double uniform() { return double(gen_() >> 11) * 0x1p-53; }

  double normal()
  {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do
      u1 = uniform();
    while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

  uint64_t below(uint64_t n) { return gen_() % n; }

  template<typename T>
  void shuffle(std::vector<T>& v)
  {
    for (size_t i = v.size(); i > 1; i--)
      std::swap(v[i - 1], v[below(i)]);
  }

private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0;
};

std::string
trim(const std::string& s)
{
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos)
    return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

template<typename T>
T
parse_number(const std::string& key, const std::string& v)
{
  try {
    size_t used = 0;
    T out;
    if constexpr (std::is_same_v<T, int>)
      out = std::stoi(v, &used);
    else if constexpr (std::is_same_v<T, uint64_t>)
      out = std::stoull(v, &used);
    else if constexpr (std::is_same_v<T, float>)
      out = std::stof(v, &used);
    else
      out = std::stod(v, &used);
    if (used != v.size())
      throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    fail(ErrorKind::argument, "synth spec: bad value for " + key + ": '" + v + "'");
  }
}

template<typename T>
std::vector<T>
parse_list(const std::string& key, const std::string& v)
{
  std::vector<T> out;
  if (trim(v).empty())
    return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(parse_number<T>(key, trim(item)));
  return out;
}

template<typename T>
std::string
join(const std::vector<T>& v)
{
  std::string out;
  char buf[40];
  for (size_t i = 0; i < v.size(); i++) {
    std::snprintf(buf, sizeof buf, "%.9g", double(v[i]));
    out += (i ? "," : "") + std::string(buf);
  }
  return out;
}

std::string
num(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::vector<double>
gauss_targets(const SynthSpec& spec)
{
  if (!spec.gauss_ratio.empty())
    return spec.gauss_ratio;
  const int S = spec.num_levels;
  std::vector<double> g(S);
  for (int s = 1; s <= S; s++) {
    double a = spec.anchor_ratio[s - 1];
    g[s - 1] = spec.offsets_per_anchor == 1 ? a : a * (0.5 + 0.5 * double(s) / S);
  }
  return g;
}

std::vector<float>
default_lambdas(int s)
{
  if (s == 3)
    return kLambdas3;
  if (s == 4)
    return kLambdas4;
  std::vector<float> out(s);
  for (int i = 0; i < s; i++)
    out[i] = float(8e-4 * std::pow(0.5, i));
  return out;
}

void
init_dense(DenseLayer& l, Rng& rng, double bias_scale)
{
  double scale = std::sqrt(2.0 / l.in);
  for (auto& w : l.weight)
    w = float(rng.normal() * scale);
  for (auto& b : l.bias)
    b = float(rng.normal() * bias_scale);
}

// Hidden activations of the rate head at a hash feature and level.
std::vector<double>
rate_hidden(const EntropyNet& net, std::span<const double> fh, int level)
{
  Mlp trunk;
  trunk.layers.assign(net.rate_head.layers.begin(), net.rate_head.layers.end() - 1);
  std::vector<double> in(fh.begin(), fh.end());
  in.resize(fh.size() + net.num_levels(), 0.0);
  in[fh.size() + level - 1] = 1.0;
  std::vector<double> out(trunk.output_width());
  mlp_forward(trunk, in, out);
  for (double& h : out)
    h = std::max(h, 0.0);
  return out;
}

EntropyNet
make_net(const SynthSpec& spec, const ChannelLayout& layout, std::vector<float> lambdas,
         Rng& rng)
{
  HashGrid grid = HashGrid::make({0.f, 0.f, 0.f}, {1.f, 1.f, 1.f});
  for (size_t e = 0; e < grid.num_entries(); e++)
    grid.set_bit(e, rng.uniform() < spec.grid_density);

  EntropyNet net = EntropyNet::make(layout, std::move(lambdas), std::move(grid));
  net.q_base = spec.q_base;
  net.sigma_min = spec.sigma_min;

  auto& rate = net.rate_head.layers;
  init_dense(rate[0], rng, 0.1);
  init_dense(rate[1], rng, 0.1);
  DenseLayer& last = rate.back();
  for (auto& w : last.weight)
    w = float(rng.normal());
  std::fill(last.bias.begin(), last.bias.end(), 0.f);

  // Rescale each output row so its spread across locations is as requested:
  // q within about 20% of q_base, mu with std mu_scale * q_base, sigma_raw
  // with std 0.5 around sigma_bias.
  constexpr int kProbe = 256;
  std::vector<std::vector<double>> hidden;
  for (int p = 0; p < kProbe; p++) {
    std::array<float, 3> x{float(rng.uniform()), float(rng.uniform()), float(rng.uniform())};
    auto fh = hash_feature(x, net.grid);
    hidden.push_back(rate_hidden(net, fh, 1 + int(rng.below(uint64_t(net.num_levels())))));
  }
  const double target[3] = {0.2, spec.mu_scale * spec.q_base, 0.5};
  for (int o = 0; o < last.out; o++) {
    float* w = &last.weight[size_t(o) * last.in];
    double sum = 0, sq = 0;
    for (const auto& h : hidden) {
      double v = 0;
      for (int i = 0; i < last.in; i++)
        v += double(w[i]) * h[i];
      sum += v;
      sq += v * v;
    }
    double mean = sum / kProbe;
    double sd = std::sqrt(std::max(sq / kProbe - mean * mean, 0.0));
    double k = sd > 1e-12 ? target[o % 3] / sd : 0.0;
    for (int i = 0; i < last.in; i++)
      w[i] = float(double(w[i]) * k);
    last.bias[o] = float(-mean * k + (o % 3 == 2 ? spec.sigma_bias : 0.0));
  }

  if (spec.trit_init == TritInit::random) {
    auto& trit = net.trit_head.layers;
    init_dense(trit[0], rng, 0.1);
    init_dense(trit[1], rng, 0.1);
    init_dense(trit[2], rng, 0.1);
  }
  return net;
}

// First-decode level per anchor and per Gaussian, hitting the integer
// targets exactly.
std::vector<uint8_t>
assign_levels(const SynthSpec& spec, Rng& rng)
{
  const int N = spec.num_anchors;
  const int K = spec.offsets_per_anchor;
  const int S = spec.num_levels;
  const auto g_ratio = gauss_targets(spec);

  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  std::vector<uint8_t> levels(size_t(N) * K, 0);
  std::vector<size_t> free_slots;
  int64_t anchors_prev = 0, gauss_prev = 0;
  for (int s = 1; s <= S; s++) {
    int64_t a = std::llround(spec.anchor_ratio[s - 1] * N);
    a = std::clamp<int64_t>(a, anchors_prev, N);
    int64_t g = std::llround(g_ratio[s - 1] * double(N) * K);
    g = std::clamp<int64_t>(g, gauss_prev + (a - anchors_prev), a * K);

    // Each new anchor gets one Gaussian; the rest are drawn from every
    // still-undecoded slot of anchors valid at this level.
    for (int64_t r = anchors_prev; r < a; r++) {
      int i = order[r];
      size_t first = size_t(rng.below(uint64_t(K)));
      levels[size_t(i) * K + first] = uint8_t(s);
      for (int k = 0; k < K; k++)
        if (size_t(k) != first)
          free_slots.push_back(size_t(i) * K + k);
    }
    int64_t extra = g - gauss_prev - (a - anchors_prev);
    for (int64_t e = 0; e < extra; e++) {
      size_t pick = size_t(rng.below(free_slots.size()));
      levels[free_slots[pick]] = uint8_t(s);
      free_slots[pick] = free_slots.back();
      free_slots.pop_back();
    }
    anchors_prev = a;
    gauss_prev = g;
  }
  return levels;
}

// Features whose accumulated mask argument first crosses the threshold at
// the assigned level, with margins far above float rounding.
MaskParams
realize_masks(const SynthSpec& spec, const std::vector<uint8_t>& levels, Rng& rng)
{
  const int N = spec.num_anchors;
  const int K = spec.offsets_per_anchor;
  const int S = spec.num_levels;
  const double eps = spec.mask_threshold;
  const double theta = std::log(eps / (1.0 - eps));

  MaskParams p = MaskParams::zeros(N, K, S);
  p.threshold = spec.mask_threshold;
  for (int i = 0; i < N; i++) {
    for (int k = 0; k < K; k++) {
      const int t = levels[size_t(i) * K + k];
      p.base_feats[size_t(i) * K + k] = float(theta - 1.0 - rng.uniform());
      for (int l = 1; l <= S; l++) {
        double f;
        if (t == 0 || l < t)
          f = -5.0 - rng.uniform();        // softplus below 0.007
        else if (l == t)
          f = 2.0 + 2.0 * rng.uniform();   // softplus above 2.1
        else
          f = rng.normal();
        p.level_feat(l, i, k) = float(f);
      }
    }
  }
  return p;
}

}  // namespace

//============================================================================

SynthSpec
parse_synth_spec(const std::string& text)
{
  SynthSpec spec;
  bool lambdas_set = false;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    lineno++;
    if (auto hash = line.find('#'); hash != std::string::npos)
      line.resize(hash);
    line = trim(line);
    if (line.empty())
      continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::argument, "synth spec line " + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    std::string v = trim(line.substr(eq + 1));

    if (key == "anchors")
      spec.num_anchors = parse_number<int>(key, v);
    else if (key == "offsets")
      spec.offsets_per_anchor = parse_number<int>(key, v);
    else if (key == "feat_dim")
      spec.feat_dim = parse_number<int>(key, v);
    else if (key == "levels")
      spec.num_levels = parse_number<int>(key, v);
    else if (key == "seed")
      spec.seed = parse_number<uint64_t>(key, v);
    else if (key == "anchor_ratio")
      spec.anchor_ratio = parse_list<double>(key, v);
    else if (key == "gauss_ratio")
      spec.gauss_ratio = parse_list<double>(key, v);
    else if (key == "mode") {
      if (v == "calibrated")
        spec.mode = SynthMode::calibrated;
      else if (v == "adversarial")
        spec.mode = SynthMode::adversarial;
      else
        fail(ErrorKind::argument, "synth spec: mode must be calibrated or adversarial");
    } else if (key == "trit_init") {
      if (v == "random")
        spec.trit_init = TritInit::random;
      else if (v == "uniform")
        spec.trit_init = TritInit::uniform;
      else
        fail(ErrorKind::argument, "synth spec: trit_init must be random or uniform");
    } else if (key == "mask_threshold")
      spec.mask_threshold = parse_number<float>(key, v);
    else if (key == "q_base")
      spec.q_base = parse_number<float>(key, v);
    else if (key == "sigma_min")
      spec.sigma_min = parse_number<float>(key, v);
    else if (key == "mu_scale")
      spec.mu_scale = parse_number<double>(key, v);
    else if (key == "sigma_bias")
      spec.sigma_bias = parse_number<double>(key, v);
    else if (key == "grid_density")
      spec.grid_density = parse_number<double>(key, v);
    else if (key == "lambdas") {
      spec.lambdas = parse_list<float>(key, v);
      lambdas_set = true;
    } else
      fail(ErrorKind::argument, "synth spec: unknown key '" + key + "'");
  }
  if (!lambdas_set)
    spec.lambdas.clear();
  return spec;
}

std::string
to_text(const SynthSpec& spec)
{
  std::ostringstream o;
  o << "anchors=" << spec.num_anchors << "\n"
    << "offsets=" << spec.offsets_per_anchor << "\n"
    << "feat_dim=" << spec.feat_dim << "\n"
    << "levels=" << spec.num_levels << "\n"
    << "seed=" << spec.seed << "\n"
    << "anchor_ratio=" << join(spec.anchor_ratio) << "\n"
    << "gauss_ratio=" << join(spec.gauss_ratio) << "\n"
    << "mode=" << (spec.mode == SynthMode::calibrated ? "calibrated" : "adversarial") << "\n"
    << "trit_init=" << (spec.trit_init == TritInit::random ? "random" : "uniform") << "\n"
    << "mask_threshold=" << num(spec.mask_threshold) << "\n"
    << "q_base=" << num(spec.q_base) << "\n"
    << "sigma_min=" << num(spec.sigma_min) << "\n"
    << "mu_scale=" << num(spec.mu_scale) << "\n"
    << "sigma_bias=" << num(spec.sigma_bias) << "\n"
    << "grid_density=" << num(spec.grid_density) << "\n";
  if (!spec.lambdas.empty())
    o << "lambdas=" << join(spec.lambdas) << "\n";
  return o.str();
}

void
check_synth_spec(const SynthSpec& spec)
{
  auto reject = [](const std::string& why) { fail(ErrorKind::argument, "synth spec: " + why); };
  const int S = spec.num_levels;
  const int K = spec.offsets_per_anchor;
  if (spec.num_anchors < 0 || K < 1 || spec.feat_dim < 1)
    reject("anchors must be >= 0, offsets and feat_dim >= 1");
  if (K > 255)
    reject("offsets must be at most 255");
  if (S < 1 || S > kMaxLevels)
    reject("levels must lie in [1, " + std::to_string(kMaxLevels) + "]");
  if (spec.anchor_ratio.size() != size_t(S))
    reject("anchor_ratio needs one entry per level");
  for (int s = 0; s < S; s++) {
    double a = spec.anchor_ratio[s];
    if (!(a >= 0.0 && a <= 1.0))
      reject("anchor_ratio entries must lie in [0, 1]");
    if (s > 0 && a < spec.anchor_ratio[s - 1])
      reject("anchor_ratio must be non-decreasing across levels");
  }
  if (!spec.gauss_ratio.empty()) {
    if (spec.gauss_ratio.size() != size_t(S))
      reject("gauss_ratio needs one entry per level");
    constexpr double tol = 1e-9;
    for (int s = 0; s < S; s++) {
      double g = spec.gauss_ratio[s];
      double a = spec.anchor_ratio[s];
      if (s > 0 && g < spec.gauss_ratio[s - 1])
        reject("gauss_ratio must be non-decreasing across levels");
      if (g < a / K - tol || g > a + tol)
        reject("gauss_ratio at level " + std::to_string(s + 1)
               + " must lie in [anchor_ratio / offsets, anchor_ratio]");
      double da = a - (s ? spec.anchor_ratio[s - 1] : 0.0);
      double dg = g - (s ? spec.gauss_ratio[s - 1] : 0.0);
      if (dg < da / K - tol)
        reject("gauss_ratio at level " + std::to_string(s + 1)
               + " grows too slowly to give every new anchor a Gaussian");
    }
  }
  if (!(spec.mask_threshold > 0.f && spec.mask_threshold < 0.5f))
    reject("mask_threshold must lie in (0, 0.5)");
  if (!(spec.q_base > 0.f) || !(spec.sigma_min > 0.f))
    reject("q_base and sigma_min must be positive");
  if (!(spec.mu_scale >= 0.0) || !std::isfinite(spec.sigma_bias))
    reject("mu_scale must be non-negative and sigma_bias finite");
  if (!(spec.grid_density >= 0.0 && spec.grid_density <= 1.0))
    reject("grid_density must lie in [0, 1]");
  if (!spec.lambdas.empty()) {
    if (spec.lambdas.size() != size_t(S))
      reject("lambdas needs one entry per level");
    for (int s = 1; s < S; s++)
      if (!(spec.lambdas[s] < spec.lambdas[s - 1]))
        reject("lambdas must be strictly decreasing");
  }
}

SceneModel
generate(const SynthSpec& spec)
{
  check_synth_spec(spec);
  const int N = spec.num_anchors;
  const int K = spec.offsets_per_anchor;
  const int D = spec.feat_dim;
  const int S = spec.num_levels;
  Rng rng(spec.seed);

  SceneModel m;
  m.cfg.num_levels = S;
  m.cfg.lambdas = spec.lambdas.empty() ? default_lambdas(S) : spec.lambdas;
  m.cfg.layout = {D, K};
  m.net = make_net(spec, m.cfg.layout, m.cfg.lambdas, rng);

  m.scene = AnchorScene::zeros(N, K, D);
  for (int i = 0; i < N; i++) {
    QuantLocation q{};
    for (auto& c : q)
      c = uint16_t(rng.below(65536));
    auto x = dequantize_location(q, m.net.grid);
    std::copy(x.begin(), x.end(), m.scene.locations.begin() + 3 * size_t(i));
  }

  auto levels = assign_levels(spec, rng);
  m.masks = realize_masks(spec, levels, rng);

  // Attributes from the snapped rate-head distributions the coder will use:
  // anchor channels at the anchor's first level, offsets at their
  // Gaussian's first level.
  const ChannelLayout& L = m.cfg.layout;
  for (int i = 0; i < N; i++) {
    int t_anchor = 0;
    for (int k = 0; k < K; k++) {
      int t = levels[size_t(i) * K + k];
      if (t && (!t_anchor || t < t_anchor))
        t_anchor = t;
    }
    if (!t_anchor)
      t_anchor = 1;
    auto fh = hash_feature(m.scene.location(i), m.net.grid);
    std::vector<std::vector<ChannelModel>> by_level(S + 1);
    auto models = [&](int level) -> const std::vector<ChannelModel>& {
      if (by_level[level].empty())
        by_level[level] = eval_rate_head(fh, level, m.net);
      return by_level[level];
    };
    auto draw = [&](const ChannelModel& cm) { return float(cm.mu() + cm.sigma() * rng.normal()); };

    for (int c = 0; c < L.anchor_channels(); c++)
      m.scene.set_channel(i, c, draw(models(t_anchor)[c]));
    for (int k = 0; k < K; k++) {
      int t = levels[size_t(i) * K + k];
      if (!t)
        t = t_anchor;
      for (int j = 0; j < 3; j++) {
        int c = L.offset_channel(k, j);
        m.scene.set_channel(i, c, draw(models(t)[c]));
      }
    }
  }

  if (spec.mode == SynthMode::adversarial) {
    // Same marginal statistics, but each anchor carries the attributes
    // drawn for a random other anchor.
    std::vector<int> perm(N);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    AnchorScene src = m.scene;
    for (int i = 0; i < N; i++)
      for (int c = 0; c < L.total(); c++)
        m.scene.set_channel(i, c, src.channel(perm[i], c));
  }
  return m;
}

}  // namespace pcgs
