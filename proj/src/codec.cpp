#include "pcgs/codec.hpp"

#include <algorithm>
#include <cstdlib>
#include <optional>
#include <string>
#include <thread>

#include "parallel.hpp"
#include "pcgs/error.hpp"
#include "pcgs/range_coder.hpp"

namespace pcgs {

QuantLattice
Reconstruction::anchor_lattice(int i, int c) const
{
  const auto& st = anchor_state[size_t(i) * layout.anchor_channels() + c];
  return {st.index, Step{st.q1_fixed, level}, 0, false};
}

QuantLattice
Reconstruction::offset_lattice(int i, int k, int j) const
{
  const auto& st = offset_state[size_t(i) * layout.offset_channels() + 3 * k + j];
  return {st.index, Step{st.q1_fixed, masks.gauss_level(i, k)}, 0, false};
}

int
resolve_threads(int requested)
{
  if (const char* env = std::getenv("PCGS_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0)
      return int(std::min<long>(v, 1024));
  }
  if (requested > 0)
    return requested;
  return int(std::max(1u, std::thread::hardware_concurrency()));
}

namespace {

constexpr int kBlockAnchors = 2048;

// Rate head evaluated once per (anchor, level); output rows are computed
// only for the channels that are actually coded.
class RateHead {
public:
  explicit RateHead(const EntropyNet& net) : net_(&net) {}

  void run(std::span<const double> fh, int level)
  {
    const Mlp& mlp = net_->rate_head;
    const int s = net_->num_levels();
    in_.assign(fh.begin(), fh.end());
    in_.resize(fh.size() + s, 0.0);
    in_[fh.size() + level - 1] = 1.0;
    for (size_t l = 0; l + 1 < mlp.layers.size(); l++) {
      const DenseLayer& layer = mlp.layers[l];
      out_.resize(layer.out);
      for (int o = 0; o < layer.out; o++) {
        const float* w = &layer.weight[size_t(o) * layer.in];
        double acc = layer.bias[o];
        for (int i = 0; i < layer.in; i++)
          acc += double(w[i]) * in_[i];
        out_[o] = std::max(acc, 0.0);
      }
      std::swap(in_, out_);
    }
  }

  ChannelModel channel(int c) const
  {
    const DenseLayer& last = net_->rate_head.layers.back();
    double v[3];
    for (int r = 0; r < 3; r++) {
      int o = 3 * c + r;
      const float* w = &last.weight[size_t(o) * last.in];
      double acc = last.bias[o];
      for (int i = 0; i < last.in; i++)
        acc += double(w[i]) * in_[i];
      v[r] = acc;
    }
    return snap_channel_model(v[0], v[1], v[2], net_->q_base, net_->sigma_min);
  }

private:
  const EntropyNet* net_;
  std::vector<double> in_, out_;
};

struct SymbolJob {
  FreqTable table;
  int64_t base = 0;  // decoded lattice index = base + symbol
  uint32_t q1 = 0;
  int anchor = 0;
  int channel = 0;
  SymbolKind kind = SymbolKind::new_anchor;
  int symbol = 0;
  bool clamped = false;
};

// Everything both directions share: decoded locations, hash features and
// the running reconstruction.
struct Session {
  const EntropyNet& net;
  const LevelConfig& cfg;
  int threads = 1;
  Reconstruction recon;
  std::vector<double> features;  // N x fw; rows of never-valid anchors unused
  int fw = 0;

  Session(const EntropyNet& n, const LevelConfig& c, const MaskState& masks,
          const std::vector<QuantLocation>& locs, int t)
    : net(n), cfg(c), threads(t)
  {
    const int N = masks.num_anchors;
    recon.level = 0;
    recon.num_anchors = N;
    recon.layout = cfg.layout;
    recon.masks = masks;
    recon.locations.assign(size_t(N) * 3, 0.f);
    recon.anchor_state.assign(size_t(N) * cfg.layout.anchor_channels(), {});
    recon.offset_state.assign(size_t(N) * cfg.layout.offset_channels(), {});

    std::vector<int> valid;
    for (int i = 0; i < N; i++)
      if (masks.anchor_valid(i, masks.num_levels))
        valid.push_back(i);
    if (valid.size() != locs.size())
      fail(ErrorKind::format, "location count disagrees with the anchor mask");

    fw = net.grid.feature_width();
    features.assign(size_t(N) * fw, 0.0);
    for (size_t v = 0; v < valid.size(); v++) {
      auto x = dequantize_location(locs[v], net.grid);
      for (int a = 0; a < 3; a++)
        recon.locations[3 * size_t(valid[v]) + a] = x[a];
    }
    size_t blocks = (valid.size() + kBlockAnchors - 1) / kBlockAnchors;
    detail::parallel_for(blocks, threads, [&](size_t b) {
      size_t end = std::min(valid.size(), (b + 1) * size_t(kBlockAnchors));
      for (size_t v = b * kBlockAnchors; v < end; v++) {
        int i = valid[v];
        std::array<float, 3> x{recon.locations[3 * size_t(i)], recon.locations[3 * size_t(i) + 1],
                               recon.locations[3 * size_t(i) + 2]};
        hash_feature(x, net.grid, std::span<double>(features).subspan(size_t(i) * fw, fw));
      }
    });
  }

  std::span<const double> fh(int i) const
  {
    return std::span<const double>(features).subspan(size_t(i) * fw, fw);
  }

  ChannelState& state(int anchor, int channel)
  {
    const ChannelLayout& L = cfg.layout;
    if (channel < L.anchor_channels())
      return recon.anchor_state[size_t(anchor) * L.anchor_channels() + channel];
    return recon.offset_state[size_t(anchor) * L.offset_channels() + channel
                              - L.anchor_channels()];
  }

  // Job slots are reused across blocks and levels so their table storage is
  // allocated once.
  struct Plan {
    std::vector<SymbolJob> jobs;
    size_t count = 0;

    SymbolJob& next()
    {
      if (count == jobs.size())
        jobs.emplace_back();
      SymbolJob& job = jobs[count++];
      job.symbol = 0;
      job.clamped = false;
      return job;
    }
  };

  // Tables (and, given the scene, symbols) for anchors [lo, hi) at level s.
  void plan(int s, int lo, int hi, const AnchorScene* scene, Plan& out)
  {
    const ChannelLayout& L = cfg.layout;
    const MaskState& m = recon.masks;
    RateHead head(net);
    GaussianTable g;
    out.count = 0;

    auto gaussian_job = [&](int i, int c, SymbolKind kind) {
      ChannelModel model = head.channel(c);
      Step step = model.step(s);
      SymbolJob& job = out.next();
      std::swap(g.table, job.table);
      gaussian_freq_table(model, step, g);
      job.base = g.first_index;
      job.q1 = uint32_t(model.q1_fixed);
      job.anchor = i;
      job.channel = c;
      job.kind = kind;
      if (scene) {
        int64_t k = lattice_index(scene->channel(i, c), step);
        int64_t kc = g.clamp_index(k);
        job.clamped = kc != k;
        job.symbol = g.symbol_of(kc);
      }
      std::swap(g.table, job.table);
    };

    for (int i = lo; i < hi; i++) {
      const int t = m.anchor_first_level[i];
      if (t == 0 || t > s)
        continue;
      bool head_ready = false;
      if (t == s) {
        head.run(fh(i), s);
        head_ready = true;
        for (int c = 0; c < L.anchor_channels(); c++)
          gaussian_job(i, c, SymbolKind::new_anchor);
      } else {
        TritContext ctx(fh(i), s, net);
        for (int c = 0; c < L.anchor_channels(); c++) {
          const ChannelState& st = state(i, c);
          QuantLattice prev{st.index, Step{st.q1_fixed, s - 1}, 0, false};
          SymbolJob& job = out.next();
          trit_table_from_logits(ctx.logits(normalized_prev(prev)), job.table);
          job.base = 3 * prev.index - 1;
          job.q1 = st.q1_fixed;
          job.anchor = i;
          job.channel = c;
          job.kind = SymbolKind::refine;
          if (scene) {
            QuantLattice next = trit_refine(scene->channel(i, c), prev);
            job.symbol = next.trit - 1;
            job.clamped = next.clamped;
          }
        }
      }
      for (int k = 0; k < L.offsets_per_anchor; k++) {
        if (m.gauss_level(i, k) != s)
          continue;
        if (!head_ready) {
          head.run(fh(i), s);
          head_ready = true;
        }
        for (int j = 0; j < 3; j++)
          gaussian_job(i, L.offset_channel(k, j), SymbolKind::new_offset);
      }
    }
  }

  void apply(const SymbolJob& job)
  {
    state(job.anchor, job.channel) = {job.base + job.symbol, job.q1};
  }

  // Drives one level: parallel planning in rounds of blocks, then serial
  // emission through `emit`, which fills in job.symbol when decoding.
  template<typename Emit>
  void run_level(int s, const AnchorScene* scene, Emit&& emit)
  {
    const int N = recon.num_anchors;
    const size_t blocks = (size_t(N) + kBlockAnchors - 1) / kBlockAnchors;
    const size_t round = size_t(std::max(threads, 1));
    plans.resize(std::max(plans.size(), std::min(round, std::max<size_t>(blocks, 1))));
    for (size_t b0 = 0; b0 < blocks; b0 += round) {
      size_t nb = std::min(round, blocks - b0);
      detail::parallel_for(nb, threads, [&](size_t j) {
        int lo = int((b0 + j) * kBlockAnchors);
        int hi = std::min(N, lo + kBlockAnchors);
        plan(s, lo, hi, scene, plans[j]);
      });
      for (size_t j = 0; j < nb; j++) {
        for (size_t q = 0; q < plans[j].count; q++) {
          SymbolJob& job = plans[j].jobs[q];
          emit(job);
          apply(job);
        }
      }
    }
    recon.level = s;
  }

  std::vector<Plan> plans;
};

void
tally(RateTerms& r, const SymbolJob& job)
{
  double bits = coded_cost(job.table, job.symbol);
  switch (job.kind) {
  case SymbolKind::new_anchor:
    r.new_anchor_bits += bits;
    r.new_anchor_symbols++;
    break;
  case SymbolKind::refine:
    r.refine_bits += bits;
    r.refine_symbols++;
    break;
  case SymbolKind::new_offset:
    r.new_offset_bits += bits;
    r.new_offset_symbols++;
    break;
  }
  r.clamped += job.clamped;
}

void
notify(const TableObserver& obs, int level, const SymbolJob& job)
{
  if (obs)
    obs(TableEvent{level, job.anchor, job.channel, job.kind, &job.table, job.symbol});
}

struct EncoderInputs {
  MaskState masks;
  std::vector<QuantLocation> locations;
};

EncoderInputs
prepare(const SceneModel& model)
{
  auto problems = validate_scene(model);
  if (!problems.empty()) {
    std::string msg = "invalid scene: " + problems.front();
    if (problems.size() > 1)
      msg += " (+" + std::to_string(problems.size() - 1) + " more)";
    fail(ErrorKind::invariant, msg);
  }
  EncoderInputs in;
  in.masks = build_mask_state(model.masks);
  const int S = model.cfg.num_levels;
  for (int i = 0; i < model.scene.num_anchors; i++)
    if (in.masks.anchor_valid(i, S))
      in.locations.push_back(quantize_location(model.scene.location(i), model.net.grid));
  return in;
}

// Runs levels 1..levels; `coder` selects whether chunks are produced.
EncodeResult
run_encoder(const SceneModel& model, int levels, bool coder, int threads, bool keep_states,
            const TableObserver& observer)
{
  EncoderInputs in = prepare(model);
  EncodeResult res;
  if (coder) {
    StreamHeader header{model.net, model.cfg, in.masks, in.locations};
    res.stream.header = write_header(header);
  }

  Session session(model.net, model.cfg, in.masks, in.locations, threads);
  RangeEncoder enc;
  for (int s = 1; s <= levels; s++) {
    RateTerms terms;
    session.run_level(s, &model.scene, [&](SymbolJob& job) {
      notify(observer, s, job);
      tally(terms, job);
      if (coder)
        enc.encode_symbol(job.table, job.symbol);
    });
    if (coder)
      res.stream.levels.push_back(enc.flush());
    res.rates.push_back(terms);
    if (keep_states)
      res.states.push_back(session.recon);
  }
  return res;
}

int
checked_levels(const SceneModel& model, int max_levels)
{
  const int S = model.cfg.num_levels;
  if (max_levels < 0 || max_levels > S)
    fail(ErrorKind::argument, "level count " + std::to_string(max_levels) + " outside [1, "
                                + std::to_string(S) + "]");
  return max_levels == 0 ? S : max_levels;
}

}  // namespace

//============================================================================

EncodeResult
encode(const SceneModel& model, const EncodeOptions& opts)
{
  int levels = checked_levels(model, opts.max_levels);
  return run_encoder(model, levels, true, resolve_threads(opts.threads), opts.keep_states,
                     opts.observer);
}

RateTerms
estimate_rate(const SceneModel& model, int level)
{
  if (level < 1 || level > model.cfg.num_levels)
    fail(ErrorKind::argument, "rate estimate level out of range");
  return run_encoder(model, level, false, resolve_threads(0), false, {}).rates.back();
}

std::vector<RateTerms>
estimate_rates(const SceneModel& model)
{
  return run_encoder(model, model.cfg.num_levels, false, resolve_threads(0), false, {}).rates;
}

Reconstruction
decode(const ProgressiveBitstream& bs, int s_max, const DecodeOptions& opts)
{
  StreamHeader h = parse_header(bs.header);
  const int present = bs.levels_present();
  if (present > h.cfg.num_levels)
    fail(ErrorKind::format, "stream holds more level chunks than configured levels");
  if (s_max < 0)
    fail(ErrorKind::argument, "decode level must be non-negative");
  if (s_max > present)
    fail(ErrorKind::format, "stream holds " + std::to_string(present)
                              + " levels; cannot decode level " + std::to_string(s_max));
  const int levels = s_max == 0 ? present : s_max;

  Session session(h.net, h.cfg, h.masks, h.locations, resolve_threads(opts.threads));
  for (int s = 1; s <= levels; s++) {
    const auto& chunk = bs.levels[s - 1];
    RangeDecoder dec(chunk);
    session.run_level(s, nullptr, [&](SymbolJob& job) {
      job.symbol = dec.decode_symbol(job.table);
      notify(opts.observer, s, job);
    });
    if (dec.consumed() != chunk.size())
      fail(ErrorKind::format, "level " + std::to_string(s) + " chunk misaligned: consumed "
                                + std::to_string(dec.consumed()) + " of "
                                + std::to_string(chunk.size()) + " bytes");
    if (opts.on_level)
      opts.on_level(session.recon);
  }
  return std::move(session.recon);
}

//============================================================================

ErrorReport
reconstruction_error(const AnchorScene& scene, const Reconstruction& recon,
                     std::span<const uint8_t> subset)
{
  if (scene.num_anchors != recon.num_anchors || scene.layout() != recon.layout)
    fail(ErrorKind::argument, "scene and reconstruction extents differ");
  if (!subset.empty() && subset.size() != size_t(scene.num_anchors))
    fail(ErrorKind::argument, "subset mask has wrong size");

  const int D = scene.feat_dim;
  const int K = scene.offsets_per_anchor;
  ErrorReport rep;
  rep.anchor_coverage = recon.anchor_coverage();
  rep.gauss_coverage = recon.gauss_coverage();
  double se_feat = 0, se_scale = 0, se_off = 0;
  for (int i = 0; i < scene.num_anchors; i++) {
    if (!recon.anchor_present(i) || (!subset.empty() && !subset[i]))
      continue;
    rep.anchors_counted++;
    for (int c = 0; c < D + 6; c++) {
      double e = double(scene.channel(i, c)) - recon.anchor_value(i, c);
      (c < D ? se_feat : se_scale) += e * e;
    }
    for (int k = 0; k < K; k++) {
      if (!recon.gauss_present(i, k))
        continue;
      rep.gaussians_counted++;
      for (int j = 0; j < 3; j++) {
        double e = double(scene.channel(i, recon.layout.offset_channel(k, j)))
          - recon.offset_value(i, k, j);
        se_off += e * e;
      }
    }
  }
  if (rep.anchors_counted) {
    rep.mse_feat = se_feat / double(rep.anchors_counted * D);
    rep.mse_scaling = se_scale / double(rep.anchors_counted * 6);
  }
  if (rep.gaussians_counted)
    rep.mse_offsets = se_off / double(rep.gaussians_counted * 3);
  return rep;
}

}  // namespace pcgs
