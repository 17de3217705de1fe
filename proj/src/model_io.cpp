#include "pcgs/model_io.hpp"

#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <string>

#include "pcgs/error.hpp"

namespace pcgs {

namespace {

constexpr size_t kMagicLen = 8;

void
put_floats(ByteWriter& w, const std::vector<float>& v)
{
  w.f32s(v);
}

std::vector<float>
get_floats(ByteReader& r, size_t n)
{
  if (n * sizeof(float) > r.remaining())
    fail(ErrorKind::format, "float array extends past its chunk");
  std::vector<float> v(n);
  r.f32s(v);
  return v;
}

void
put_mlp(ByteWriter& w, const Mlp& mlp)
{
  w.u32(uint32_t(mlp.layers.size()));
  for (const auto& l : mlp.layers) {
    w.u32(uint32_t(l.in));
    w.u32(uint32_t(l.out));
    put_floats(w, l.weight);
    put_floats(w, l.bias);
  }
}

Mlp
get_mlp(ByteReader& r)
{
  Mlp mlp;
  uint32_t layers = r.u32();
  if (layers > 64)
    fail(ErrorKind::format, "implausible layer count");
  for (uint32_t i = 0; i < layers; i++) {
    DenseLayer l;
    l.in = int(r.u32());
    l.out = int(r.u32());
    if (l.in <= 0 || l.out <= 0 || l.in > (1 << 20) || l.out > (1 << 20))
      fail(ErrorKind::format, "implausible layer width");
    l.weight = get_floats(r, size_t(l.in) * l.out);
    l.bias = get_floats(r, size_t(l.out));
    mlp.layers.push_back(std::move(l));
  }
  return mlp;
}

// Reads magic + version, then every tagged chunk into a map.
std::map<std::string, std::span<const uint8_t>>
read_chunks(std::span<const uint8_t> bytes)
{
  ByteReader r(bytes);
  if (r.remaining() < kMagicLen || r.tag(kMagicLen) != kModelMagic)
    fail(ErrorKind::format, "not a PCGSMODL file (bad magic)");
  uint16_t version = r.u16();
  if (version != kModelVersion)
    fail(ErrorKind::format, "unsupported model file version " + std::to_string(version));

  std::map<std::string, std::span<const uint8_t>> chunks;
  while (!r.done()) {
    std::string tag = r.tag(4);
    uint64_t len = r.u64();
    if (len > r.remaining())
      fail(ErrorKind::format, "chunk " + tag + " length exceeds file size");
    chunks[tag] = r.bytes(len);
  }
  return chunks;
}

std::span<const uint8_t>
need_chunk(const std::map<std::string, std::span<const uint8_t>>& chunks, const char* tag)
{
  auto it = chunks.find(tag);
  if (it == chunks.end())
    fail(ErrorKind::format, std::string("missing chunk ") + tag);
  return it->second;
}

void
expect_consumed(const ByteReader& r, const char* tag)
{
  if (!r.done())
    fail(ErrorKind::format, std::string("trailing bytes in chunk ") + tag);
}

std::vector<uint8_t>
body(const std::function<void(ByteWriter&)>& fill)
{
  ByteWriter w;
  fill(w);
  return w.take();
}

void
begin_file(ByteWriter& w)
{
  w.tag(std::string_view(kModelMagic, kMagicLen));
  w.u16(kModelVersion);
}

void
put_attribute_chunks(ByteWriter& w, const AnchorScene& s)
{
  w.chunk("LOCS", body([&](ByteWriter& c) {
    c.u32(uint32_t(s.num_anchors));
    put_floats(c, s.locations);
  }));
  w.chunk("FEAT", body([&](ByteWriter& c) {
    c.u32(uint32_t(s.feat_dim));
    put_floats(c, s.anchor_feats);
  }));
  w.chunk("SCAL", body([&](ByteWriter& c) { put_floats(c, s.scalings); }));
  w.chunk("OFFS", body([&](ByteWriter& c) {
    c.u32(uint32_t(s.offsets_per_anchor));
    put_floats(c, s.offsets);
  }));
}

AnchorScene
get_attribute_chunks(const std::map<std::string, std::span<const uint8_t>>& chunks)
{
  AnchorScene s;
  {
    ByteReader r(need_chunk(chunks, "LOCS"));
    s.num_anchors = int(r.u32());
    s.locations = get_floats(r, size_t(s.num_anchors) * 3);
    expect_consumed(r, "LOCS");
  }
  {
    ByteReader r(need_chunk(chunks, "FEAT"));
    s.feat_dim = int(r.u32());
    s.anchor_feats = get_floats(r, size_t(s.num_anchors) * s.feat_dim);
    expect_consumed(r, "FEAT");
  }
  {
    ByteReader r(need_chunk(chunks, "SCAL"));
    s.scalings = get_floats(r, size_t(s.num_anchors) * 6);
    expect_consumed(r, "SCAL");
  }
  {
    ByteReader r(need_chunk(chunks, "OFFS"));
    s.offsets_per_anchor = int(r.u32());
    s.offsets = get_floats(r, size_t(s.num_anchors) * 3 * s.offsets_per_anchor);
    expect_consumed(r, "OFFS");
  }
  return s;
}

}  // namespace

//============================================================================

void
put_level_config(ByteWriter& w, const LevelConfig& cfg)
{
  w.u32(uint32_t(cfg.num_levels));
  w.u32(uint32_t(cfg.layout.feat_dim));
  w.u32(uint32_t(cfg.layout.offsets_per_anchor));
  put_floats(w, cfg.lambdas);
}

LevelConfig
get_level_config(ByteReader& r)
{
  LevelConfig cfg;
  cfg.num_levels = int(r.u32());
  cfg.layout.feat_dim = int(r.u32());
  cfg.layout.offsets_per_anchor = int(r.u32());
  if (cfg.num_levels < 1 || cfg.num_levels > kMaxLevels)
    fail(ErrorKind::format, "level count out of range");
  cfg.lambdas = get_floats(r, size_t(cfg.num_levels));
  return cfg;
}

void
put_hash_grid(ByteWriter& w, const HashGrid& g)
{
  w.u32(uint32_t(g.resolutions.size()));
  for (int res : g.resolutions)
    w.u32(uint32_t(res));
  w.u32(uint32_t(g.table_size_log2));
  w.u32(uint32_t(g.feat_per_level));
  for (float v : g.bbox_min)
    w.f32(v);
  for (float v : g.bbox_max)
    w.f32(v);
  w.u64(g.bits.size());
  for (uint64_t word : g.bits)
    w.u64(word);
}

HashGrid
get_hash_grid(ByteReader& r)
{
  HashGrid g;
  uint32_t levels = r.u32();
  if (levels == 0 || levels > 32)
    fail(ErrorKind::format, "implausible hash-grid level count");
  g.resolutions.resize(levels);
  for (auto& res : g.resolutions)
    res = int(r.u32());
  g.table_size_log2 = int(r.u32());
  g.feat_per_level = int(r.u32());
  if (g.table_size_log2 < 1 || g.table_size_log2 > 30 || g.feat_per_level < 1
      || g.feat_per_level > 64)
    fail(ErrorKind::format, "implausible hash-grid shape");
  for (auto& v : g.bbox_min)
    v = r.f32();
  for (auto& v : g.bbox_max)
    v = r.f32();
  uint64_t words = r.u64();
  if (words != (g.num_entries() + 63) / 64 || words * 8 > r.remaining())
    fail(ErrorKind::format, "hash-grid bit storage has wrong size");
  g.bits.resize(words);
  for (auto& word : g.bits)
    word = r.u64();
  return g;
}

void
put_entropy_net(ByteWriter& w, const EntropyNet& net)
{
  w.f32(net.q_base);
  w.f32(net.sigma_min);
  w.u32(uint32_t(net.level_lambdas.size()));
  put_floats(w, net.level_lambdas);
  put_mlp(w, net.rate_head);
  put_mlp(w, net.trit_head);
}

EntropyNet
get_entropy_net(ByteReader& r)
{
  EntropyNet net;
  net.q_base = r.f32();
  net.sigma_min = r.f32();
  uint32_t s = r.u32();
  if (s == 0 || s > uint32_t(kMaxLevels))
    fail(ErrorKind::format, "level count out of range");
  net.level_lambdas = get_floats(r, s);
  net.rate_head = get_mlp(r);
  net.trit_head = get_mlp(r);
  return net;
}

//============================================================================

std::vector<uint8_t>
write_scene_model(const SceneModel& m)
{
  ByteWriter w;
  begin_file(w);
  w.chunk("LCFG", body([&](ByteWriter& c) { put_level_config(c, m.cfg); }));
  put_attribute_chunks(w, m.scene);
  w.chunk("MASK", body([&](ByteWriter& c) {
    c.f32(m.masks.threshold);
    c.u32(uint32_t(m.masks.num_anchors));
    c.u32(uint32_t(m.masks.offsets_per_anchor));
    c.u32(uint32_t(m.masks.num_levels));
    put_floats(c, m.masks.base_feats);
    put_floats(c, m.masks.level_feats);
  }));
  w.chunk("HASH", body([&](ByteWriter& c) { put_hash_grid(c, m.net.grid); }));
  w.chunk("NETW", body([&](ByteWriter& c) { put_entropy_net(c, m.net); }));
  return w.take();
}

SceneModel
read_scene_model(std::span<const uint8_t> bytes)
{
  auto chunks = read_chunks(bytes);
  if (chunks.count("RECO"))
    fail(ErrorKind::format, "file is a reconstruction, not a scene model");

  SceneModel m;
  {
    ByteReader r(need_chunk(chunks, "LCFG"));
    m.cfg = get_level_config(r);
    expect_consumed(r, "LCFG");
  }
  m.scene = get_attribute_chunks(chunks);
  {
    ByteReader r(need_chunk(chunks, "MASK"));
    m.masks.threshold = r.f32();
    m.masks.num_anchors = int(r.u32());
    m.masks.offsets_per_anchor = int(r.u32());
    m.masks.num_levels = int(r.u32());
    size_t nk = size_t(m.masks.num_anchors) * m.masks.offsets_per_anchor;
    m.masks.base_feats = get_floats(r, nk);
    m.masks.level_feats = get_floats(r, nk * m.masks.num_levels);
    expect_consumed(r, "MASK");
  }
  {
    ByteReader r(need_chunk(chunks, "NETW"));
    m.net = get_entropy_net(r);
    expect_consumed(r, "NETW");
  }
  {
    ByteReader r(need_chunk(chunks, "HASH"));
    m.net.grid = get_hash_grid(r);
    expect_consumed(r, "HASH");
  }
  return m;
}

std::vector<uint8_t>
write_reconstruction(const Reconstruction& recon)
{
  const int n = recon.num_anchors;
  const int k = recon.layout.offsets_per_anchor;
  const int d = recon.layout.feat_dim;

  AnchorScene values = AnchorScene::zeros(n, k, d);
  std::vector<uint8_t> anchor_present(n, 0), gauss_present(size_t(n) * k, 0);
  for (int i = 0; i < n; i++) {
    if (!recon.anchor_present(i))
      continue;
    anchor_present[i] = 1;
    for (int a = 0; a < 3; a++)
      values.locations[3 * size_t(i) + a] = recon.locations[3 * size_t(i) + a];
    for (int c = 0; c < recon.layout.anchor_channels(); c++)
      values.set_channel(i, c, float(recon.anchor_value(i, c)));
    for (int g = 0; g < k; g++) {
      if (!recon.gauss_present(i, g))
        continue;
      gauss_present[size_t(i) * k + g] = 1;
      for (int j = 0; j < 3; j++)
        values.set_channel(i, recon.layout.offset_channel(g, j),
                           float(recon.offset_value(i, g, j)));
    }
  }

  ByteWriter w;
  begin_file(w);
  w.chunk("RECO", body([&](ByteWriter& c) {
    c.u32(uint32_t(recon.level));
    c.u32(uint32_t(n));
    c.u32(uint32_t(k));
    c.u32(uint32_t(d));
    c.bytes(anchor_present);
    c.bytes(gauss_present);
  }));
  put_attribute_chunks(w, values);
  return w.take();
}

ReconstructionFile
read_reconstruction(std::span<const uint8_t> bytes)
{
  auto chunks = read_chunks(bytes);
  ReconstructionFile f;
  ByteReader r(need_chunk(chunks, "RECO"));
  f.level = int(r.u32());
  int n = int(r.u32());
  int k = int(r.u32());
  int d = int(r.u32());
  auto ap = r.bytes(size_t(n));
  auto gp = r.bytes(size_t(n) * k);
  expect_consumed(r, "RECO");
  f.anchor_present.assign(ap.begin(), ap.end());
  f.gauss_present.assign(gp.begin(), gp.end());
  f.values = get_attribute_chunks(chunks);
  if (f.values.num_anchors != n || f.values.offsets_per_anchor != k || f.values.feat_dim != d)
    fail(ErrorKind::format, "reconstruction extents disagree between chunks");
  return f;
}

//============================================================================

std::vector<uint8_t>
read_file(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    fail(ErrorKind::io, "cannot open " + path.string());
  std::vector<uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad())
    fail(ErrorKind::io, "error reading " + path.string());
  return data;
}

void
write_file(const std::filesystem::path& path, std::span<const uint8_t> bytes)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    fail(ErrorKind::io, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out)
    fail(ErrorKind::io, "error writing " + path.string());
}

}  // namespace pcgs
