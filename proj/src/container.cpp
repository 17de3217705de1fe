#include "pcgs/container.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include "pcgs/byte_io.hpp"
#include "pcgs/entropy_model.hpp"
#include "pcgs/error.hpp"
#include "pcgs/model_io.hpp"
#include "pcgs/range_coder.hpp"

namespace pcgs {

namespace {

constexpr size_t kMagicLen = 8;
constexpr double kLocScale = 65535.0;
constexpr size_t kSectionFraming = 4 + 8;

std::string_view
magic(const char* m)
{
  return {m, kMagicLen};
}

std::string
fmt_double(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void
put_mask_section(ByteWriter& w, const MaskState& m)
{
  const int alphabet = m.num_levels + 1;
  w.u32(uint32_t(m.num_anchors));
  w.u32(uint32_t(m.offsets_per_anchor));
  w.u32(uint32_t(m.num_levels));

  std::vector<double> hist(alphabet, 0.0);
  for (uint8_t t : m.gauss_first_level)
    hist[t] += 1.0;
  auto freqs = quantize_probabilities(hist);
  for (uint32_t f : freqs)
    w.u32(f);

  FreqTable table = FreqTable::from_frequencies(freqs);
  RangeEncoder enc;
  for (uint8_t t : m.gauss_first_level)
    enc.encode_symbol(table, t);
  auto payload = enc.flush();
  w.u64(payload.size());
  w.bytes(payload);
}

MaskState
get_mask_section(ByteReader& r)
{
  const int n = int(r.u32());
  const int k = int(r.u32());
  const int s = int(r.u32());
  if (n < 0 || k <= 0 || s < 1 || s > kMaxLevels)
    fail(ErrorKind::format, "mask section extents out of range");
  std::vector<uint32_t> freqs(size_t(s) + 1);
  for (auto& f : freqs)
    f = r.u32();
  FreqTable table;
  try {
    table = FreqTable::from_frequencies(freqs);
  } catch (const Error&) {
    fail(ErrorKind::format, "mask section frequency table is malformed");
  }

  uint64_t len = r.u64();
  auto payload = r.bytes(len);
  const size_t total = size_t(n) * size_t(k);
  if (total > (uint64_t(1) << 34))
    fail(ErrorKind::format, "mask section extents out of range");
  std::vector<uint8_t> levels(total);
  RangeDecoder dec(payload);
  for (auto& t : levels)
    t = uint8_t(dec.decode_symbol(table));
  if (dec.consumed() != payload.size())
    fail(ErrorKind::format, "mask section payload misaligned");
  return MaskState::from_gauss_levels(n, k, s, std::move(levels));
}

std::vector<uint8_t>
section_body(const std::function<void(ByteWriter&)>& fill)
{
  ByteWriter w;
  fill(w);
  return w.take();
}

void
check_net_shape(const EntropyNet& net, const LevelConfig& cfg)
{
  const int s = cfg.num_levels;
  const int fw = net.grid.feature_width();
  auto ok = [](const Mlp& m, int in, int out) {
    if (m.layers.empty() || m.input_width() != in || m.output_width() != out)
      return false;
    for (size_t l = 1; l < m.layers.size(); l++)
      if (m.layers[l].in != m.layers[l - 1].out)
        return false;
    return true;
  };
  if (int(net.level_lambdas.size()) != s)
    fail(ErrorKind::format, "network level count disagrees with the level config");
  if (!ok(net.rate_head, fw + s, 3 * cfg.layout.total()))
    fail(ErrorKind::format, "rate head shape disagrees with the level config");
  if (!ok(net.trit_head, 1 + fw + s, 3))
    fail(ErrorKind::format, "trit head shape disagrees with the level config");
}

}  // namespace

//============================================================================

QuantLocation
quantize_location(std::array<float, 3> x, const HashGrid& grid)
{
  QuantLocation q{};
  for (int a = 0; a < 3; a++) {
    double lo = grid.bbox_min[a];
    double ext = double(grid.bbox_max[a]) - lo;
    double u = ext > 0 ? (double(x[a]) - lo) / ext : 0.0;
    u = std::clamp(u, 0.0, 1.0);
    q[a] = uint16_t(std::lround(u * kLocScale));
  }
  return q;
}

std::array<float, 3>
dequantize_location(const QuantLocation& q, const HashGrid& grid)
{
  std::array<float, 3> x{};
  for (int a = 0; a < 3; a++) {
    double lo = grid.bbox_min[a];
    double ext = double(grid.bbox_max[a]) - lo;
    x[a] = float(lo + double(q[a]) / kLocScale * ext);
  }
  return x;
}

//============================================================================

std::vector<uint8_t>
write_header(const StreamHeader& h)
{
  const size_t valid = h.masks.anchors_valid(h.masks.num_levels);
  if (h.locations.size() != valid)
    fail(ErrorKind::invariant, "header location count does not match the anchor mask");

  ByteWriter w;
  w.chunk("LCFG", section_body([&](ByteWriter& c) { put_level_config(c, h.cfg); }));
  w.chunk("NETW", section_body([&](ByteWriter& c) { put_entropy_net(c, h.net); }));
  w.chunk("HASH", section_body([&](ByteWriter& c) { put_hash_grid(c, h.net.grid); }));
  w.chunk("MASK", section_body([&](ByteWriter& c) { put_mask_section(c, h.masks); }));
  w.chunk("LOCS", section_body([&](ByteWriter& c) {
    c.u64(h.locations.size());
    for (const auto& q : h.locations)
      c.u16s(q);
  }));
  return w.take();
}

StreamHeader
parse_header(std::span<const uint8_t> payload)
{
  static const char* order[] = {"LCFG", "NETW", "HASH", "MASK", "LOCS"};
  ByteReader r(payload);
  StreamHeader h;
  for (const char* want : order) {
    std::string tag = r.tag(4);
    if (tag != want)
      fail(ErrorKind::format, "header section " + tag + " found where " + want + " expected");
    uint64_t len = r.u64();
    ByteReader s(r.bytes(len));
    if (tag == "LCFG")
      h.cfg = get_level_config(s);
    else if (tag == "NETW")
      h.net = get_entropy_net(s);
    else if (tag == "HASH")
      h.net.grid = get_hash_grid(s);
    else if (tag == "MASK")
      h.masks = get_mask_section(s);
    else {
      uint64_t count = s.u64();
      if (count * 6 != s.remaining())
        fail(ErrorKind::format, "location section length disagrees with its count");
      h.locations.resize(count);
      for (auto& q : h.locations)
        s.u16s(q);
    }
    if (!s.done())
      fail(ErrorKind::format, "trailing bytes in header section " + tag);
  }
  if (!r.done())
    fail(ErrorKind::format, "trailing bytes after header sections");

  if (h.masks.num_levels != h.cfg.num_levels
      || h.masks.offsets_per_anchor != h.cfg.layout.offsets_per_anchor)
    fail(ErrorKind::format, "mask section disagrees with the level config");
  if (h.locations.size() != h.masks.anchors_valid(h.masks.num_levels))
    fail(ErrorKind::format, "location count disagrees with the anchor mask");
  check_net_shape(h.net, h.cfg);
  return h;
}

std::vector<std::pair<std::string, size_t>>
header_sections(std::span<const uint8_t> payload)
{
  std::vector<std::pair<std::string, size_t>> out;
  ByteReader r(payload);
  while (!r.done()) {
    std::string tag = r.tag(4);
    uint64_t len = r.u64();
    r.bytes(len);
    out.emplace_back(tag, size_t(len) + kSectionFraming);
  }
  return out;
}

//============================================================================

size_t
ProgressiveBitstream::preamble_bytes() const
{
  return kMagicLen + 2 + 8 + header.size();
}

size_t
ProgressiveBitstream::level_chunk_bytes(int level) const
{
  if (level < 1 || level > levels_present())
    fail(ErrorKind::argument, "level chunk index out of range");
  return 8 + levels[level - 1].size();
}

size_t
ProgressiveBitstream::trailer_bytes() const
{
  return kMagicLen + 4 + 8 * levels.size() + 8;
}

size_t
ProgressiveBitstream::file_bytes() const
{
  size_t n = preamble_bytes() + trailer_bytes();
  for (const auto& l : levels)
    n += 8 + l.size();
  return n;
}

std::vector<uint8_t>
ProgressiveBitstream::to_bytes() const
{
  ByteWriter w;
  w.tag(magic(kStreamMagic));
  w.u16(kStreamVersion);
  w.u64(header.size());
  w.bytes(header);
  for (const auto& l : levels) {
    w.u64(l.size());
    w.bytes(l);
  }
  w.tag(magic(kTrailerMagic));
  w.u32(uint32_t(levels.size()));
  for (const auto& l : levels)
    w.u64(l.size());
  w.u64(header.size());
  return w.take();
}

ProgressiveBitstream
ProgressiveBitstream::parse(std::span<const uint8_t> bytes)
{
  ByteReader r(bytes);
  if (!r.starts_with(magic(kStreamMagic)))
    fail(ErrorKind::format, "not a PCGSBITS stream (bad magic)");
  r.tag(kMagicLen);
  uint16_t version = r.u16();
  if (version != kStreamVersion)
    fail(ErrorKind::format, "unsupported stream version " + std::to_string(version));

  ProgressiveBitstream bs;
  uint64_t hlen = r.u64();
  if (hlen > r.remaining())
    fail(ErrorKind::format, "header chunk length exceeds stream size");
  auto h = r.bytes(hlen);
  bs.header.assign(h.begin(), h.end());

  while (!r.done()) {
    if (r.starts_with(magic(kTrailerMagic))) {
      r.tag(kMagicLen);
      uint32_t count = r.u32();
      if (count != bs.levels.size())
        fail(ErrorKind::format, "trailer level count disagrees with the level chunks");
      for (const auto& l : bs.levels)
        if (r.u64() != l.size())
          fail(ErrorKind::format, "trailer size ledger disagrees with a level chunk");
      if (r.u64() != bs.header.size())
        fail(ErrorKind::format, "trailer header size disagrees with the header chunk");
      if (!r.done())
        fail(ErrorKind::format, "trailing bytes after the trailer");
      break;
    }
    uint64_t len = r.u64();
    if (len > r.remaining())
      fail(ErrorKind::format, "level chunk length exceeds stream size");
    if (bs.levels.size() >= size_t(kMaxLevels))
      fail(ErrorKind::format, "more level chunks than any configuration allows");
    auto payload = r.bytes(len);
    bs.levels.emplace_back(payload.begin(), payload.end());
  }
  return bs;
}

ProgressiveBitstream
truncate(const ProgressiveBitstream& bs, int level)
{
  if (level < 1 || level > bs.levels_present())
    fail(ErrorKind::argument, "truncation level " + std::to_string(level) + " outside [1, "
                                + std::to_string(bs.levels_present()) + "]");
  ProgressiveBitstream out;
  out.header = bs.header;
  out.levels.assign(bs.levels.begin(), bs.levels.begin() + level);
  return out;
}

//============================================================================

InspectReport
inspect(const ProgressiveBitstream& bs)
{
  StreamHeader h = parse_header(bs.header);
  if (bs.levels_present() > h.cfg.num_levels)
    fail(ErrorKind::format, "stream holds more level chunks than configured levels");

  InspectReport rep;
  rep.file_bytes = bs.file_bytes();
  rep.trailer_bytes = bs.trailer_bytes();
  rep.header_bytes = bs.preamble_bytes() + rep.trailer_bytes;
  rep.header_sections = header_sections(bs.header);
  rep.levels_configured = h.cfg.num_levels;
  rep.levels_present = bs.levels_present();
  rep.num_anchors = h.masks.num_anchors;
  rep.num_gaussians = int(h.masks.gauss_first_level.size());
  for (int s = 1; s <= rep.levels_present; s++) {
    rep.delta_bytes.push_back(bs.level_chunk_bytes(s));
    rep.anchor_ratio.push_back(h.masks.anchor_ratio(s));
    rep.gauss_ratio.push_back(h.masks.gauss_ratio(s));
  }
  return rep;
}

std::string
InspectReport::to_kv() const
{
  std::ostringstream o;
  o << "file_bytes=" << file_bytes << "\n"
    << "header_bytes=" << header_bytes << "\n"
    << "trailer_bytes=" << trailer_bytes << "\n"
    << "levels_configured=" << levels_configured << "\n"
    << "levels_present=" << levels_present << "\n"
    << "num_anchors=" << num_anchors << "\n"
    << "num_gaussians=" << num_gaussians << "\n";
  for (const auto& [tag, size] : header_sections)
    o << "section." << tag << "=" << size << "\n";
  size_t cum = header_bytes;
  for (size_t i = 0; i < delta_bytes.size(); i++) {
    cum += delta_bytes[i];
    o << "level." << i + 1 << ".delta_bytes=" << delta_bytes[i] << "\n"
      << "level." << i + 1 << ".cumulative_bytes=" << cum << "\n"
      << "level." << i + 1 << ".anchor_ratio=" << fmt_double(anchor_ratio[i]) << "\n"
      << "level." << i + 1 << ".gauss_ratio=" << fmt_double(gauss_ratio[i]) << "\n";
  }
  return o.str();
}

std::string
InspectReport::to_json_lines() const
{
  std::ostringstream o;
  o << "{\"record\":\"stream\",\"file_bytes\":" << file_bytes
    << ",\"header_bytes\":" << header_bytes << ",\"trailer_bytes\":" << trailer_bytes
    << ",\"levels_configured\":" << levels_configured
    << ",\"levels_present\":" << levels_present << ",\"num_anchors\":" << num_anchors
    << ",\"num_gaussians\":" << num_gaussians << "}\n";
  for (const auto& [tag, size] : header_sections)
    o << "{\"record\":\"section\",\"tag\":\"" << tag << "\",\"bytes\":" << size << "}\n";
  size_t cum = header_bytes;
  for (size_t i = 0; i < delta_bytes.size(); i++) {
    cum += delta_bytes[i];
    o << "{\"record\":\"level\",\"level\":" << i + 1 << ",\"delta_bytes\":" << delta_bytes[i]
      << ",\"cumulative_bytes\":" << cum << ",\"anchor_ratio\":" << fmt_double(anchor_ratio[i])
      << ",\"gauss_ratio\":" << fmt_double(gauss_ratio[i]) << "}\n";
  }
  return o.str();
}

std::string
InspectReport::to_table() const
{
  std::ostringstream o;
  char line[160];
  o << "file bytes     " << file_bytes << "\n"
    << "header bytes   " << header_bytes << " (trailer " << trailer_bytes << ")\n"
    << "anchors        " << num_anchors << "\n"
    << "gaussians      " << num_gaussians << "\n"
    << "levels         " << levels_present << " of " << levels_configured << "\n\n";
  o << "section      bytes\n";
  for (const auto& [tag, size] : header_sections) {
    std::snprintf(line, sizeof line, "%-8s %9zu\n", tag.c_str(), size);
    o << line;
  }
  o << "\nlevel    delta bytes   cumulative   r(m^a)    r(m^g)\n";
  size_t cum = header_bytes;
  for (size_t i = 0; i < delta_bytes.size(); i++) {
    cum += delta_bytes[i];
    std::snprintf(line, sizeof line, "%5zu %14zu %12zu %8.4f %9.4f\n", i + 1, delta_bytes[i],
                  cum, anchor_ratio[i], gauss_ratio[i]);
    o << line;
  }
  return o.str();
}

}  // namespace pcgs
