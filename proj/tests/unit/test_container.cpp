#include <numeric>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "pcgs/codec.hpp"
#include "pcgs/container.hpp"
#include "pcgs/error.hpp"

using namespace pcgs;

namespace {

ErrorKind
kind_of(const std::function<void()>& f)
{
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::io;
}

const EncodeResult&
shared_encode()
{
  static EncodeResult r = encode(test::small_scene(21));
  return r;
}

}  // namespace

TEST_SUITE("container") {

TEST_CASE("header and stream are deterministic") {
  SceneModel m = test::small_scene(3);
  auto a = encode(m).stream;
  auto b = encode(m).stream;
  CHECK(a.header == b.header);
  CHECK(a.to_bytes() == b.to_bytes());
}

TEST_CASE("header round-trips through its sections") {
  const auto& bs = shared_encode().stream;
  StreamHeader h = parse_header(bs.header);
  CHECK(write_header(h) == bs.header);
  auto sections = header_sections(bs.header);
  std::vector<std::string> tags;
  size_t total = 0;
  for (auto& [tag, len] : sections) {
    tags.push_back(tag);
    total += len;
  }
  CHECK(tags == std::vector<std::string>{"LCFG", "NETW", "HASH", "MASK", "LOCS"});
  CHECK(total == bs.header.size());
}

TEST_CASE("no valid anchors means no locations") {
  SceneModel m = test::small_scene(4);
  std::fill(m.masks.base_feats.begin(), m.masks.base_feats.end(), -60.f);
  std::fill(m.masks.level_feats.begin(), m.masks.level_feats.end(), -60.f);
  auto r = encode(m);
  StreamHeader h = parse_header(r.stream.header);
  CHECK(h.locations.empty());
  Reconstruction rec = decode(r.stream);
  CHECK(rec.anchor_coverage() == 0.0);
  for (auto& rt : r.rates)
    CHECK(rt.total_symbols() == 0);
}

TEST_CASE("mostly-never first levels compress below 0.2 bytes per Gaussian") {
  std::mt19937_64 rng(5);
  const int n = 1000, k = 10, s = 3;
  std::vector<uint8_t> levels(size_t(n) * k);
  for (auto& v : levels)
    v = (rng() % 10 == 0) ? uint8_t(1 + rng() % s) : 0;
  StreamHeader h;
  const auto& base = parse_header(shared_encode().stream.header);
  h.cfg = base.cfg;
  h.cfg.layout.offsets_per_anchor = k;
  h.net = EntropyNet::make(h.cfg.layout, h.cfg.lambdas, base.net.grid);
  h.masks = MaskState::from_gauss_levels(n, k, s, levels);
  for (int i = 0; i < n; i++)
    if (h.masks.anchor_first_level[i])
      h.locations.push_back({uint16_t(i), 0, 0});
  auto payload = write_header(h);
  size_t mask_bytes = 0;
  for (auto& [tag, len] : header_sections(payload))
    if (tag == "MASK")
      mask_bytes = len;
  CHECK(mask_bytes < 0.2 * n * k);
  CHECK(parse_header(payload).masks == h.masks);
}

TEST_CASE("file accounting identity") {
  const auto& bs = shared_encode().stream;
  auto bytes = bs.to_bytes();
  InspectReport rep = inspect(bs);
  CHECK(rep.file_bytes == bytes.size());
  CHECK(rep.header_bytes + std::accumulate(rep.delta_bytes.begin(), rep.delta_bytes.end(),
                                           size_t(0))
        == bytes.size());
  CHECK(bs.file_bytes() == bytes.size());
  CHECK(rep.levels_present == 3);
  for (int s = 1; s < rep.levels_present; s++) {
    CHECK(rep.anchor_ratio[s] >= rep.anchor_ratio[s - 1]);
    CHECK(rep.gauss_ratio[s] >= rep.gauss_ratio[s - 1]);
  }
}

TEST_CASE("every anchor at level 1 gives flat ratios") {
  SynthSpec sp = test::small_spec(8);
  sp.anchor_ratio = {1.0, 1.0, 1.0};
  sp.gauss_ratio = {0.6, 0.8, 1.0};
  InspectReport rep = inspect(encode(generate(sp)).stream);
  CHECK(rep.anchor_ratio == std::vector<double>{1.0, 1.0, 1.0});
}

TEST_CASE("truncation") {
  const auto& bs = shared_encode().stream;
  CHECK(truncate(bs, 3).to_bytes() == bs.to_bytes());
  ProgressiveBitstream one = truncate(bs, 1);
  CHECK(one.levels_present() == 1);
  CHECK(decode(one) == decode(bs, 1));
  CHECK(kind_of([&] { truncate(bs, 0); }) == ErrorKind::argument);
  CHECK(kind_of([&] { truncate(bs, 4); }) == ErrorKind::argument);
}

TEST_CASE("byte prefixes at chunk boundaries parse as shorter streams") {
  const auto& bs = shared_encode().stream;
  auto bytes = bs.to_bytes();
  size_t cut = bs.preamble_bytes();
  for (int s = 1; s <= bs.levels_present(); s++) {
    cut += bs.level_chunk_bytes(s);
    std::span<const uint8_t> prefix(bytes.data(), cut);
    ProgressiveBitstream p = ProgressiveBitstream::parse(prefix);
    CHECK(p.levels_present() == s);
    CHECK(p.header == bs.header);
  }
}

TEST_CASE("malformed files are format errors") {
  auto bytes = shared_encode().stream.to_bytes();
  auto parse = [](std::vector<uint8_t> b) { ProgressiveBitstream::parse(b); };

  auto bad_magic = bytes;
  bad_magic[0] ^= 0x20;
  CHECK(kind_of([&] { parse(bad_magic); }) == ErrorKind::format);

  auto bad_version = bytes;
  bad_version[8] = 0x7F;
  CHECK(kind_of([&] { parse(bad_version); }) == ErrorKind::format);

  auto cut = bytes;
  cut.resize(bytes.size() - 3);
  CHECK(kind_of([&] { parse(cut); }) == ErrorKind::format);

  CHECK(kind_of([&] { parse(std::vector<uint8_t>(bytes.begin(), bytes.begin() + 20)); })
        == ErrorKind::format);

  auto bad_trailer = bytes;
  bad_trailer[bytes.size() - 9] ^= 1;  // inside the trailer's size table / length
  CHECK(kind_of([&] { parse(bad_trailer); }) == ErrorKind::format);

  std::vector<uint8_t> garbage{1, 2, 3};
  CHECK(kind_of([&] { parse_header(garbage); }) == ErrorKind::format);
}

TEST_CASE("random corruption never crashes the decoder") {
  auto bytes = shared_encode().stream.to_bytes();
  std::mt19937_64 rng(13);
  int errors = 0;
  for (int i = 0; i < 60; i++) {
    auto b = bytes;
    for (int j = 0; j < 3; j++)
      b[rng() % b.size()] ^= uint8_t(1 + rng() % 255);
    try {
      decode(ProgressiveBitstream::parse(b));
    } catch (const Error&) {
      errors++;
    }
  }
  CHECK(errors > 0);
}

TEST_CASE("location quantization") {
  HashGrid g = HashGrid::make({-2.f, 0.f, 10.f}, {2.f, 1.f, 30.f});
  std::mt19937_64 rng(17);
  for (int i = 0; i < 2000; i++) {
    QuantLocation q{uint16_t(rng()), uint16_t(rng()), uint16_t(rng())};
    auto x = dequantize_location(q, g);
    CHECK(quantize_location(x, g) == q);
  }
  CHECK(quantize_location({-5.f, 7.f, 20.f}, g) == QuantLocation{0, 65535, 32768});
}

}
