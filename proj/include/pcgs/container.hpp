#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pcgs/core_model.hpp"
#include "pcgs/masking.hpp"

namespace pcgs {

inline constexpr char kStreamMagic[] = "PCGSBITS";
inline constexpr char kTrailerMagic[] = "PCGSTRLR";
inline constexpr uint16_t kStreamVersion = 1;

// Anchor locations are stored as 16-bit fractions of the hash-grid box.
using QuantLocation = std::array<uint16_t, 3>;

QuantLocation quantize_location(std::array<float, 3> x, const HashGrid& grid);
std::array<float, 3> dequantize_location(const QuantLocation& q, const HashGrid& grid);

// Decoded contents of the header chunk.
struct StreamHeader {
  EntropyNet net;
  LevelConfig cfg;
  MaskState masks;
  // One entry per anchor with anchor_first_level != 0, ascending index.
  std::vector<QuantLocation> locations;

  bool operator==(const StreamHeader&) const = default;
};

// Header chunk payload: tagged sections LCFG, NETW, HASH, MASK, LOCS.
std::vector<uint8_t> write_header(const StreamHeader& header);
StreamHeader parse_header(std::span<const uint8_t> payload);

// (tag, bytes including the 12-byte section framing) in file order.
std::vector<std::pair<std::string, size_t>> header_sections(std::span<const uint8_t> payload);

// Header chunk plus an ordered run of level chunks; any prefix of level
// chunks is itself a complete stream.
struct ProgressiveBitstream {
  std::vector<uint8_t> header;
  std::vector<std::vector<uint8_t>> levels;

  int levels_present() const { return int(levels.size()); }

  // Serialized footprint of each part.
  size_t preamble_bytes() const;                  // magic + version + header chunk
  size_t level_chunk_bytes(int level) const;      // 1-based, u64 length + payload
  size_t trailer_bytes() const;
  size_t file_bytes() const;

  std::vector<uint8_t> to_bytes() const;

  // Accepts a full file or any prefix ending at a level-chunk boundary
  // (in which case the trailer is absent).
  static ProgressiveBitstream parse(std::span<const uint8_t> bytes);

  bool operator==(const ProgressiveBitstream&) const = default;
};

ProgressiveBitstream truncate(const ProgressiveBitstream& bs, int level);

struct InspectReport {
  size_t file_bytes = 0;
  // Everything that is not a level chunk: preamble, header chunk, trailer.
  size_t header_bytes = 0;
  size_t trailer_bytes = 0;
  std::vector<std::pair<std::string, size_t>> header_sections;
  int levels_configured = 0;
  int levels_present = 0;
  int num_anchors = 0;
  int num_gaussians = 0;
  std::vector<size_t> delta_bytes;   // per present level
  std::vector<double> anchor_ratio;  // r(m^a_s), per present level
  std::vector<double> gauss_ratio;   // r(m^g_s), per present level

  std::string to_kv() const;
  std::string to_json_lines() const;
  std::string to_table() const;
};

InspectReport inspect(const ProgressiveBitstream& bs);

}  // namespace pcgs
