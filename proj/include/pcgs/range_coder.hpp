#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pcgs/entropy_model.hpp"

namespace pcgs {

// 32-bit range coder over 2^16-total frequency tables, with a 64-bit low
// register for carry propagation. Output is raw bytes with no framing.
class RangeEncoder {
public:
  void encode_symbol(const FreqTable& table, int symbol);

  // Finalizes the stream; the encoder is reset afterwards.
  std::vector<uint8_t> flush();

  size_t symbols() const { return symbols_; }

private:
  void shift_low();

  uint64_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint8_t cache_ = 0;
  uint64_t cache_size_ = 1;
  size_t symbols_ = 0;
  std::vector<uint8_t> out_;
};

class RangeDecoder {
public:
  explicit RangeDecoder(std::span<const uint8_t> data);

  int decode_symbol(const FreqTable& table);

  // Bytes read so far. A well-formed chunk is consumed exactly.
  size_t consumed() const { return pos_; }
  size_t size() const { return data_.size(); }

private:
  uint8_t next_byte();

  std::span<const uint8_t> data_;
  size_t pos_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint32_t code_ = 0;
};

// Ideal information content -log2 p of a symbol, in bits.
double coded_cost(const FreqTable& table, int symbol);

}  // namespace pcgs
