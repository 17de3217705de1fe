#include "pcgs/range_coder.hpp"

#include <cmath>
#include <string>

#include "pcgs/error.hpp"

namespace pcgs {

namespace {

constexpr uint32_t kTop = uint32_t(1) << 24;

}  // namespace

//============================================================================

void
RangeEncoder::encode_symbol(const FreqTable& table, int symbol)
{
  if (symbol < 0 || symbol >= table.size())
    fail(ErrorKind::argument,
         "symbol " + std::to_string(symbol) + " outside a "
           + std::to_string(table.size()) + "-symbol table");

  uint32_t lo = table.cum(symbol);
  uint32_t hi = table.cum(symbol + 1);
  uint32_t r = range_ >> kFreqBits;
  low_ += uint64_t(r) * lo;
  // The last symbol also takes the truncation remainder of the range.
  range_ = hi == kFreqTotal ? range_ - r * lo : r * (hi - lo);

  while (range_ < kTop) {
    range_ <<= 8;
    shift_low();
  }
  symbols_++;
}

void
RangeEncoder::shift_low()
{
  if (low_ < 0xFF000000ull || low_ >= (uint64_t(1) << 32)) {
    auto carry = uint8_t(low_ >> 32);
    uint8_t temp = cache_;
    do {
      out_.push_back(uint8_t(temp + carry));
      temp = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = uint8_t(low_ >> 24);
  }
  cache_size_++;
  low_ = (low_ & 0x00FFFFFFull) << 8;
}

std::vector<uint8_t>
RangeEncoder::flush()
{
  for (int i = 0; i < 5; i++)
    shift_low();
  std::vector<uint8_t> out = std::move(out_);
  *this = RangeEncoder{};
  return out;
}

//============================================================================

RangeDecoder::RangeDecoder(std::span<const uint8_t> data) : data_(data)
{
  // The first byte is the encoder's initial cache and is always zero.
  if (next_byte() != 0)
    fail(ErrorKind::format, "range coder stream does not start with a zero byte");
  for (int i = 0; i < 4; i++)
    code_ = (code_ << 8) | next_byte();
}

uint8_t
RangeDecoder::next_byte()
{
  if (pos_ >= data_.size())
    fail(ErrorKind::format, "range coder stream truncated");
  return data_[pos_++];
}

int
RangeDecoder::decode_symbol(const FreqTable& table)
{
  uint32_t r = range_ >> kFreqBits;
  uint32_t target = code_ / r;
  if (target >= kFreqTotal)
    target = kFreqTotal - 1;
  int sym = table.find(target);

  uint32_t lo = table.cum(sym);
  uint32_t hi = table.cum(sym + 1);
  uint32_t offset = r * lo;
  if (code_ < offset)
    fail(ErrorKind::format, "range coder desynchronized");
  code_ -= offset;
  range_ = hi == kFreqTotal ? range_ - offset : r * (hi - lo);
  if (code_ >= range_)
    fail(ErrorKind::format, "range coder desynchronized");

  while (range_ < kTop) {
    range_ <<= 8;
    code_ = (code_ << 8) | next_byte();
  }
  return sym;
}

//============================================================================

double
coded_cost(const FreqTable& table, int symbol)
{
  return -std::log2(table.probability(symbol));
}

}  // namespace pcgs
