#pragma once

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace exa {

struct StreamError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// MSB-first bit writer.
class BitWriter {
 public:
  void put_bit(bool b) {
    if ((bits_ & 7) == 0) bytes_.push_back(0);
    if (b) bytes_.back() |= static_cast<std::uint8_t>(0x80u >> (bits_ & 7));
    ++bits_;
  }

  // Writes the low `n` bits of v, most significant first. n <= 64.
  void put_bits(std::uint64_t v, int n) {
    for (int i = n - 1; i >= 0; --i) put_bit((v >> i) & 1u);
  }

  // Elias-gamma code of v >= 1.
  void put_gamma(std::uint64_t v) {
    const int len = std::bit_width(v);
    for (int i = 1; i < len; ++i) put_bit(false);
    put_bits(v, len);
  }

  void append(const BitWriter& o) {
    if ((bits_ & 7) == 0) {
      bytes_.insert(bytes_.end(), o.bytes_.begin(), o.bytes_.end());
      bits_ += o.bits_;
      return;
    }
    for (std::uint64_t i = 0; i < o.bits_; ++i) put_bit((o.bytes_[i >> 3] >> (7 - (i & 7))) & 1u);
  }

  std::uint64_t bit_count() const { return bits_; }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
  std::uint64_t bits_ = 0;
};

inline int gamma_length(std::uint64_t v) { return 2 * std::bit_width(v) - 1; }

class BitReader {
 public:
  BitReader(const std::uint8_t* data, std::size_t size) : data_(data), size_bits_(size * 8) {}
  explicit BitReader(const std::vector<std::uint8_t>& v) : BitReader(v.data(), v.size()) {}

  bool get_bit() {
    if (pos_ >= size_bits_) throw StreamError("truncated bit stream");
    bool b = (data_[pos_ >> 3] >> (7 - (pos_ & 7))) & 1u;
    ++pos_;
    return b;
  }

  std::uint64_t get_bits(int n) {
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v = (v << 1) | static_cast<std::uint64_t>(get_bit());
    return v;
  }

  std::uint64_t get_gamma() {
    int zeros = 0;
    while (!get_bit()) {
      if (++zeros > 63) throw StreamError("corrupt Elias-gamma code");
    }
    return (std::uint64_t{1} << zeros) | get_bits(zeros);
  }

  std::uint64_t position() const { return pos_; }

 private:
  const std::uint8_t* data_;
  std::uint64_t size_bits_;
  std::uint64_t pos_ = 0;
};

}  // namespace exa
