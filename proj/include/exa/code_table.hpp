#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace exa {

// Occurrences of (parent-context pattern, child pattern) pairs.
using SymbolCounts = std::vector<std::uint64_t>;  // 65536 entries, index ctx * 256 + child

inline SymbolCounts make_symbol_counts() { return SymbolCounts(65536, 0); }

using TableHash = std::array<std::uint8_t, 16>;

// FNV-1a, 128-bit variant.
inline TableHash fnv1a_128(const std::uint8_t* data, std::size_t n) {
  unsigned __int128 h = (static_cast<unsigned __int128>(0x6c62272e07bb0142ULL) << 64) | 0x62b821756295c58dULL;
  const unsigned __int128 prime = (static_cast<unsigned __int128>(0x0000000001000000ULL) << 64) | 0x000000000000013BULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= prime;
  }
  TableHash out;
  for (int i = 0; i < 16; ++i) out[i] = static_cast<std::uint8_t>(h >> (8 * (15 - i)));
  return out;
}

// Static rank table: for each 8-bit context, a permutation of the 256 child
// patterns ordered by decreasing corpus frequency. Rank r is sent as the
// Elias-gamma code of r + 1.
class CodeTable {
 public:
  CodeTable() : rank_(65536), child_(65536) {
    for (int c = 0; c < 256; ++c)
      for (int p = 0; p < 256; ++p) rank_[c * 256 + p] = child_[c * 256 + p] = static_cast<std::uint8_t>(p);
    hash_ = fnv1a_128(rank_.data(), rank_.size());
  }

  static CodeTable from_ranks(const std::vector<std::uint8_t>& ranks) {
    if (ranks.size() != 65536) throw std::invalid_argument("code table needs 65536 entries");
    CodeTable t;
    t.rank_ = ranks;
    for (int c = 0; c < 256; ++c) {
      std::array<bool, 256> seen{};
      for (int p = 0; p < 256; ++p) {
        const std::uint8_t r = ranks[c * 256 + p];
        if (seen[r]) throw std::invalid_argument("code table ranks are not a permutation");
        seen[r] = true;
        t.child_[c * 256 + r] = static_cast<std::uint8_t>(p);
      }
    }
    t.hash_ = fnv1a_128(t.rank_.data(), t.rank_.size());
    return t;
  }

  static CodeTable from_counts(const SymbolCounts& counts) {
    if (counts.size() != 65536) throw std::invalid_argument("symbol counts need 65536 entries");
    std::vector<std::uint8_t> ranks(65536);
    for (int c = 0; c < 256; ++c) {
      std::array<int, 256> order;
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return counts[c * 256 + a] > counts[c * 256 + b];
      });
      for (int r = 0; r < 256; ++r) ranks[c * 256 + order[r]] = static_cast<std::uint8_t>(r);
    }
    return from_ranks(ranks);
  }

  std::uint8_t rank(std::uint8_t ctx, std::uint8_t child) const { return rank_[ctx * 256u + child]; }
  std::uint8_t child(std::uint8_t ctx, std::uint8_t rank) const { return child_[ctx * 256u + rank]; }
  const std::vector<std::uint8_t>& ranks() const { return rank_; }
  const TableHash& hash() const { return hash_; }

 private:
  std::vector<std::uint8_t> rank_;
  std::vector<std::uint8_t> child_;
  TableHash hash_{};
};

inline CodeTable build_code_table(const SymbolCounts& corpus_counts) {
  std::uint64_t total = 0;
  for (auto c : corpus_counts) total += c;
  if (total == 0) throw std::invalid_argument("code table corpus is empty");
  return CodeTable::from_counts(corpus_counts);
}

}  // namespace exa
