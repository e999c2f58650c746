#pragma once

#include <cstdint>
#include <vector>

namespace gs4d {

// rANS parameters: 32-bit state, 12-bit normalized frequencies, byte-wise
// renormalization with a 2^23 lower bound.
inline constexpr int kRansProbBits = 12;
inline constexpr uint32_t kRansProbScale = 1u << kRansProbBits;
inline constexpr uint32_t kRansLowBound = 1u << 23;

// Symbol frequencies normalized to sum exactly 4096; every symbol present in
// the payload keeps a count of at least 1.
struct FrequencyTable {
  std::vector<uint16_t> freq;  // size = alphabet
  std::vector<uint32_t> cum;   // size = alphabet + 1, cum.back() == 4096

  uint32_t alphabet() const { return static_cast<uint32_t>(freq.size()); }

  // Normalized table from raw symbol counts.
  static FrequencyTable build(const uint16_t* symbols, size_t n, uint32_t alphabet);

  // Table from already-normalized counts (e.g. read from a container);
  // validates the sum.
  static FrequencyTable from_counts(std::vector<uint16_t> counts);
};

// Encodes symbols so that decoding emits them in forward order; the final
// state is the first 4 bytes, little-endian. Empty input yields exactly those
// 4 bytes. Rejects symbols with zero frequency.
std::vector<uint8_t> rans_encode(const uint16_t* symbols, size_t n, const FrequencyTable& table);

// Exact inverse of rans_encode. Rejects truncation, trailing bytes, and
// streams whose final state does not return to the initial bound (tampering).
std::vector<uint16_t> rans_decode(const uint8_t* bytes, size_t len, const FrequencyTable& table,
                                  size_t count);

}  // namespace gs4d
