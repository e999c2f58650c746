#include "gs4d/rans.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace gs4d {

FrequencyTable FrequencyTable::build(const uint16_t* symbols, size_t n, uint32_t alphabet) {
  if (alphabet == 0) throw std::invalid_argument("rans: empty alphabet");
  std::vector<uint64_t> counts(alphabet, 0);
  for (size_t i = 0; i < n; ++i) {
    if (symbols[i] >= alphabet) {
      throw std::invalid_argument("rans: symbol " + std::to_string(symbols[i]) +
                                  " outside alphabet of " + std::to_string(alphabet));
    }
    ++counts[symbols[i]];
  }

  FrequencyTable t;
  t.freq.assign(alphabet, 0);
  if (n == 0) {
    // Unused table; make it valid by giving symbol 0 the full budget.
    t.freq[0] = static_cast<uint16_t>(kRansProbScale);
  } else {
    size_t present = 0;
    for (uint64_t c : counts) present += c > 0;
    if (present > kRansProbScale) {
      throw std::invalid_argument("rans: more distinct symbols than 12-bit table slots");
    }
    uint32_t sum = 0;
    for (uint32_t s = 0; s < alphabet; ++s) {
      if (counts[s] == 0) continue;
      const uint64_t scaled = counts[s] * kRansProbScale / n;
      t.freq[s] = static_cast<uint16_t>(std::max<uint64_t>(1, scaled));
      sum += t.freq[s];
    }
    // Trim or pad deterministically until the total is exactly 4096: shrink
    // the largest entries first, grow the most frequent symbols first.
    while (sum > kRansProbScale) {
      uint32_t pick = alphabet;
      for (uint32_t s = 0; s < alphabet; ++s) {
        if (t.freq[s] > 1 && (pick == alphabet || t.freq[s] > t.freq[pick])) pick = s;
      }
      --t.freq[pick];
      --sum;
    }
    while (sum < kRansProbScale) {
      uint32_t pick = alphabet;
      for (uint32_t s = 0; s < alphabet; ++s) {
        if (counts[s] > 0 && (pick == alphabet || counts[s] > counts[pick])) pick = s;
      }
      ++t.freq[pick];
      ++sum;
    }
  }
  t.cum.assign(alphabet + 1, 0);
  for (uint32_t s = 0; s < alphabet; ++s) t.cum[s + 1] = t.cum[s] + t.freq[s];
  return t;
}

FrequencyTable FrequencyTable::from_counts(std::vector<uint16_t> counts) {
  FrequencyTable t;
  t.freq = std::move(counts);
  t.cum.assign(t.freq.size() + 1, 0);
  for (size_t s = 0; s < t.freq.size(); ++s) t.cum[s + 1] = t.cum[s] + t.freq[s];
  if (t.cum.back() != kRansProbScale) {
    throw std::runtime_error("rans: corrupt frequency table (sum " +
                             std::to_string(t.cum.back()) + " != 4096)");
  }
  return t;
}

std::vector<uint8_t> rans_encode(const uint16_t* symbols, size_t n, const FrequencyTable& table) {
  uint32_t state = kRansLowBound;
  std::vector<uint8_t> tail;
  tail.reserve(n);
  // Symbols are consumed in reverse so the decoder emits forward order.
  for (size_t i = n; i-- > 0;) {
    const uint16_t s = symbols[i];
    if (s >= table.alphabet() || table.freq[s] == 0) {
      throw std::invalid_argument("rans: symbol " + std::to_string(s) +
                                  " has zero frequency at position " + std::to_string(i));
    }
    const uint32_t f = table.freq[s];
    const uint32_t max_state = ((kRansLowBound >> kRansProbBits) << 8) * f;
    while (state >= max_state) {
      tail.push_back(static_cast<uint8_t>(state & 0xFF));
      state >>= 8;
    }
    state = ((state / f) << kRansProbBits) + (state % f) + table.cum[s];
  }
  std::vector<uint8_t> out;
  out.reserve(4 + tail.size());
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<uint8_t>((state >> (8 * b)) & 0xFF));
  out.insert(out.end(), tail.rbegin(), tail.rend());
  return out;
}

std::vector<uint16_t> rans_decode(const uint8_t* bytes, size_t len, const FrequencyTable& table,
                                  size_t count) {
  if (len < 4) throw std::runtime_error("rans: truncated stream (missing state header)");
  uint32_t state = 0;
  for (int b = 0; b < 4; ++b) state |= static_cast<uint32_t>(bytes[b]) << (8 * b);
  size_t pos = 4;

  // slot -> symbol lookup so each decode step is O(1).
  std::vector<uint16_t> slot_sym(kRansProbScale);
  for (uint32_t s = 0; s < table.alphabet(); ++s) {
    for (uint32_t k = table.cum[s]; k < table.cum[s + 1]; ++k) slot_sym[k] = static_cast<uint16_t>(s);
  }

  std::vector<uint16_t> out(count);
  for (size_t i = 0; i < count; ++i) {
    const uint32_t slot = state & (kRansProbScale - 1);
    const uint16_t s = slot_sym[slot];
    out[i] = s;
    state = table.freq[s] * (state >> kRansProbBits) + slot - table.cum[s];
    while (state < kRansLowBound) {
      if (pos >= len) {
        throw std::runtime_error("rans: truncated stream at symbol " + std::to_string(i));
      }
      state = (state << 8) | bytes[pos++];
    }
  }
  if (state != kRansLowBound) {
    throw std::runtime_error("rans: final state mismatch (corrupt stream or wrong table)");
  }
  if (pos != len) {
    throw std::runtime_error("rans: trailing bytes after symbol stream (offset " +
                             std::to_string(pos) + ")");
  }
  return out;
}

}  // namespace gs4d
