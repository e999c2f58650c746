#include "gs4d/quant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace gs4d {

QuantChannel fit_quant_channel(const double* values, size_t n, size_t stride, int bits) {
  if (bits < 1 || bits > 16) {
    throw std::invalid_argument("quantize: bit width must be in [1,16], got " +
                                std::to_string(bits));
  }
  if (n == 0) return {0.0f, 1.0f};
  double lo = values[0], hi = values[0];
  for (size_t i = 0; i < n; ++i) {
    const double v = values[i * stride];
    if (!std::isfinite(v)) {
      throw std::invalid_argument("quantize: non-finite value at index " + std::to_string(i));
    }
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  QuantChannel ch;
  ch.min = static_cast<float>(lo);
  const double levels = static_cast<double>((1u << bits) - 1);
  // The range is measured against the stored (rounded) minimum so the last
  // level lands on or beyond the true maximum.
  const double step = (hi - static_cast<double>(ch.min)) / levels;
  ch.step = step > 0.0 ? static_cast<float>(step) : 1.0f;
  if (ch.step <= 0.0f) ch.step = std::nextafter(0.0f, 1.0f);
  // float rounding of a positive step can only keep it positive, but the
  // range may shrink below hi; widen one ulp at a time until it covers.
  while (static_cast<double>(ch.min) + static_cast<double>(ch.step) * levels < hi) {
    ch.step = std::nextafter(ch.step, std::numeric_limits<float>::infinity());
  }
  return ch;
}

void quantize_channel(const double* values, size_t n, size_t stride, const QuantChannel& ch,
                      int bits, uint16_t* out, size_t out_stride) {
  if (bits < 1 || bits > 16) {
    throw std::invalid_argument("quantize: bit width must be in [1,16], got " +
                                std::to_string(bits));
  }
  const uint32_t max_sym = (1u << bits) - 1;
  const double min = ch.min, step = ch.step;
  for (size_t i = 0; i < n; ++i) {
    const double v = values[i * stride];
    if (!std::isfinite(v)) {
      throw std::invalid_argument("quantize: non-finite value at index " + std::to_string(i));
    }
    double s = std::round((v - min) / step);
    s = std::clamp(s, 0.0, static_cast<double>(max_sym));
    out[i * out_stride] = static_cast<uint16_t>(s);
  }
}

void dequantize_channel(const uint16_t* symbols, size_t n, size_t stride, const QuantChannel& ch,
                        double* out, size_t out_stride) {
  const double min = ch.min, step = ch.step;
  for (size_t i = 0; i < n; ++i) {
    out[i * out_stride] = min + static_cast<double>(symbols[i * stride]) * step;
  }
}

}  // namespace gs4d
