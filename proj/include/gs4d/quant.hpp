#pragma once

#include <cstdint>
#include <vector>

namespace gs4d {

// Range quantization of one channel. min/step are 32-bit reals because they
// are stored verbatim in container headers; both sides of the codec must use
// the identical rounded values.
struct QuantChannel {
  float min = 0.0f;
  float step = 1.0f;
};

// Fits min/step over n strided values: step = (max - min)/(2^bits - 1).
// A constant channel gets step 1 so the invariant step > 0 holds.
QuantChannel fit_quant_channel(const double* values, size_t n, size_t stride, int bits);

// sym = round((v - min)/step), clamped to [0, 2^bits - 1]. Rejects non-finite
// input; |dequantize(quantize(v)) - v| <= step/2 for v inside the fitted range.
void quantize_channel(const double* values, size_t n, size_t stride, const QuantChannel& ch,
                      int bits, uint16_t* out, size_t out_stride);

void dequantize_channel(const uint16_t* symbols, size_t n, size_t stride, const QuantChannel& ch,
                        double* out, size_t out_stride);

}  // namespace gs4d
