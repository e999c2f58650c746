#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "gs4d/ed_graph.hpp"
#include "gs4d/gaussian_graph.hpp"
#include "gs4d/kernel.hpp"
#include "gs4d/quant.hpp"
#include "gs4d/types.hpp"

namespace gs4d {

// Attribute groups, in container order. Motion = position + rotation;
// appearance = scale + opacity + SH.
enum class AttrGroup : uint8_t {
  kPosition = 0,
  kRotation = 1,
  kScale = 2,
  kOpacity = 3,
  kSh = 4,
};
inline constexpr int kGroupCount = 5;

int group_channels(AttrGroup g, int sh_degree);

// Quantization bit widths. 0 bits = raw 32-bit storage. Defaults follow the
// shipped policy: keyframe motion uncompressed, 9-bit keyframe appearance,
// 11-bit motion / 7-bit appearance residuals elsewhere.
struct BitPolicy {
  int key_motion_bits = 0;
  int key_appearance_bits = 9;
  int motion_bits = 11;
  int appearance_bits = 7;
  bool residuals = true;  // false: quantize raw attributes (ablation mode)
};

// Kernel-major attribute arrays of one frame's residuals (or raw attributes).
struct ResidualArrays {
  std::vector<double> position;  // 3 per kernel
  std::vector<double> rotation;  // 4 per kernel (w,x,y,z), hemisphere-aligned
  std::vector<double> scale;     // 3 per kernel
  std::vector<double> opacity;   // 1 per kernel
  std::vector<double> sh;        // sh_value_count per kernel
};

// Motion-compensated residuals of `frame` against the warped key state:
// subtract the warp of `key` under `ed_motion`, with the rotation flipped to
// the warped hemisphere first. Appearance subtracts the key values directly.
ResidualArrays residual_frame(const FrameState& frame, const FrameState& key,
                              const GaussianGraph& graph, const EDGraph& ed_motion);

struct SegmentSizeReport {
  size_t raw_bytes = 0;      // 32-bit storage of every frame
  size_t encoded_bytes = 0;  // container size
  size_t keyframe_bytes = 0;
  size_t header_bytes = 0;
  size_t ed_block_bytes = 0;
  std::array<size_t, kGroupCount> group_bytes{};  // record bytes across frames
  // Quantization-layer reconstruction error per group: the worst achieved
  // |value - dequantized value| and the a-priori bound it must respect
  // (step/2 per fitted channel plus float-rounding allowances, the dead-zone
  // threshold for collapsed residual channels, half a float ulp for raw
  // storage). Encoders assert max_error <= bound after every segment.
  std::array<double, kGroupCount> group_max_error{};
  std::array<double, kGroupCount> group_error_bound{};

  double ratio() const {
    return encoded_bytes ? static_cast<double>(raw_bytes) / encoded_bytes : 0.0;
  }
};

// Encodes a segment (frame 0 is the keyframe) into the binary container.
// `ed_motions` holds the tracked per-node motion for each non-key frame; it
// may be empty when the segment has one frame or residuals are disabled.
// Prediction runs closed-loop: the encoder reconstructs the keyframe and
// motions exactly as the decoder will, so compensation cancels exactly.
std::vector<uint8_t> encode_segment(const std::vector<FrameState>& frames, const EDGraph& ed_rest,
                                    const std::vector<std::vector<DualQuaternion>>& ed_motions,
                                    const BitPolicy& policy, SegmentSizeReport* report = nullptr);

struct DecodedSegment {
  std::vector<FrameState> frames;
  // Rotations before renormalization, for error-bound verification.
  std::vector<std::vector<Vec4>> raw_rotations;
};

DecodedSegment decode_segment(const std::vector<uint8_t>& bytes);

}  // namespace gs4d
