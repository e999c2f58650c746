#include "gs4d/codec.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "gs4d/io_util.hpp"
#include "gs4d/rans.hpp"
#include "gs4d/sh.hpp"

namespace gs4d {
namespace {

constexpr uint32_t kVersion = 1;
constexpr uint8_t kFlagResiduals = 1;
constexpr uint8_t kFlagEdMotion = 2;

double f32r(double v) { return static_cast<double>(static_cast<float>(v)); }

// Per-frame, per-group quantization layout.
struct GroupSpec {
  int bits = 0;
  std::vector<QuantChannel> channels;
};

std::vector<double> gather(const FrameState& f, AttrGroup g) {
  const size_t n = f.size();
  std::vector<double> out;
  switch (g) {
    case AttrGroup::kPosition:
      out.resize(n * 3);
      for (size_t i = 0; i < n; ++i) {
        for (int d = 0; d < 3; ++d) out[i * 3 + d] = f.kernels[i].position[d];
      }
      break;
    case AttrGroup::kRotation:
      out.resize(n * 4);
      for (size_t i = 0; i < n; ++i) {
        const Quaternion& q = f.kernels[i].rotation;
        out[i * 4 + 0] = q.w;
        out[i * 4 + 1] = q.x;
        out[i * 4 + 2] = q.y;
        out[i * 4 + 3] = q.z;
      }
      break;
    case AttrGroup::kScale:
      out.resize(n * 3);
      for (size_t i = 0; i < n; ++i) {
        for (int d = 0; d < 3; ++d) out[i * 3 + d] = f.kernels[i].log_scale[d];
      }
      break;
    case AttrGroup::kOpacity:
      out.resize(n);
      for (size_t i = 0; i < n; ++i) out[i] = f.kernels[i].opacity_logit;
      break;
    case AttrGroup::kSh: {
      const size_t v = f.kernels.empty() ? 0 : f.kernels.front().sh.size();
      out.resize(n * v);
      for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < v; ++j) out[i * v + j] = f.kernels[i].sh[j];
      }
      break;
    }
  }
  return out;
}

void scatter(FrameState& f, AttrGroup g, const std::vector<double>& in) {
  const size_t n = f.size();
  switch (g) {
    case AttrGroup::kPosition:
      for (size_t i = 0; i < n; ++i) {
        for (int d = 0; d < 3; ++d) f.kernels[i].position[d] = in[i * 3 + d];
      }
      break;
    case AttrGroup::kRotation:
      for (size_t i = 0; i < n; ++i) {
        f.kernels[i].rotation =
            Quaternion(in[i * 4 + 0], in[i * 4 + 1], in[i * 4 + 2], in[i * 4 + 3]);
      }
      break;
    case AttrGroup::kScale:
      for (size_t i = 0; i < n; ++i) {
        for (int d = 0; d < 3; ++d) f.kernels[i].log_scale[d] = in[i * 3 + d];
      }
      break;
    case AttrGroup::kOpacity:
      for (size_t i = 0; i < n; ++i) f.kernels[i].opacity_logit = in[i];
      break;
    case AttrGroup::kSh: {
      const size_t v = f.kernels.empty() ? 0 : f.kernels.front().sh.size();
      for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < v; ++j) f.kernels[i].sh[j] = in[i * v + j];
      }
      break;
    }
  }
}

GroupSpec fit_group(const std::vector<double>& values, int channels, int bits) {
  GroupSpec spec;
  spec.bits = bits;
  spec.channels.resize(channels);
  const size_t n = values.size() / channels;
  for (int c = 0; c < channels; ++c) {
    spec.channels[c] = bits > 0 ? fit_quant_channel(values.data() + c, n, channels, bits)
                                : QuantChannel{0.0f, 0.0f};
  }
  return spec;
}

std::vector<uint16_t> quantize_group(const std::vector<double>& values, const GroupSpec& spec) {
  const int channels = static_cast<int>(spec.channels.size());
  const size_t n = values.size() / channels;
  std::vector<uint16_t> symbols(values.size());
  for (int c = 0; c < channels; ++c) {
    quantize_channel(values.data() + c, n, channels, spec.channels[c], spec.bits,
                     symbols.data() + c, channels);
  }
  return symbols;
}

std::vector<double> dequantize_group(const std::vector<uint16_t>& symbols,
                                     const GroupSpec& spec) {
  const int channels = static_cast<int>(spec.channels.size());
  const size_t n = symbols.size() / channels;
  std::vector<double> values(symbols.size());
  for (int c = 0; c < channels; ++c) {
    dequantize_channel(symbols.data() + c, n, channels, spec.channels[c], values.data() + c,
                       channels);
  }
  return values;
}

// The keyframe the decoder will see: motion rounded to 32-bit (or quantized),
// appearance dequantized.
FrameState reconstruct_key(const FrameState& key,
                           const std::array<GroupSpec, kGroupCount>& specs) {
  FrameState recon = key;
  for (int g = 0; g < kGroupCount; ++g) {
    const AttrGroup group = static_cast<AttrGroup>(g);
    std::vector<double> values = gather(key, group);
    if (specs[g].bits == 0) {
      for (double& v : values) v = f32r(v);
    } else {
      values = dequantize_group(quantize_group(values, specs[g]), specs[g]);
    }
    scatter(recon, group, values);
  }
  return recon;
}

EDGraph reconstruct_rest(const EDGraph& ed) {
  EDGraph recon = ed;
  recon.node_radius = f32r(ed.node_radius);
  for (EDNode& n : recon.nodes) {
    n.x = Vec3(f32r(n.x.x()), f32r(n.x.y()), f32r(n.x.z()));
    n.dq = DualQuaternion::identity();
  }
  return recon;
}

DualQuaternion f32r_dq(const DualQuaternion& dq) {
  DualQuaternion r;
  r.real = {f32r(dq.real.w), f32r(dq.real.x), f32r(dq.real.y), f32r(dq.real.z)};
  r.dual = {f32r(dq.dual.w), f32r(dq.dual.x), f32r(dq.dual.y), f32r(dq.dual.z)};
  return r;
}

void write_group_header(ByteWriter& w, int g, const GroupSpec& spec) {
  w.u8(static_cast<uint8_t>(g));
  w.u8(static_cast<uint8_t>(spec.bits));
  w.u16(static_cast<uint16_t>(spec.channels.size()));
  for (const QuantChannel& ch : spec.channels) {
    w.f32(ch.min);
    w.f32(ch.step);
  }
}

GroupSpec read_group_header(ByteReader& r, int g, int expected_channels) {
  const int id = r.u8();
  if (id != g) {
    throw std::runtime_error("decode_segment: spec block order corrupt (group " +
                             std::to_string(id) + " where " + std::to_string(g) + " expected)");
  }
  GroupSpec spec;
  spec.bits = r.u8();
  if (spec.bits > 16) {
    throw std::runtime_error("decode_segment: bit width " + std::to_string(spec.bits) +
                             " out of range");
  }
  const int channels = r.u16();
  if (channels != expected_channels) {
    throw std::runtime_error("decode_segment: group " + std::to_string(g) + " has " +
                             std::to_string(channels) + " channels, expected " +
                             std::to_string(expected_channels));
  }
  spec.channels.resize(channels);
  for (QuantChannel& ch : spec.channels) {
    ch.min = r.f32();
    ch.step = r.f32();
    if (spec.bits > 0 && !(ch.step > 0.0f)) {
      throw std::runtime_error("decode_segment: non-positive quantization step");
    }
  }
  return spec;
}

// One frame-group record: raw 32-bit values for 0-bit groups, otherwise a
// frequency table plus rANS payload.
void write_record(ByteWriter& w, int g, const GroupSpec& spec, const std::vector<double>& raw,
                  const std::vector<uint16_t>& symbols, size_t* record_bytes) {
  const size_t before = w.data().size();
  w.u8(static_cast<uint8_t>(g));
  if (spec.bits == 0) {
    w.u32(static_cast<uint32_t>(raw.size()));
    for (double v : raw) w.f32(static_cast<float>(v));
  } else {
    const FrequencyTable table =
        FrequencyTable::build(symbols.data(), symbols.size(), 1u << spec.bits);
    w.u32(static_cast<uint32_t>(symbols.size()));
    uint32_t present = 0;
    for (uint16_t fcount : table.freq) present += fcount > 0;
    w.u32(present);
    for (uint32_t s = 0; s < table.alphabet(); ++s) {
      if (table.freq[s] > 0) {
        w.u16(static_cast<uint16_t>(s));
        w.u16(table.freq[s]);
      }
    }
    const std::vector<uint8_t> payload = rans_encode(symbols.data(), symbols.size(), table);
    w.u32(static_cast<uint32_t>(payload.size()));
    w.bytes(payload.data(), payload.size());
  }
  if (record_bytes) *record_bytes += w.data().size() - before;
}

std::vector<double> read_record(ByteReader& r, int g, const GroupSpec& spec,
                                size_t expected_values) {
  const int id = r.u8();
  if (id != g) {
    throw std::runtime_error("decode_segment: record order corrupt (group " + std::to_string(id) +
                             " where " + std::to_string(g) + " expected)");
  }
  if (spec.bits == 0) {
    const uint32_t count = r.u32();
    if (count != expected_values) {
      throw std::runtime_error("decode_segment: raw group " + std::to_string(g) + " holds " +
                               std::to_string(count) + " values, expected " +
                               std::to_string(expected_values));
    }
    std::vector<double> values(count);
    for (uint32_t i = 0; i < count; ++i) values[i] = r.f32();
    return values;
  }
  const uint32_t count = r.u32();
  if (count != expected_values) {
    throw std::runtime_error("decode_segment: group " + std::to_string(g) + " holds " +
                             std::to_string(count) + " symbols, expected " +
                             std::to_string(expected_values));
  }
  const uint32_t alphabet = 1u << spec.bits;
  const uint32_t present = r.u32();
  if (present > alphabet) {
    throw std::runtime_error("decode_segment: frequency table lists " + std::to_string(present) +
                             " symbols for a " + std::to_string(alphabet) + "-symbol alphabet");
  }
  std::vector<uint16_t> counts(alphabet, 0);
  uint32_t prev_sym = 0;
  for (uint32_t i = 0; i < present; ++i) {
    const uint16_t sym = r.u16();
    const uint16_t freq = r.u16();
    if (sym >= alphabet || (i > 0 && sym <= prev_sym)) {
      throw std::runtime_error("decode_segment: frequency table symbols corrupt");
    }
    counts[sym] = freq;
    prev_sym = sym;
  }
  const FrequencyTable table = FrequencyTable::from_counts(std::move(counts));
  const uint32_t payload_bytes = r.u32();
  const uint8_t* payload = r.raw(payload_bytes);
  const std::vector<uint16_t> symbols = rans_decode(payload, payload_bytes, table, count);
  return dequantize_group(symbols, spec);
}

uint32_t header_crc(const std::vector<uint8_t>& bytes) {
  return static_cast<uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), bytes.data(), static_cast<uInt>(bytes.size())));
}

}  // namespace

int group_channels(AttrGroup g, int sh_degree) {
  switch (g) {
    case AttrGroup::kPosition:
    case AttrGroup::kScale:
      return 3;
    case AttrGroup::kRotation:
      return 4;
    case AttrGroup::kOpacity:
      return 1;
    case AttrGroup::kSh:
      return sh_value_count(sh_degree);
  }
  throw std::invalid_argument("group_channels: unknown group");
}

ResidualArrays residual_frame(const FrameState& frame, const FrameState& key,
                              const GaussianGraph& graph, const EDGraph& ed_motion) {
  if (frame.size() != key.size()) {
    throw std::invalid_argument("residual_frame: frame and key kernel counts differ");
  }
  const FrameState warped = warp_frame(key, graph, ed_motion, frame.frame_index);
  ResidualArrays res;
  res.position = gather(frame, AttrGroup::kPosition);
  res.rotation = gather(frame, AttrGroup::kRotation);
  res.scale = gather(frame, AttrGroup::kScale);
  res.opacity = gather(frame, AttrGroup::kOpacity);
  res.sh = gather(frame, AttrGroup::kSh);

  const std::vector<double> wp = gather(warped, AttrGroup::kPosition);
  const std::vector<double> wq = gather(warped, AttrGroup::kRotation);
  const std::vector<double> ws = gather(warped, AttrGroup::kScale);
  const std::vector<double> wo = gather(warped, AttrGroup::kOpacity);
  const std::vector<double> wsh = gather(warped, AttrGroup::kSh);
  if (res.sh.size() != wsh.size()) {
    throw std::invalid_argument("residual_frame: SH degree differs between frame and key");
  }

  for (size_t i = 0; i < res.position.size(); ++i) res.position[i] -= wp[i];
  for (size_t i = 0; i < res.scale.size(); ++i) res.scale[i] -= ws[i];
  for (size_t i = 0; i < res.opacity.size(); ++i) res.opacity[i] -= wo[i];
  for (size_t i = 0; i < res.sh.size(); ++i) res.sh[i] -= wsh[i];
  for (size_t k = 0; k < frame.size(); ++k) {
    double dot = 0.0;
    for (int d = 0; d < 4; ++d) dot += res.rotation[k * 4 + d] * wq[k * 4 + d];
    const double sign = dot >= 0.0 ? 1.0 : -1.0;
    for (int d = 0; d < 4; ++d) res.rotation[k * 4 + d] = sign * res.rotation[k * 4 + d] - wq[k * 4 + d];
  }
  return res;
}

std::vector<uint8_t> encode_segment(const std::vector<FrameState>& frames, const EDGraph& ed_rest,
                                    const std::vector<std::vector<DualQuaternion>>& ed_motions,
                                    const BitPolicy& policy, SegmentSizeReport* report) {
  if (frames.empty()) throw std::invalid_argument("encode_segment: no frames");
  const size_t n = frames.front().size();
  if (n == 0) throw std::invalid_argument("encode_segment: empty keyframe");
  const int sh_degree = frames.front().sh_degree();
  for (const FrameState& f : frames) {
    if (f.size() != n || f.sh_degree() != sh_degree) {
      throw std::invalid_argument("encode_segment: kernel identity differs across frames");
    }
  }
  for (int bits : {policy.key_motion_bits, policy.key_appearance_bits, policy.motion_bits,
                   policy.appearance_bits}) {
    if (bits < 0 || bits > 16) {
      throw std::invalid_argument("encode_segment: bit width " + std::to_string(bits) +
                                  " outside [0, 16]");
    }
  }
  const size_t frame_count = frames.size();
  const bool use_residuals = policy.residuals && frame_count > 1;
  if (use_residuals) {
    if (ed_motions.size() != frame_count - 1) {
      throw std::invalid_argument("encode_segment: need one ED motion set per non-key frame");
    }
    for (const auto& m : ed_motions) {
      if (m.size() != ed_rest.size()) {
        throw std::invalid_argument("encode_segment: ED motion node count differs from graph");
      }
    }
  }

  const auto group_bits_key = [&](int g) {
    return g <= 1 ? policy.key_motion_bits : policy.key_appearance_bits;
  };
  const auto group_bits = [&](int g) { return g <= 1 ? policy.motion_bits : policy.appearance_bits; };

  std::array<GroupSpec, kGroupCount> key_specs;
  {
    std::array<std::vector<double>, kGroupCount> key_values;
    for (int g = 0; g < kGroupCount; ++g) {
      key_values[g] = gather(frames[0], static_cast<AttrGroup>(g));
      key_specs[g] = fit_group(key_values[g], group_channels(static_cast<AttrGroup>(g), sh_degree),
                               group_bits_key(g));
    }
  }

  // Closed loop: predict from the reconstruction the decoder will compute.
  const FrameState recon_key = reconstruct_key(frames[0], key_specs);
  EDGraph ed_recon = reconstruct_rest(ed_rest);
  GaussianGraph graph;
  if (use_residuals) graph = build_gaussian_graph(recon_key, ed_recon);

  // Residuals (or raw attributes in the ablation mode) of one non-key frame.
  const auto frame_values = [&](size_t t) {
    std::array<std::vector<double>, kGroupCount> vals;
    if (use_residuals) {
      for (size_t j = 0; j < ed_recon.size(); ++j) {
        ed_recon.nodes[j].dq = f32r_dq(ed_motions[t - 1][j]);
      }
      ResidualArrays res = residual_frame(frames[t], recon_key, graph, ed_recon);
      vals = {std::move(res.position), std::move(res.rotation), std::move(res.scale),
              std::move(res.opacity), std::move(res.sh)};
    } else {
      for (int g = 0; g < kGroupCount; ++g) {
        vals[g] = gather(frames[t], static_cast<AttrGroup>(g));
      }
    }
    return vals;
  };

  // First pass: quantization layout for every frame; per-frame arrays are
  // recomputed in the write pass so memory stays proportional to one frame.
  // Alongside each channel's spec, record the reconstruction error bound the
  // write pass must respect (a negative entry marks raw storage, whose bound
  // is data-dependent and filled in while writing).
  std::vector<std::array<GroupSpec, kGroupCount>> specs(frame_count);
  std::vector<std::array<std::vector<double>, kGroupCount>> chan_bounds(frame_count);
  const auto default_bounds = [](const GroupSpec& spec) {
    std::vector<double> bounds(spec.channels.size(), -1.0);
    if (spec.bits > 0) {
      for (size_t c = 0; c < bounds.size(); ++c) {
        const QuantChannel& ch = spec.channels[c];
        // Half a step, widened by the float rounding of the stored minimum
        // (values below it clamp to symbol zero) and double-evaluation slack.
        bounds[c] = (0.5 + 0x1p-34) * ch.step + std::abs(ch.min) * 0x1p-24;
      }
    }
    return bounds;
  };
  specs[0] = key_specs;
  for (int g = 0; g < kGroupCount; ++g) chan_bounds[0][g] = default_bounds(key_specs[g]);
  for (size_t t = 1; t < frame_count; ++t) {
    const std::array<std::vector<double>, kGroupCount> vals = frame_values(t);
    for (int g = 0; g < kGroupCount; ++g) {
      specs[t][g] = fit_group(vals[g], group_channels(static_cast<AttrGroup>(g), sh_degree),
                              group_bits(g));
      chan_bounds[t][g] = default_bounds(specs[t][g]);
      if (use_residuals && g >= 2 && key_specs[g].bits > 0) {
        // A residual channel carries signal only where it exceeds the key's
        // reconstruction precision. Channels inside half a key step are pure
        // requantization noise: collapse them to zero. Otherwise floor the
        // residual step at the key step so that noise occupies one bin
        // instead of spreading across the whole alphabet.
        const int channels = static_cast<int>(specs[t][g].channels.size());
        const size_t rows = vals[g].size() / channels;
        for (int c = 0; c < channels; ++c) {
          const float key_step = key_specs[g].channels[c].step;
          if (!(key_step > 0.0f)) continue;
          double peak = 0.0;
          for (size_t i = 0; i < rows; ++i) {
            peak = std::max(peak, std::abs(vals[g][i * channels + c]));
          }
          if (peak <= 0.53125 * key_step) {
            // Collapsed channels decode to zero, so the reconstruction error
            // is the dead-zone peak itself, not half of the (unit) step.
            specs[t][g].channels[c] = QuantChannel{0.0f, 1.0f};
            chan_bounds[t][g][c] = 0.53125 * key_step;
          } else if (specs[t][g].channels[c].step < key_step) {
            specs[t][g].channels[c].step = key_step;
            chan_bounds[t][g][c] = (0.5 + 0x1p-34) * key_step +
                                   std::abs(specs[t][g].channels[c].min) * 0x1p-24;
          }
        }
      }
    }
  }

  // Header.
  ByteWriter w;
  w.magic("GS4D");
  w.u32(kVersion);
  w.u32(static_cast<uint32_t>(n));
  w.u16(static_cast<uint16_t>(frame_count));
  w.u8(static_cast<uint8_t>(sh_degree));
  uint8_t flags = 0;
  if (use_residuals) flags |= kFlagResiduals | kFlagEdMotion;
  w.u8(flags);
  for (size_t t = 0; t < frame_count; ++t) {
    for (int g = 0; g < kGroupCount; ++g) write_group_header(w, g, specs[t][g]);
  }
  w.u32(header_crc(w.data()));
  const size_t header_end = w.data().size();

  // ED motion block: rest nodes once, one dual quaternion per node per frame.
  if (use_residuals) {
    w.u32(static_cast<uint32_t>(ed_rest.size()));
    w.f32(static_cast<float>(ed_rest.node_radius));
    for (const EDNode& node : ed_rest.nodes) {
      w.f32(static_cast<float>(node.x.x()));
      w.f32(static_cast<float>(node.x.y()));
      w.f32(static_cast<float>(node.x.z()));
    }
    for (size_t t = 1; t < frame_count; ++t) {
      for (const DualQuaternion& dq : ed_motions[t - 1]) {
        w.f32(static_cast<float>(dq.real.w));
        w.f32(static_cast<float>(dq.real.x));
        w.f32(static_cast<float>(dq.real.y));
        w.f32(static_cast<float>(dq.real.z));
        w.f32(static_cast<float>(dq.dual.w));
        w.f32(static_cast<float>(dq.dual.x));
        w.f32(static_cast<float>(dq.dual.y));
        w.f32(static_cast<float>(dq.dual.z));
      }
    }
  }
  const size_t ed_end = w.data().size();

  SegmentSizeReport rep;
  rep.raw_bytes = frame_count * raw_frame_bytes(n, sh_degree);
  rep.header_bytes = header_end;
  rep.ed_block_bytes = ed_end - header_end;

  // Write pass.
  for (size_t t = 0; t < frame_count; ++t) {
    std::array<std::vector<double>, kGroupCount> vals;
    if (t == 0) {
      for (int g = 0; g < kGroupCount; ++g) vals[g] = gather(frames[0], static_cast<AttrGroup>(g));
    } else {
      vals = frame_values(t);
    }
    const size_t frame_start = w.data().size();
    for (int g = 0; g < kGroupCount; ++g) {
      std::vector<uint16_t> symbols;
      if (specs[t][g].bits > 0) symbols = quantize_group(vals[g], specs[t][g]);
      write_record(w, g, specs[t][g], vals[g], symbols, &rep.group_bytes[g]);
      // Verify in place: the achieved reconstruction error per group against
      // the bound recorded when the layout was chosen.
      const size_t channels = specs[t][g].channels.size();
      for (size_t i = 0; i < vals[g].size(); ++i) {
        const double v = vals[g][i];
        const size_t c = i % channels;
        double err, bound;
        if (specs[t][g].bits > 0) {
          const QuantChannel& ch = specs[t][g].channels[c];
          err = std::abs(v - (static_cast<double>(ch.min) +
                              static_cast<double>(ch.step) * symbols[i]));
          bound = chan_bounds[t][g][c];
        } else {
          // Raw storage rounds to the nearest float: half an ulp, i.e.
          // |v| * 2^-24 plus slack for subnormal magnitudes.
          err = std::abs(v - static_cast<double>(static_cast<float>(v)));
          bound = std::abs(v) * 0x1p-24 + 0x1p-140;
        }
        rep.group_max_error[g] = std::max(rep.group_max_error[g], err);
        rep.group_error_bound[g] = std::max(rep.group_error_bound[g], bound);
      }
    }
    if (t == 0) rep.keyframe_bytes = w.data().size() - frame_start;
  }
  rep.encoded_bytes = w.data().size();
  if (report) *report = rep;
  return w.data();
}

DecodedSegment decode_segment(const std::vector<uint8_t>& bytes) {
  ByteReader r(bytes);
  r.expect_magic("GS4D");
  const uint32_t version = r.u32();
  if (version != kVersion) {
    throw std::runtime_error("decode_segment: unsupported version " + std::to_string(version));
  }
  const uint32_t n = r.u32();
  const uint16_t frame_count = r.u16();
  const int sh_degree = r.u8();
  const uint8_t flags = r.u8();
  if (n == 0 || frame_count == 0) {
    throw std::runtime_error("decode_segment: empty segment header");
  }
  if (sh_degree > kMaxShDegree) {
    throw std::runtime_error("decode_segment: SH degree " + std::to_string(sh_degree) +
                             " out of range");
  }

  std::vector<std::array<GroupSpec, kGroupCount>> specs(frame_count);
  for (uint16_t t = 0; t < frame_count; ++t) {
    for (int g = 0; g < kGroupCount; ++g) {
      specs[t][g] =
          read_group_header(r, g, group_channels(static_cast<AttrGroup>(g), sh_degree));
    }
  }
  const uint32_t stored_crc = r.u32();
  {
    const std::vector<uint8_t> head(bytes.begin(), bytes.begin() + r.offset() - 4);
    if (header_crc(head) != stored_crc) {
      throw std::runtime_error("decode_segment: header checksum mismatch");
    }
  }

  const bool use_residuals = flags & kFlagResiduals;
  EDGraph ed;
  std::vector<std::vector<DualQuaternion>> motions;
  if (flags & kFlagEdMotion) {
    const uint32_t nodes = r.u32();
    ed.node_radius = r.f32();
    if (nodes == 0 || !(ed.node_radius > 0.0)) {
      throw std::runtime_error("decode_segment: corrupt ED motion block");
    }
    ed.nodes.resize(nodes);
    for (EDNode& node : ed.nodes) {
      const double x = r.f32(), y = r.f32(), z = r.f32();
      node.x = Vec3(x, y, z);
    }
    motions.resize(frame_count - 1);
    for (auto& frame_motion : motions) {
      frame_motion.resize(nodes);
      for (DualQuaternion& dq : frame_motion) {
        dq.real.w = r.f32();
        dq.real.x = r.f32();
        dq.real.y = r.f32();
        dq.real.z = r.f32();
        dq.dual.w = r.f32();
        dq.dual.x = r.f32();
        dq.dual.y = r.f32();
        dq.dual.z = r.f32();
      }
    }
  }
  if (use_residuals && !(flags & kFlagEdMotion)) {
    throw std::runtime_error("decode_segment: residual flag set without ED motion block");
  }

  const int sh_values = sh_value_count(sh_degree);
  DecodedSegment out;
  out.frames.resize(frame_count);
  out.raw_rotations.resize(frame_count);

  // Keyframe.
  FrameState& key = out.frames[0];
  key.frame_index = 0;
  key.kernels.assign(n, GaussianKernel{});
  for (GaussianKernel& k : key.kernels) k.sh.assign(sh_values, 0.0);
  std::array<std::vector<double>, kGroupCount> key_values;
  for (int g = 0; g < kGroupCount; ++g) {
    const size_t expected = n * static_cast<size_t>(group_channels(static_cast<AttrGroup>(g), sh_degree));
    key_values[g] = read_record(r, g, specs[0][g], expected);
  }
  scatter(key, AttrGroup::kPosition, key_values[0]);
  scatter(key, AttrGroup::kScale, key_values[2]);
  scatter(key, AttrGroup::kOpacity, key_values[3]);
  scatter(key, AttrGroup::kSh, key_values[4]);
  out.raw_rotations[0].resize(n);
  for (size_t i = 0; i < n; ++i) {
    const Vec4 q(key_values[1][i * 4 + 0], key_values[1][i * 4 + 1], key_values[1][i * 4 + 2],
                 key_values[1][i * 4 + 3]);
    out.raw_rotations[0][i] = q;
    key.kernels[i].rotation = Quaternion(q[0], q[1], q[2], q[3]).normalized();
  }

  // The encoder predicted from the key with raw (pre-normalization)
  // rotations; mirror that exactly so compensation cancels.
  GaussianGraph graph;
  FrameState key_raw_rot = key;
  for (size_t i = 0; i < n; ++i) {
    const Vec4& q = out.raw_rotations[0][i];
    key_raw_rot.kernels[i].rotation = Quaternion(q[0], q[1], q[2], q[3]);
  }
  if (use_residuals && frame_count > 1) {
    graph = build_gaussian_graph(key_raw_rot, ed);
  }

  for (uint16_t t = 1; t < frame_count; ++t) {
    std::array<std::vector<double>, kGroupCount> vals;
    for (int g = 0; g < kGroupCount; ++g) {
      const size_t expected = n * static_cast<size_t>(group_channels(static_cast<AttrGroup>(g), sh_degree));
      vals[g] = read_record(r, g, specs[t][g], expected);
    }
    FrameState& frame = out.frames[t];
    frame.frame_index = t;
    frame.kernels.assign(n, GaussianKernel{});
    for (GaussianKernel& k : frame.kernels) k.sh.assign(sh_values, 0.0);
    out.raw_rotations[t].resize(n);

    if (use_residuals) {
      for (size_t j = 0; j < ed.size(); ++j) ed.nodes[j].dq = motions[t - 1][j];
      const FrameState warped = warp_frame(key_raw_rot, graph, ed, t);
      const std::vector<double> wp = gather(warped, AttrGroup::kPosition);
      const std::vector<double> wq = gather(warped, AttrGroup::kRotation);
      const std::vector<double> ws = gather(warped, AttrGroup::kScale);
      const std::vector<double> wo = gather(warped, AttrGroup::kOpacity);
      const std::vector<double> wsh = gather(warped, AttrGroup::kSh);
      for (size_t i = 0; i < vals[0].size(); ++i) vals[0][i] += wp[i];
      for (size_t i = 0; i < vals[1].size(); ++i) vals[1][i] += wq[i];
      for (size_t i = 0; i < vals[2].size(); ++i) vals[2][i] += ws[i];
      for (size_t i = 0; i < vals[3].size(); ++i) vals[3][i] += wo[i];
      for (size_t i = 0; i < vals[4].size(); ++i) vals[4][i] += wsh[i];
    }
    scatter(frame, AttrGroup::kPosition, vals[0]);
    scatter(frame, AttrGroup::kScale, vals[2]);
    scatter(frame, AttrGroup::kOpacity, vals[3]);
    scatter(frame, AttrGroup::kSh, vals[4]);
    for (size_t i = 0; i < n; ++i) {
      const Vec4 q(vals[1][i * 4 + 0], vals[1][i * 4 + 1], vals[1][i * 4 + 2],
                   vals[1][i * 4 + 3]);
      out.raw_rotations[t][i] = q;
      frame.kernels[i].rotation = Quaternion(q[0], q[1], q[2], q[3]).normalized();
    }
  }
  r.expect_end();
  return out;
}

}  // namespace gs4d
