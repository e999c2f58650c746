#include "gs4d/codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "gs4d/ed_graph.hpp"
#include "gs4d/gaussian_graph.hpp"
#include "gs4d/kernel.hpp"
#include "gs4d/rng.hpp"
#include "gs4d/synth.hpp"
#include "gs4d/types.hpp"

using namespace gs4d;

TEST_SUITE_BEGIN("codec");

namespace {

constexpr double kTau = 6.283185307179586476925286766559;

// Attribute values as they come back from a 32-bit frame file.
void f32_round_frame(FrameState& f) {
  const auto r = [](double v) { return static_cast<double>(static_cast<float>(v)); };
  for (GaussianKernel& k : f.kernels) {
    for (int d = 0; d < 3; ++d) k.position[d] = r(k.position[d]);
    k.rotation = {r(k.rotation.w), r(k.rotation.x), r(k.rotation.y), r(k.rotation.z)};
    for (int d = 0; d < 3; ++d) k.log_scale[d] = r(k.log_scale[d]);
    k.opacity_logit = r(k.opacity_logit);
    for (double& v : k.sh) v = r(v);
  }
}

std::vector<Vec3> positions_of(const FrameState& f) {
  std::vector<Vec3> pts;
  pts.reserve(f.size());
  for (const GaussianKernel& k : f.kernels) pts.push_back(k.position);
  return pts;
}

// Exact per-node rigid motion of an analytic field at frame t.
std::vector<DualQuaternion> field_node_motion(const EDGraph& ed, const DeformationField& field,
                                              int t) {
  std::vector<DualQuaternion> m;
  m.reserve(ed.size());
  for (const EDNode& node : ed.nodes) {
    const FieldSample s = eval_field(field, node.x, t);
    RigidTransform local;
    local.rotation = quat_to_rot(polar_rotation(s.jacobian));
    local.translation = s.position - local.rotation * node.x;
    m.push_back(dq_from_rigid(local));
  }
  return m;
}

struct BendFixture {
  std::vector<FrameState> frames;
  EDGraph ed;
  std::vector<std::vector<DualQuaternion>> motions;
};

// 30-frame bend with sinusoidal appearance drift, driven by exact node rigids.
BendFixture make_bend_fixture(size_t kernel_count, int frame_count, double drift_amplitude) {
  BaseScene base = make_base_scene(BaseShape::kSphere, kernel_count, 3);
  f32_round_frame(base.frame);

  DeformationField field;
  field.kind = FieldKind::kBend;
  field.curvature = 0.02;

  BendFixture fx;
  for (int t = 0; t < frame_count; ++t) {
    FrameState f = apply_field(base.frame, field, t);
    const double phase = kTau * t / 30.0;
    for (GaussianKernel& k : f.kernels) {
      k.opacity_logit += drift_amplitude * std::sin(phase);
      for (int c = 0; c < 3; ++c) k.sh[c] += drift_amplitude * std::sin(phase + kTau * c / 3.0);
    }
    f.frame_index = t;
    fx.frames.push_back(std::move(f));
  }
  fx.ed = sample_ed_nodes(positions_of(base.frame), 0.15);
  for (int t = 1; t < frame_count; ++t) fx.motions.push_back(field_node_motion(fx.ed, field, t));
  return fx;
}

// Reconstruction bound of a 9-bit range fit over these values.
double key_channel_bound(std::vector<double> vals) {
  const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
  const double step = (*hi - *lo) / 511.0;
  return 0.5 * step + (std::abs(*lo) + std::abs(*hi)) * 1e-6 + 1e-12;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

size_t group_total(const SegmentSizeReport& rep) {
  return std::accumulate(rep.group_bytes.begin(), rep.group_bytes.end(), size_t{0});
}

}  // namespace

TEST_CASE("group channel counts follow the kernel layout") {
  CHECK(group_channels(AttrGroup::kPosition, 0) == 3);
  CHECK(group_channels(AttrGroup::kRotation, 3) == 4);
  CHECK(group_channels(AttrGroup::kScale, 2) == 3);
  CHECK(group_channels(AttrGroup::kOpacity, 1) == 1);
  CHECK(group_channels(AttrGroup::kSh, 0) == 3);
  CHECK(group_channels(AttrGroup::kSh, 3) == 48);
  CHECK_THROWS_AS(group_channels(static_cast<AttrGroup>(9), 0), std::invalid_argument);
}

TEST_CASE("residuals vanish exactly when the frame is the warped key") {
  BaseScene base = make_base_scene(BaseShape::kSphere, 150, 11);
  f32_round_frame(base.frame);
  EDGraph ed = sample_ed_nodes(positions_of(base.frame), 0.3);
  const GaussianGraph graph = build_gaussian_graph(base.frame, ed);

  ResidualArrays res = residual_frame(base.frame, base.frame, graph, ed);
  CHECK(max_abs(res.position) == 0.0);
  CHECK(max_abs(res.rotation) == 0.0);
  CHECK(max_abs(res.scale) == 0.0);
  CHECK(max_abs(res.opacity) == 0.0);
  CHECK(max_abs(res.sh) == 0.0);

  // The opposite quaternion hemisphere encodes the same rotation: residuals
  // must still cancel after sign alignment.
  FrameState flipped = base.frame;
  for (GaussianKernel& k : flipped.kernels) {
    k.rotation = {-k.rotation.w, -k.rotation.x, -k.rotation.y, -k.rotation.z};
  }
  res = residual_frame(flipped, base.frame, graph, ed);
  CHECK(max_abs(res.rotation) == 0.0);

  // Appearance drift on one attribute shows up only there.
  FrameState drifted = base.frame;
  for (GaussianKernel& k : drifted.kernels) k.opacity_logit += 0.25;
  res = residual_frame(drifted, base.frame, graph, ed);
  CHECK(max_abs(res.position) == 0.0);
  CHECK(max_abs(res.sh) == 0.0);
  for (double v : res.opacity) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));

  FrameState short_frame = base.frame;
  short_frame.kernels.pop_back();
  CHECK_THROWS_WITH_AS(residual_frame(short_frame, base.frame, graph, ed),
                       doctest::Contains("kernel counts differ"), std::invalid_argument);
}

TEST_CASE("motion compensation shrinks the residual range on a bend") {
  BendFixture fx = make_bend_fixture(400, 20, 0.0);
  const GaussianGraph graph = build_gaussian_graph(fx.frames[0], fx.ed);
  EDGraph moved = fx.ed;
  const int t = 19;
  for (size_t j = 0; j < moved.size(); ++j) moved.nodes[j].dq = fx.motions[t - 1][j];

  const ResidualArrays res = residual_frame(fx.frames[t], fx.frames[0], graph, moved);
  double raw_delta = 0.0;
  for (size_t i = 0; i < fx.frames[t].size(); ++i) {
    raw_delta = std::max(raw_delta, (fx.frames[t].kernels[i].position -
                                     fx.frames[0].kernels[i].position)
                                        .cwiseAbs()
                                        .maxCoeff());
  }
  CHECK(max_abs(res.position) < raw_delta);
  CHECK(max_abs(res.position) < 0.25 * raw_delta);  // compensation, not a fluke
}

TEST_CASE("zero-bit keyframe motion is stored bit-exactly") {
  Rng rng(21);
  FrameState key;
  key.frame_index = 0;
  for (int i = 0; i < 120; ++i) {
    GaussianKernel k;
    // Doubles that are not 32-bit representable, and rotations deliberately
    // left unnormalized: the container must preserve the 32-bit image of both.
    k.position = Vec3(rng.normal(), rng.normal(), rng.normal()) * (1.0 / 3.0);
    k.rotation = {1.7 * rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    k.log_scale = Vec3(rng.uniform(-4, -2), rng.uniform(-4, -2), rng.uniform(-4, -2));
    k.opacity_logit = rng.uniform(-1, 5);
    k.sh.assign(sh_value_count(1), 0.0);
    for (double& v : k.sh) v = rng.uniform(-1, 1);
    key.kernels.push_back(std::move(k));
  }

  SegmentSizeReport rep;
  const std::vector<uint8_t> bytes = encode_segment({key}, EDGraph{}, {}, BitPolicy{}, &rep);
  const DecodedSegment dec = decode_segment(bytes);
  REQUIRE(dec.frames.size() == 1);
  REQUIRE(dec.frames[0].size() == key.size());
  REQUIRE(dec.raw_rotations[0].size() == key.size());

  for (size_t i = 0; i < key.size(); ++i) {
    const GaussianKernel& in = key.kernels[i];
    const GaussianKernel& out = dec.frames[0].kernels[i];
    for (int d = 0; d < 3; ++d) {
      CHECK(out.position[d] == static_cast<double>(static_cast<float>(in.position[d])));
    }
    const Vec4 qin(in.rotation.w, in.rotation.x, in.rotation.y, in.rotation.z);
    for (int d = 0; d < 4; ++d) {
      CHECK(dec.raw_rotations[0][i][d] == static_cast<double>(static_cast<float>(qin[d])));
    }
    CHECK(out.rotation.norm() == doctest::Approx(1.0).epsilon(1e-12));
  }

  // Appearance is lossy at 9 bits: bound errors by each channel's fitted step.
  for (int d = 0; d < 3; ++d) {
    std::vector<double> channel;
    for (const auto& k : key.kernels) channel.push_back(k.log_scale[d]);
    const double bound = key_channel_bound(channel);
    for (size_t i = 0; i < key.size(); ++i) {
      CHECK(std::abs(dec.frames[0].kernels[i].log_scale[d] - key.kernels[i].log_scale[d]) <=
            bound);
    }
  }
  std::vector<double> opacity;
  for (const auto& k : key.kernels) opacity.push_back(k.opacity_logit);
  const double op_bound = key_channel_bound(opacity);
  for (size_t i = 0; i < key.size(); ++i) {
    CHECK(std::abs(dec.frames[0].kernels[i].opacity_logit - key.kernels[i].opacity_logit) <=
          op_bound);
  }

  // Single-frame segments carry no ED motion block.
  CHECK(rep.ed_block_bytes == 0);
  CHECK(rep.raw_bytes == raw_frame_bytes(key.size(), 1));
  CHECK(rep.header_bytes + group_total(rep) == rep.encoded_bytes);
  CHECK(rep.keyframe_bytes == group_total(rep));
}

TEST_CASE("a static segment costs almost nothing beyond the keyframe") {
  BaseScene base = make_base_scene(BaseShape::kSphere, 300, 5);
  f32_round_frame(base.frame);

  std::vector<FrameState> frames(10, base.frame);
  for (int t = 0; t < 10; ++t) frames[t].frame_index = t;
  EDGraph ed = sample_ed_nodes(positions_of(base.frame), 0.2);
  std::vector<std::vector<DualQuaternion>> motions(
      9, std::vector<DualQuaternion>(ed.size(), DualQuaternion::identity()));

  SegmentSizeReport rep;
  const std::vector<uint8_t> bytes = encode_segment(frames, ed, motions, BitPolicy{}, &rep);
  const DecodedSegment dec = decode_segment(bytes);
  REQUIRE(dec.frames.size() == 10);

  // No motion and no drift: every non-key frame reconstructs the keyframe
  // reconstruction bit for bit.
  for (int t = 1; t < 10; ++t) {
    for (size_t i = 0; i < base.frame.size(); ++i) {
      const GaussianKernel& k0 = dec.frames[0].kernels[i];
      const GaussianKernel& kt = dec.frames[t].kernels[i];
      CHECK(kt.position == k0.position);
      CHECK(dec.raw_rotations[t][i] == dec.raw_rotations[0][i]);
      CHECK(kt.log_scale == k0.log_scale);
      CHECK(kt.opacity_logit == k0.opacity_logit);
      CHECK(kt.sh == k0.sh);
    }
  }
  // Keyframe motion is exact against the 32-bit input.
  for (size_t i = 0; i < base.frame.size(); ++i) {
    CHECK(dec.frames[0].kernels[i].position == base.frame.kernels[i].position);
    const Quaternion& q = base.frame.kernels[i].rotation;
    CHECK(dec.raw_rotations[0][i] == Vec4(q.w, q.x, q.y, q.z));
  }

  CHECK(rep.raw_bytes == 10 * raw_frame_bytes(300, 3));
  CHECK(rep.header_bytes + rep.ed_block_bytes + group_total(rep) == rep.encoded_bytes);
  CHECK(rep.ratio() == doctest::Approx(static_cast<double>(rep.raw_bytes) / rep.encoded_bytes));

  // All nine non-key frames together stay under 2% of ONE raw frame.
  const size_t non_key =
      rep.encoded_bytes - rep.header_bytes - rep.ed_block_bytes - rep.keyframe_bytes;
  CHECK(non_key < raw_frame_bytes(300, 3) / 50);
  CHECK(rep.encoded_bytes * 5 < rep.raw_bytes);

  // The encoder's self-check: achieved quantization error within its bound.
  for (int g = 0; g < kGroupCount; ++g) {
    CHECK(rep.group_max_error[g] <= rep.group_error_bound[g]);
  }
}

TEST_CASE("a tracked bend sequence compresses an order of magnitude below raw") {
  BendFixture fx = make_bend_fixture(2000, 30, 0.1);
  SegmentSizeReport rep;
  const std::vector<uint8_t> bytes = encode_segment(fx.frames, fx.ed, fx.motions, BitPolicy{}, &rep);
  CHECK(rep.encoded_bytes == bytes.size());
  CHECK(rep.header_bytes + rep.ed_block_bytes + group_total(rep) == rep.encoded_bytes);
  CHECK(rep.ratio() >= 10.0);

  const DecodedSegment dec = decode_segment(bytes);
  double pos_err = 0.0, rot_err = 0.0, scale_err = 0.0, op_err = 0.0, sh_err = 0.0;
  for (int t = 0; t < 30; ++t) {
    for (size_t i = 0; i < fx.frames[t].size(); ++i) {
      const GaussianKernel& in = fx.frames[t].kernels[i];
      const GaussianKernel& out = dec.frames[t].kernels[i];
      pos_err = std::max(pos_err, (out.position - in.position).cwiseAbs().maxCoeff());
      scale_err = std::max(scale_err, (out.log_scale - in.log_scale).cwiseAbs().maxCoeff());
      op_err = std::max(op_err, std::abs(out.opacity_logit - in.opacity_logit));
      for (size_t j = 0; j < in.sh.size(); ++j) {
        sh_err = std::max(sh_err, std::abs(out.sh[j] - in.sh[j]));
      }
      const Vec4 qin(in.rotation.w, in.rotation.x, in.rotation.y, in.rotation.z);
      const Vec4& qraw = dec.raw_rotations[t][i];
      const double direct = (qraw - qin).cwiseAbs().maxCoeff();
      const double mirrored = (qraw + qin).cwiseAbs().maxCoeff();
      rot_err = std::max(rot_err, std::min(direct, mirrored));
    }
  }
  // Motion rides the 11-bit residual fit; appearance bottoms out at the
  // keyframe's 9-bit precision.
  CHECK(pos_err < 1e-4);
  CHECK(rot_err < 1e-3);
  CHECK(scale_err < 1e-3);
  CHECK(op_err < 1.5e-3);
  CHECK(sh_err < 5e-3);

  // Per-group quantization error honors the bound the encoder recorded, and
  // the achieved errors stay far below the data range. (The bound itself can
  // be the 0.5 sentinel when a constant channel degenerates to unit step.)
  for (int g = 0; g < kGroupCount; ++g) {
    CHECK(rep.group_max_error[g] <= rep.group_error_bound[g]);
    CHECK(rep.group_error_bound[g] > 0.0);
    CHECK(rep.group_max_error[g] < 0.01);
  }
}

TEST_CASE("encoded size tracks temporal coherence") {
  // Stronger drift means larger residual variance and never a smaller stream.
  std::array<size_t, 3> sizes{};
  const double amplitudes[3] = {0.0, 0.05, 0.2};
  for (int v = 0; v < 3; ++v) {
    BendFixture fx = make_bend_fixture(800, 12, amplitudes[v]);
    SegmentSizeReport rep;
    encode_segment(fx.frames, fx.ed, fx.motions, BitPolicy{}, &rep);
    sizes[v] = rep.encoded_bytes;
  }
  CHECK(sizes[0] <= sizes[1]);
  CHECK(sizes[1] <= sizes[2]);
}

TEST_CASE("residual coding beats both per-frame ablations on a moving scene") {
  BendFixture fx = make_bend_fixture(1000, 16, 0.1);

  const auto run = [&](const BitPolicy& pol) {
    SegmentSizeReport rep;
    const std::vector<uint8_t> bytes =
        encode_segment(fx.frames, fx.ed,
                       pol.residuals ? fx.motions : std::vector<std::vector<DualQuaternion>>{},
                       pol, &rep);
    const DecodedSegment dec = decode_segment(bytes);
    double pos_err = 0.0, sh_err = 0.0;
    for (size_t t = 0; t < fx.frames.size(); ++t) {
      for (size_t i = 0; i < fx.frames[t].size(); ++i) {
        pos_err = std::max(pos_err, (dec.frames[t].kernels[i].position -
                                     fx.frames[t].kernels[i].position)
                                        .cwiseAbs()
                                        .maxCoeff());
        for (size_t j = 0; j < fx.frames[t].kernels[i].sh.size(); ++j) {
          sh_err = std::max(sh_err, std::abs(dec.frames[t].kernels[i].sh[j] -
                                             fx.frames[t].kernels[i].sh[j]));
        }
      }
    }
    return std::tuple<size_t, double, double>(rep.encoded_bytes, pos_err, sh_err);
  };

  const auto [size_res, pos_res, sh_res] = run(BitPolicy{0, 9, 11, 7, true});
  const auto [size_high, pos_high, sh_high] = run(BitPolicy{0, 9, 0, 9, false});
  const auto [size_low, pos_low, sh_low] = run(BitPolicy{0, 9, 11, 7, false});

  // Size ordering: raw > high-bit per-frame > low-bit per-frame > residual.
  const size_t raw = fx.frames.size() * raw_frame_bytes(1000, 3);
  CHECK(size_high < raw);
  CHECK(size_low < size_high);
  CHECK(size_res < size_low);

  // Quality: the residual scheme matches the high-bit ablation's appearance
  // floor and beats the low-bit ablation everywhere.
  CHECK(pos_res < pos_low);
  CHECK(sh_res < sh_low);
  CHECK(sh_res <= sh_high * 1.05 + 1e-12);
  CHECK(pos_res < 1e-4);
}

TEST_CASE("corrupt containers are rejected with specific diagnostics") {
  BendFixture fx = make_bend_fixture(200, 6, 0.05);
  SegmentSizeReport rep;
  const std::vector<uint8_t> bytes = encode_segment(fx.frames, fx.ed, fx.motions, BitPolicy{}, &rep);
  REQUIRE(decode_segment(bytes).frames.size() == 6);

  SUBCASE("wrong magic") {
    std::vector<uint8_t> bad = bytes;
    bad[0] ^= 0x01;
    CHECK_THROWS_WITH_AS(decode_segment(bad), doctest::Contains("bad magic"), std::runtime_error);
  }

  SUBCASE("unsupported version") {
    std::vector<uint8_t> bad = bytes;
    bad[4] = 2;
    CHECK_THROWS_WITH_AS(decode_segment(bad), doctest::Contains("unsupported version 2"),
                         std::runtime_error);
  }

  SUBCASE("zeroed kernel count") {
    std::vector<uint8_t> bad = bytes;
    for (int i = 8; i < 12; ++i) bad[i] = 0;
    CHECK_THROWS_WITH_AS(decode_segment(bad), doctest::Contains("empty segment header"),
                         std::runtime_error);
  }

  SUBCASE("flipped spec byte fails the header checksum") {
    std::vector<uint8_t> bad = bytes;
    bad[20] ^= 0x10;  // low byte of the first channel's min
    CHECK_THROWS_WITH_AS(decode_segment(bad), doctest::Contains("header checksum mismatch"),
                         std::runtime_error);
  }

  SUBCASE("corrupt ED motion block") {
    std::vector<uint8_t> bad = bytes;
    for (int i = 0; i < 4; ++i) bad[rep.header_bytes + 4 + i] = 0;  // node radius -> 0
    CHECK_THROWS_WITH_AS(decode_segment(bad), doctest::Contains("corrupt ED motion block"),
                         std::runtime_error);
  }

  SUBCASE("payload tamper trips the entropy coder") {
    std::vector<uint8_t> bad = bytes;
    bad[bad.size() - 1] ^= 0x40;
    CHECK_THROWS_WITH_AS(decode_segment(bad), doctest::Contains("rans:"), std::runtime_error);
  }

  SUBCASE("truncation") {
    for (size_t keep : {size_t{2}, size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
      std::vector<uint8_t> bad(bytes.begin(), bytes.begin() + keep);
      CHECK_THROWS_AS(decode_segment(bad), std::runtime_error);
    }
  }

  SUBCASE("trailing bytes") {
    std::vector<uint8_t> bad = bytes;
    bad.push_back(0x5A);
    CHECK_THROWS_WITH_AS(decode_segment(bad), doctest::Contains("trailing bytes"),
                         std::runtime_error);
  }
}

TEST_CASE("encoder validates its inputs") {
  BaseScene base = make_base_scene(BaseShape::kSphere, 120, 7);
  EDGraph ed = sample_ed_nodes(positions_of(base.frame), 0.3);

  CHECK_THROWS_WITH_AS(encode_segment({}, ed, {}, BitPolicy{}), doctest::Contains("no frames"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(encode_segment({FrameState{}}, ed, {}, BitPolicy{}),
                       doctest::Contains("empty keyframe"), std::invalid_argument);

  std::vector<FrameState> frames(3, base.frame);
  frames[2].kernels.pop_back();
  std::vector<std::vector<DualQuaternion>> motions(
      2, std::vector<DualQuaternion>(ed.size(), DualQuaternion::identity()));
  CHECK_THROWS_WITH_AS(encode_segment(frames, ed, motions, BitPolicy{}),
                       doctest::Contains("kernel identity differs"), std::invalid_argument);

  frames[2] = base.frame;
  CHECK_THROWS_WITH_AS(encode_segment(frames, ed, {motions[0]}, BitPolicy{}),
                       doctest::Contains("one ED motion set per non-key frame"),
                       std::invalid_argument);

  motions[1].pop_back();
  CHECK_THROWS_WITH_AS(encode_segment(frames, ed, motions, BitPolicy{}),
                       doctest::Contains("node count differs"), std::invalid_argument);

  BitPolicy wide;
  wide.motion_bits = 17;
  CHECK_THROWS_WITH_AS(encode_segment(frames, ed, motions, wide),
                       doctest::Contains("outside [0, 16]"), std::invalid_argument);
}

TEST_SUITE_END();
