#pragma once

#include <vector>

#include "gs4d/camera.hpp"
#include "gs4d/image.hpp"
#include "gs4d/kernel.hpp"
#include "gs4d/rasterizer.hpp"
#include "gs4d/rng.hpp"
#include "gs4d/sampling.hpp"
#include "gs4d/tracking.hpp"
#include "gs4d/types.hpp"

namespace gs4d {

// Closed-form deformation families with analytic Jacobians, used as ground
// truth. Every kind is the identity at t = 0.
enum class FieldKind { kRigid, kBend, kTwist, kRipple, kComposite };

struct DeformationField {
  FieldKind kind = FieldKind::kRigid;
  bool invert = false;          // apply the exact inverse map
  Vec3 axis = Vec3(0, 0, 1);    // rigid rotation axis
  Vec3 origin = Vec3::Zero();   // pivot of the deformation
  double rate = 0.0;            // rad/frame: rigid angle, twist angle per height
  Vec3 velocity = Vec3::Zero(); // rigid translation per frame
  double curvature = 0.0;       // bend curvature per frame (1/length)
  double amplitude = 0.0;       // ripple height
  double wavelength = 1.0;      // ripple spatial wavelength
  double phase_rate = 0.0;      // ripple phase advance per frame
  std::vector<DeformationField> parts;  // composite, applied first to last
};

struct FieldSample {
  Vec3 position;
  Mat3 jacobian;
};

// Deformed position and spatial Jacobian at frame t.
FieldSample eval_field(const DeformationField& field, const Vec3& p, double t);

// Rotation factor of the polar decomposition m = R * S (S symmetric PSD).
Quaternion polar_rotation(const Mat3& m);

// Moves positions through the field and composes each rotation with the
// field's local polar rotation; appearance attributes pass through.
FrameState apply_field(const FrameState& state, const DeformationField& field, int t);

enum class BaseShape { kSphere, kCylinder, kTwoLobe };

struct BaseScene {
  FrameState frame;
  std::vector<Region> labels;
};

// Surface-sampled kernels with tangent-aligned anisotropic scales, DC-dominant
// random SH and opacity logits near +4. Deterministic per seed.
BaseScene make_base_scene(BaseShape shape, size_t kernel_count, uint64_t seed);

// Smooth sinusoidal appearance drift applied on top of a deformed frame.
struct DriftSpec {
  double opacity_amplitude = 0.0;  // logit units
  double sh_amplitude = 0.0;       // DC coefficient units
  double period = 30.0;            // frames per cycle
};

struct SyntheticSequence {
  std::vector<FrameState> frames;  // ground truth, frame 0 is the keyframe
  std::vector<Camera> cameras;
  std::vector<std::vector<Image>> targets;          // [frame][camera]
  std::vector<CorrespondenceSet> correspondences;   // [frame], exact pairs vs frame 0
  std::vector<Region> labels;
};

SyntheticSequence make_sequence(const BaseScene& base, const DeformationField& field,
                                int frame_count, int camera_count, int image_size,
                                const DriftSpec& drift, const RasterConfig& raster);

}  // namespace gs4d
