#pragma once

#include <string>
#include <vector>

#include "gs4d/camera.hpp"
#include "gs4d/ed_graph.hpp"
#include "gs4d/kernel.hpp"
#include "gs4d/sampling.hpp"
#include "gs4d/tracking.hpp"
#include "gs4d/types.hpp"

namespace gs4d {

// On-disk artifacts shared by the CLI commands. Every binary format is
// little-endian with 32-bit float payloads; doubles exist only in memory.

// Gaussian frame file ("GSFR"): u32 version, u32 kernel count, u8 SH degree,
// then one contiguous f32 array per attribute in the order p(3), q(4), s(3),
// opacity(1), SH(3*(L+1)^2); each array is kernel-major. Quaternions are
// stored (w, x, y, z) exactly as held in memory, without renormalization.
void save_frame(const FrameState& frame, const std::string& path);
FrameState load_frame(const std::string& path);

// Camera rig as JSON: intrinsics, image size, and the world-to-camera
// transform as a (w, x, y, z) quaternion plus translation.
void save_cameras(const std::vector<Camera>& cameras, const std::string& path);
std::vector<Camera> load_cameras(const std::string& path);

// Correspondence pairs ("GSCR"): u32 version, u32 count, u8 has_normals,
// then f32 src xyz, f32 tgt xyz, and f32 normals xyz when the flag is set.
void save_correspondences(const CorrespondenceSet& corr, const std::string& path);
CorrespondenceSet load_correspondences(const std::string& path);

// Region labels: text file, one of body/hand/face per line.
void save_labels(const std::vector<Region>& labels, const std::string& path);
std::vector<Region> load_labels(const std::string& path);

// ED graph rest state ("GSED"): u32 version, u32 node count, f32 node radius,
// node positions, then per-node adjacency as u32 degree + u32 neighbor ids.
void save_ed_graph(const EDGraph& graph, const std::string& path);
EDGraph load_ed_graph(const std::string& path);

// Per-frame ED motion ("GSMO"): u32 version, u32 node count, u32 record
// count, then record-major (real wxyz, dual wxyz) f32 pairs per node. Records
// cover the frames after the segment key, in frame order.
void save_ed_motion(const std::vector<std::vector<DualQuaternion>>& motions,
                    const std::string& path);
std::vector<std::vector<DualQuaternion>> load_ed_motion(const std::string& path);

}  // namespace gs4d
