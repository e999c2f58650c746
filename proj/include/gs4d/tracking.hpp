#pragma once

#include <utility>
#include <vector>

#include "gs4d/ed_graph.hpp"
#include "gs4d/gaussian_graph.hpp"
#include "gs4d/types.hpp"

namespace gs4d {

// Point pairs between key space and a target frame. In `given` mode src/tgt are
// parallel arrays; in ICP mode tgt is treated as an unpaired cloud and pairing
// is re-estimated by nearest neighbor each outer iteration. Normals, when
// present, switch the data term to point-to-plane.
struct CorrespondenceSet {
  std::vector<Vec3> src;
  std::vector<Vec3> tgt;
  std::vector<Vec3> normals;

  bool point_to_plane() const { return !normals.empty(); }
};

enum class CorrespondenceMode { kGiven, kNearestNeighborIcp };

struct TrackConfig {
  double lambda_data = 1.0;
  double lambda_reg = 10.0;
  int max_iterations = 20;
  double convergence_tol = 1e-6;
  CorrespondenceMode mode = CorrespondenceMode::kGiven;
};

// Keyframe partition of [0, frame_count). First frame is always a keyframe;
// the last segment may be short.
struct SegmentPlan {
  std::vector<int> keyframes;
  int segment_length = 0;
  int frame_count = 0;

  // Contiguous [begin, end) ranges, one per keyframe.
  std::vector<std::pair<int, int>> segments() const;
};

// Data term of the tracking energy: squared point-to-point (or point-to-plane)
// distance between DQB-warped source points and their targets.
double e_data(const EDGraph& graph, const CorrespondenceSet& corr);

/// ARAP-style regularizer over ED edges: neighbors must agree on each other's
// warped positions. Zero under any global rigid motion.
double e_reg(const EDGraph& graph);

// Gauss-Newton over per-node 6-DoF twists with Levenberg damping on failure.
// Returns the graph with updated node motions; the final tracking energy never
// exceeds the initial one.
EDGraph solve_tracking(const EDGraph& graph, const CorrespondenceSet& corr,
                       const TrackConfig& cfg);

SegmentPlan plan_segments(int frame_count, int segment_length);

}  // namespace gs4d
