// Command-line driver for the 4D Gaussian toolkit: synthesizes desk-scale
// sequences with ground truth, tracks coarse non-rigid motion, warps and
// refines per-frame kernels, runs the segment codec end to end, and reports
// image quality and storage.
//
// Exit codes: 0 success, 2 input error, 3 numeric failure, 4 stream
// corruption. Every command is deterministic given config + seed, independent
// of thread count; wall times are printed to stdout and never written into
// report files.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gs4d/codec.hpp"
#include "gs4d/config.hpp"
#include "gs4d/ed_graph.hpp"
#include "gs4d/energy.hpp"
#include "gs4d/frame_io.hpp"
#include "gs4d/gaussian_graph.hpp"
#include "gs4d/image.hpp"
#include "gs4d/optimizer.hpp"
#include "gs4d/rasterizer.hpp"
#include "gs4d/synth.hpp"
#include "gs4d/tracking.hpp"

namespace fs = std::filesystem;

namespace gs4d {
namespace {

// Failure classes behind the exit-code contract. Anything reaching main
// uncaught is treated as an input error.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StreamError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Small shared helpers.

std::string frame_name(int t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%04d.gsfr", t);
  return buf;
}

std::string corr_name(int t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%04d.gscr", t);
  return buf;
}

std::string target_stem(int t, int c) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "frame_%04d_cam_%02d", t, c);
  return buf;
}

std::string segment_name(int s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "segment_%04d.gs4d", s);
  return buf;
}

std::string segment_dir_name(int s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "segment_%04d", s);
  return buf;
}

// Shortest round-trip decimal form, the same convention the config format
// uses, so report files are byte-stable across reruns.
std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void print_step_time(const std::string& label, std::chrono::steady_clock::time_point t0) {
  std::printf("[time] %s: %.3f s\n", label.c_str(), seconds_since(t0));
}

void require(bool ok, const std::string& message) {
  if (!ok) throw InputError(message);
}

void require_exists(const fs::path& p, const std::string& what) {
  require(fs::exists(p), what + " not found: " + p.string());
}

std::ofstream open_report(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open report for writing: " + path.string());
  return out;
}

std::vector<uint8_t> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot open " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return bytes;
}

void write_file_bytes(const fs::path& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("write failed for " + path.string());
}

const char* group_name(int g) {
  switch (static_cast<AttrGroup>(g)) {
    case AttrGroup::kPosition: return "position";
    case AttrGroup::kRotation: return "rotation";
    case AttrGroup::kScale: return "scale";
    case AttrGroup::kOpacity: return "opacity";
    case AttrGroup::kSh: return "sh";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Config resolution: explicit --config, else the config.cfg saved next to the
// input artifacts, else compiled-in defaults; command-line overrides win last.
// Every command reverifies the merged result through the text parser so flag
// values obey the same range checks as file values.

struct Overrides {
  std::optional<uint64_t> seed;
  std::optional<int> kernel_count, frame_count, camera_count, image_size;
  std::optional<std::string> shape, field;
  std::optional<double> field_strength, drift_opacity, drift_sh;
  std::optional<int> drift_period;
  std::optional<double> ed_spacing;
  std::optional<int> track_iterations, iterations, segment_length;
  std::optional<int> key_motion_bits, key_appearance_bits, motion_bits, appearance_bits;
  bool no_residual = false;
};

void add_override_flags(CLI::App* sub, Overrides& ov) {
  sub->add_option("--seed", ov.seed, "RNG seed override");
  sub->add_option("--kernel-count", ov.kernel_count, "kernel count override");
  sub->add_option("--frame-count", ov.frame_count, "frame count override");
  sub->add_option("--camera-count", ov.camera_count, "camera count override");
  sub->add_option("--image-size", ov.image_size, "target image size override");
  sub->add_option("--shape", ov.shape, "base shape: sphere|cylinder|two_lobe");
  sub->add_option("--field", ov.field, "deformation: rigid|bend|twist|ripple");
  sub->add_option("--field-strength", ov.field_strength, "per-frame field strength");
  sub->add_option("--drift-opacity", ov.drift_opacity, "opacity drift amplitude");
  sub->add_option("--drift-sh", ov.drift_sh, "SH DC drift amplitude");
  sub->add_option("--drift-period", ov.drift_period, "drift period in frames");
  sub->add_option("--ed-spacing", ov.ed_spacing, "ED node spacing override");
  sub->add_option("--track-iterations", ov.track_iterations, "tracking iteration cap");
  sub->add_option("--iterations", ov.iterations, "per-frame optimizer iterations");
  sub->add_option("--segment-length", ov.segment_length, "frames per key volume");
  sub->add_option("--key-motion-bits", ov.key_motion_bits, "keyframe motion bits (0 = raw)");
  sub->add_option("--key-appearance-bits", ov.key_appearance_bits, "keyframe appearance bits");
  sub->add_option("--motion-bits", ov.motion_bits, "non-key motion bits");
  sub->add_option("--appearance-bits", ov.appearance_bits, "non-key appearance bits");
  sub->add_flag("--no-residual", ov.no_residual,
                "quantize raw attributes instead of residuals (ablation mode)");
}

void apply_overrides(PipelineConfig& cfg, const Overrides& ov) {
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.kernel_count) cfg.kernel_count = *ov.kernel_count;
  if (ov.frame_count) cfg.frame_count = *ov.frame_count;
  if (ov.camera_count) cfg.camera_count = *ov.camera_count;
  if (ov.image_size) cfg.image_size = *ov.image_size;
  if (ov.shape) cfg.shape = *ov.shape;
  if (ov.field) cfg.field = *ov.field;
  if (ov.field_strength) cfg.field_strength = *ov.field_strength;
  if (ov.drift_opacity) cfg.drift_opacity = *ov.drift_opacity;
  if (ov.drift_sh) cfg.drift_sh = *ov.drift_sh;
  if (ov.drift_period) cfg.drift_period = *ov.drift_period;
  if (ov.ed_spacing) cfg.ed_spacing = *ov.ed_spacing;
  if (ov.track_iterations) cfg.track_iterations = *ov.track_iterations;
  if (ov.iterations) cfg.iterations = *ov.iterations;
  if (ov.segment_length) cfg.segment_length = *ov.segment_length;
  if (ov.key_motion_bits) cfg.key_motion_bits = *ov.key_motion_bits;
  if (ov.key_appearance_bits) cfg.key_appearance_bits = *ov.key_appearance_bits;
  if (ov.motion_bits) cfg.motion_bits = *ov.motion_bits;
  if (ov.appearance_bits) cfg.appearance_bits = *ov.appearance_bits;
  if (ov.no_residual) cfg.residuals = false;
}

PipelineConfig resolve_config(const std::string& config_path, const fs::path& search_dir,
                              const Overrides& ov) {
  PipelineConfig cfg;
  if (!config_path.empty()) {
    require_exists(config_path, "config file");
    cfg = load_config(config_path);
  } else if (!search_dir.empty() && fs::exists(search_dir / "config.cfg")) {
    cfg = load_config((search_dir / "config.cfg").string());
  }
  apply_overrides(cfg, ov);
  // Round-trip through the text form so overrides hit the same range checks
  // as file values.
  try {
    cfg = parse_config_text(config_to_text(cfg));
  } catch (const std::exception& e) {
    throw InputError(std::string("invalid configuration: ") + e.what());
  }
  return cfg;
}

BaseShape shape_from_name(const std::string& name) {
  if (name == "sphere") return BaseShape::kSphere;
  if (name == "cylinder") return BaseShape::kCylinder;
  if (name == "two_lobe") return BaseShape::kTwoLobe;
  throw InputError("unknown shape '" + name + "'");
}

// Deformation family selected by the config. Strength is per frame: radians
// for rigid, curvature for bend, radians per unit height for twist, world
// units of amplitude for ripple. Secondary ripple constants are fixed so a
// single knob controls the sweep.
DeformationField field_from_config(const PipelineConfig& cfg) {
  DeformationField f;
  if (cfg.field == "rigid") {
    f.kind = FieldKind::kRigid;
    f.axis = Vec3(0, 0, 1);
    f.rate = cfg.field_strength;
  } else if (cfg.field == "bend") {
    f.kind = FieldKind::kBend;
    f.curvature = cfg.field_strength;
  } else if (cfg.field == "twist") {
    f.kind = FieldKind::kTwist;
    f.rate = cfg.field_strength;
  } else if (cfg.field == "ripple") {
    f.kind = FieldKind::kRipple;
    f.amplitude = cfg.field_strength;
    f.wavelength = 0.8;
    f.phase_rate = 0.3;
  } else {
    throw InputError("unknown field '" + cfg.field + "'");
  }
  return f;
}

std::vector<Vec3> positions_of(const FrameState& frame) {
  std::vector<Vec3> p(frame.size());
  for (size_t i = 0; i < frame.size(); ++i) p[i] = frame.kernels[i].position;
  return p;
}

// Targets are read from the lossless raw images; the PNGs exist for viewing.
Image load_target(const fs::path& targets_dir, int t, int c) {
  const fs::path raw = targets_dir / (target_stem(t, c) + ".gsrw");
  require_exists(raw, "target image");
  return read_raw_image(raw.string());
}

std::vector<Camera> load_rig(const fs::path& path) {
  require_exists(path, "camera file");
  return load_cameras(path.string());
}

// Frames named frame_%04d.gsfr in ascending index order, with the parsed
// global frame index alongside each path.
std::vector<std::pair<int, fs::path>> list_frames(const fs::path& dir) {
  require_exists(dir, "frame directory");
  std::vector<std::pair<int, fs::path>> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".gsfr") continue;
    const std::string stem = entry.path().stem().string();
    if (stem.rfind("frame_", 0) != 0) continue;
    int t = -1;
    try {
      t = std::stoi(stem.substr(6));
    } catch (...) {
      continue;
    }
    out.emplace_back(t, entry.path());
  }
  require(!out.empty(), "no frame_*.gsfr files in " + dir.string());
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// synth: ground-truth sequence + targets + correspondences + manifest.

struct IoArgs {
  std::string config;
  std::string out;
  int threads = 0;
};

int cmd_config_init(const std::string& out) {
  const PipelineConfig cfg;
  if (out.empty()) {
    std::cout << config_to_text(cfg);
  } else {
    save_config(cfg, out);
    std::printf("wrote %s\n", out.c_str());
  }
  return 0;
}

int cmd_synth(const IoArgs& a, const Overrides& ov) {
  const auto t0 = std::chrono::steady_clock::now();
  const PipelineConfig cfg = resolve_config(a.config, "", ov);
  const fs::path out = a.out;
  fs::create_directories(out / "frames");
  fs::create_directories(out / "targets");
  fs::create_directories(out / "corr");

  BaseScene base = make_base_scene(shape_from_name(cfg.shape),
                                   static_cast<size_t>(cfg.kernel_count), cfg.seed);
  const DeformationField field = field_from_config(cfg);
  const DriftSpec drift{cfg.drift_opacity, cfg.drift_sh, static_cast<double>(cfg.drift_period)};
  RasterConfig raster;
  raster.threads = a.threads;
  SyntheticSequence seq = make_sequence(base, field, cfg.frame_count, cfg.camera_count,
                                        cfg.image_size, drift, raster);

  save_config(cfg, (out / "config.cfg").string());
  save_cameras(seq.cameras, (out / "cameras.json").string());
  save_labels(seq.labels, (out / "labels.txt").string());
  for (int t = 0; t < cfg.frame_count; ++t) {
    save_frame(seq.frames[t], (out / "frames" / frame_name(t)).string());
    for (int c = 0; c < cfg.camera_count; ++c) {
      const std::string stem = (out / "targets" / target_stem(t, c)).string();
      write_png(stem + ".png", seq.targets[t][c]);
      write_raw_image(stem + ".gsrw", seq.targets[t][c]);
    }
    if (t > 0) save_correspondences(seq.correspondences[t], (out / "corr" / corr_name(t)).string());
  }

  nlohmann::ordered_json manifest;
  manifest["format_version"] = 1;
  manifest["seed"] = cfg.seed;
  manifest["kernel_count"] = seq.frames[0].size();
  manifest["frame_count"] = cfg.frame_count;
  manifest["camera_count"] = cfg.camera_count;
  manifest["image_size"] = cfg.image_size;
  manifest["sh_degree"] = seq.frames[0].sh_degree();
  manifest["shape"] = cfg.shape;
  manifest["field"] = cfg.field;
  manifest["field_strength"] = cfg.field_strength;
  manifest["drift_opacity"] = cfg.drift_opacity;
  manifest["drift_sh"] = cfg.drift_sh;
  manifest["drift_period"] = cfg.drift_period;
  manifest["files"] = {{"config", "config.cfg"},
                       {"cameras", "cameras.json"},
                       {"labels", "labels.txt"},
                       {"frames", "frames/frame_%04d.gsfr"},
                       {"targets", "targets/frame_%04d_cam_%02d.{png,gsrw}"},
                       {"correspondences", "corr/frame_%04d.gscr"}};
  std::ofstream mf(out / "manifest.json", std::ios::binary);
  require(static_cast<bool>(mf), "cannot write manifest.json");
  mf << manifest.dump(2) << "\n";

  std::printf("synth: %zu kernels, %d frames, %d cameras at %dx%d -> %s\n",
              seq.frames[0].size(), cfg.frame_count, cfg.camera_count, cfg.image_size,
              cfg.image_size, out.string().c_str());
  print_step_time("synth", t0);
  return 0;
}

// ---------------------------------------------------------------------------
// track: per-segment ED graph + per-frame node motions.

struct TrackArgs {
  std::string seq, out, config;
};

int cmd_track(const TrackArgs& a, const Overrides& ov) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path seq = a.seq;
  require_exists(seq / "frames", "sequence frames");
  const PipelineConfig cfg = resolve_config(a.config, seq, ov);
  const fs::path out = a.out;
  fs::create_directories(out);
  save_config(cfg, (out / "config.cfg").string());

  const SegmentPlan plan = plan_segments(cfg.frame_count, cfg.segment_length);
  std::ofstream report = open_report(out / "report.csv");
  report << "segment,frame,e_data,e_reg,rms\n";

  const TrackConfig tcfg = cfg.track_config();
  int segment_index = 0;
  for (const auto& [begin, end] : plan.segments()) {
    const fs::path seg_dir = out / segment_dir_name(segment_index);
    fs::create_directories(seg_dir);
    const FrameState key = load_frame((seq / "frames" / frame_name(begin)).string());
    EDGraph ed = sample_ed_nodes(positions_of(key), cfg.ed_spacing);
    save_ed_graph(ed, (seg_dir / "graph.gsed").string());

    // Key-space source points: kernel positions at the segment key. For later
    // segments the stored pair targets at the key frame are exactly those.
    std::vector<Vec3> key_src;
    if (begin == 0) {
      key_src = positions_of(key);
    } else {
      const fs::path key_corr = seq / "corr" / corr_name(begin);
      require_exists(key_corr, "correspondence file");
      key_src = load_correspondences(key_corr.string()).tgt;
    }

    std::vector<std::vector<DualQuaternion>> motions;
    EDGraph warm = ed;  // motions carry over frame to frame within a segment
    for (int t = begin + 1; t < end; ++t) {
      const fs::path corr_path = seq / "corr" / corr_name(t);
      require_exists(corr_path, "correspondence file");
      CorrespondenceSet corr;
      corr.tgt = load_correspondences(corr_path.string()).tgt;
      corr.src = key_src;
      require(corr.src.size() == corr.tgt.size(),
              "correspondence count mismatch at frame " + std::to_string(t));
      warm = solve_tracking(warm, corr, tcfg);
      const double data = e_data(warm, corr);
      const double reg = e_reg(warm);
      if (!std::isfinite(data) || !std::isfinite(reg)) {
        throw NumericError("non-finite tracking energy at frame " + std::to_string(t));
      }
      const double rms = std::sqrt(data / static_cast<double>(corr.src.size()));
      report << segment_index << "," << t << "," << fmt_double(data) << "," << fmt_double(reg)
             << "," << fmt_double(rms) << "\n";
      std::vector<DualQuaternion> dqs(warm.size());
      for (size_t i = 0; i < warm.size(); ++i) dqs[i] = warm.nodes[i].dq;
      motions.push_back(std::move(dqs));
    }
    save_ed_motion(motions, (seg_dir / "motion.gsmo").string());
    std::printf("track: segment %d frames [%d,%d) with %zu nodes\n", segment_index, begin, end,
                ed.size());
    ++segment_index;
  }
  print_step_time("track", t0);
  return 0;
}

// ---------------------------------------------------------------------------
// warp: deform each segment key through its tracked motions.

struct WarpArgs {
  std::string seq, track, out, config;
};

int cmd_warp(const WarpArgs& a, const Overrides& ov) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path seq = a.seq, track = a.track, out = a.out;
  require_exists(seq / "frames", "sequence frames");
  require_exists(track, "tracking directory");
  const PipelineConfig cfg = resolve_config(a.config, track, ov);
  fs::create_directories(out / "frames");
  save_config(cfg, (out / "config.cfg").string());

  std::ofstream report = open_report(out / "report.csv");
  report << "frame,mean_displacement,max_displacement\n";

  const SegmentPlan plan = plan_segments(cfg.frame_count, cfg.segment_length);
  int segment_index = 0;
  for (const auto& [begin, end] : plan.segments()) {
    const fs::path seg_dir = track / segment_dir_name(segment_index);
    require_exists(seg_dir / "graph.gsed", "tracked graph");
    require_exists(seg_dir / "motion.gsmo", "tracked motion");
    const FrameState key = load_frame((seq / "frames" / frame_name(begin)).string());
    EDGraph ed = load_ed_graph((seg_dir / "graph.gsed").string());
    const auto motions = load_ed_motion((seg_dir / "motion.gsmo").string());
    require(static_cast<int>(motions.size()) == end - begin - 1,
            "motion record count mismatch in " + (seg_dir / "motion.gsmo").string());
    const GaussianGraph graph = build_gaussian_graph(key, ed);

    // The key frame passes through unchanged (identity motion).
    save_frame(key, (out / "frames" / frame_name(begin)).string());
    report << begin << ",0,0\n";
    for (int t = begin + 1; t < end; ++t) {
      const auto& dqs = motions[t - begin - 1];
      require(dqs.size() == ed.size(),
              "motion node count mismatch at frame " + std::to_string(t));
      for (size_t i = 0; i < ed.size(); ++i) ed.nodes[i].dq = dqs[i];
      const FrameState warped = warp_frame(key, graph, ed, t);
      double mean = 0.0, peak = 0.0;
      for (size_t i = 0; i < warped.size(); ++i) {
        const double d = (warped.kernels[i].position - key.kernels[i].position).norm();
        mean += d;
        peak = std::max(peak, d);
      }
      mean /= static_cast<double>(warped.size());
      save_frame(warped, (out / "frames" / frame_name(t)).string());
      report << t << "," << fmt_double(mean) << "," << fmt_double(peak) << "\n";
    }
    ++segment_index;
  }
  print_step_time("warp", t0);
  return 0;
}

// ---------------------------------------------------------------------------
// optimize: refine warped predictions against the target images.

struct OptimizeArgs {
  std::string seq, warp, out, config;
  int threads = 0;
};

int cmd_optimize(const OptimizeArgs& a, const Overrides& ov) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path seq = a.seq, warp_dir = a.warp, out = a.out;
  require_exists(seq / "frames", "sequence frames");
  require_exists(seq / "targets", "target images");
  require_exists(warp_dir / "frames", "warped frames");
  const PipelineConfig cfg = resolve_config(a.config, warp_dir, ov);
  fs::create_directories(out / "frames");
  save_config(cfg, (out / "config.cfg").string());

  const std::vector<Camera> cameras = load_rig(seq / "cameras.json");
  const EnergyWeights weights = cfg.energy_weights();
  OptimizeConfig ocfg = cfg.optimize_config();
  ocfg.raster.threads = a.threads;

  std::ofstream report = open_report(out / "report.csv");
  report << "frame,init_energy,best_energy,best_iteration";
  for (size_t c = 0; c < cameras.size(); ++c) {
    char col[24];
    std::snprintf(col, sizeof col, ",psnr_cam_%02zu", c);
    report << col;
  }
  report << "\n";
  std::ofstream energy_log = open_report(out / "energy.csv");
  energy_log << "frame,iteration,total,temp,smooth,color\n";

  const SegmentPlan plan = plan_segments(cfg.frame_count, cfg.segment_length);
  for (const auto& [begin, end] : plan.segments()) {
    const FrameState key = load_frame((seq / "frames" / frame_name(begin)).string());
    const EDGraph ed = sample_ed_nodes(positions_of(key), cfg.ed_spacing);
    const GaussianGraph graph = build_gaussian_graph(key, ed);

    // The segment key is taken as given; refinement starts at the first
    // warped frame and chains forward.
    save_frame(key, (out / "frames" / frame_name(begin)).string());
    FrameState prev = key;
    std::vector<Vec3> warped_prev = positions_of(key);
    for (int t = begin + 1; t < end; ++t) {
      const FrameState init = load_frame((warp_dir / "frames" / frame_name(t)).string());
      std::vector<Image> targets;
      targets.reserve(cameras.size());
      for (size_t c = 0; c < cameras.size(); ++c) {
        targets.push_back(load_target(seq / "targets", t, static_cast<int>(c)));
      }
      OptimizeReport orep;
      const std::vector<Vec3> warped_cur = positions_of(init);
      const FrameState best =
          optimize_frame(init, prev, graph, cameras, targets, weights, ocfg, &warped_prev, &orep);
      for (size_t it = 0; it < orep.history.size(); ++it) {
        const EnergyBreakdown& e = orep.history[it];
        if (!std::isfinite(e.total)) {
          throw NumericError("non-finite energy at frame " + std::to_string(t) + ", iteration " +
                             std::to_string(it));
        }
        energy_log << t << "," << it << "," << fmt_double(e.total) << "," << fmt_double(e.temp)
                   << "," << fmt_double(e.smooth) << "," << fmt_double(e.color) << "\n";
      }
      save_frame(best, (out / "frames" / frame_name(t)).string());
      report << t << "," << fmt_double(orep.history.front().total) << ","
             << fmt_double(orep.best_energy) << "," << orep.best_iteration;
      for (size_t c = 0; c < cameras.size(); ++c) {
        const Image rendered = rasterize(best.kernels, cameras[c], ocfg.raster);
        report << "," << fmt_double(psnr(rendered, targets[c]));
      }
      report << "\n";
      std::printf("optimize: frame %d energy %.6g -> %.6g (best at %d)\n", t,
                  orep.history.front().total, orep.best_energy, orep.best_iteration);
      prev = best;
      warped_prev = warped_cur;
    }
  }
  print_step_time("optimize", t0);
  return 0;
}

// ---------------------------------------------------------------------------
// encode: one container per segment plus the size/ablation report, with an
// in-process decode verification of the quantization error bounds.

struct EncodeArgs {
  std::string frames, track, out, config;
};

int cmd_encode(const EncodeArgs& a, const Overrides& ov) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path frames_dir = a.frames, track = a.track, out = a.out;
  require_exists(frames_dir, "frame directory");
  require_exists(track, "tracking directory");
  const PipelineConfig cfg = resolve_config(
      a.config, fs::exists(frames_dir / "config.cfg") ? frames_dir : frames_dir.parent_path(), ov);
  fs::create_directories(out);
  save_config(cfg, (out / "config.cfg").string());

  std::ofstream report = open_report(out / "report.csv");
  report << "segment,first_frame,frame_count,raw_bytes,encoded_bytes,ratio,header_bytes,"
            "ed_bytes,keyframe_bytes,position_bytes,rotation_bytes,scale_bytes,opacity_bytes,"
            "sh_bytes\n";

  const BitPolicy policy = cfg.bit_policy();
  const SegmentPlan plan = plan_segments(cfg.frame_count, cfg.segment_length);
  size_t total_raw = 0, total_encoded = 0;
  int segment_index = 0;
  for (const auto& [begin, end] : plan.segments()) {
    std::vector<FrameState> frames;
    frames.reserve(end - begin);
    for (int t = begin; t < end; ++t) {
      const fs::path p = frames_dir / frame_name(t);
      require_exists(p, "frame file");
      frames.push_back(load_frame(p.string()));
    }
    const fs::path seg_dir = track / segment_dir_name(segment_index);
    require_exists(seg_dir / "graph.gsed", "tracked graph");
    require_exists(seg_dir / "motion.gsmo", "tracked motion");
    const EDGraph ed = load_ed_graph((seg_dir / "graph.gsed").string());
    const auto motions = load_ed_motion((seg_dir / "motion.gsmo").string());

    SegmentSizeReport rep;
    const std::vector<uint8_t> bytes = encode_segment(frames, ed, motions, policy, &rep);
    write_file_bytes(out / segment_name(segment_index), bytes);

    // Decode verification: the stream must parse, and the quantization error
    // recorded per attribute group must sit within its a-priori bound
    // (step/2 for fitted channels, see the container notes).
    DecodedSegment dec;
    try {
      dec = decode_segment(bytes);
    } catch (const std::exception& e) {
      throw StreamError(std::string("verify failed for ") + segment_name(segment_index) + ": " +
                        e.what());
    }
    require(dec.frames.size() == frames.size(), "verify: frame count mismatch");
    for (int g = 0; g < kGroupCount; ++g) {
      std::printf("verify: segment %d %-8s max_error %.3e bound %.3e\n", segment_index,
                  group_name(g), rep.group_max_error[g], rep.group_error_bound[g]);
      if (!(rep.group_max_error[g] <= rep.group_error_bound[g])) {
        throw NumericError(std::string("quantization error exceeds bound for group ") +
                           group_name(g) + " in segment " + std::to_string(segment_index));
      }
    }

    report << segment_index << "," << begin << "," << (end - begin) << "," << rep.raw_bytes << ","
           << rep.encoded_bytes << "," << fmt_double(rep.ratio()) << "," << rep.header_bytes << ","
           << rep.ed_block_bytes << "," << rep.keyframe_bytes;
    for (int g = 0; g < kGroupCount; ++g) report << "," << rep.group_bytes[g];
    report << "\n";
    std::printf("encode: segment %d raw %zu -> %zu bytes (%.2fx)\n", segment_index, rep.raw_bytes,
                rep.encoded_bytes, rep.ratio());
    total_raw += rep.raw_bytes;
    total_encoded += rep.encoded_bytes;
    ++segment_index;
  }
  std::printf("encode: total raw %zu -> %zu bytes (%.2fx), residuals %s\n", total_raw,
              total_encoded, static_cast<double>(total_raw) / static_cast<double>(total_encoded),
              policy.residuals ? "on" : "off");
  print_step_time("encode", t0);
  return 0;
}

// ---------------------------------------------------------------------------
// decode: reconstruct frames from segment containers. Frame numbering is the
// cumulative frame count over segment files in name order.

struct DecodeArgs {
  std::string in, out;
};

int cmd_decode(const DecodeArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path in = a.in, out = a.out;
  std::vector<fs::path> streams;
  if (fs::is_directory(in)) {
    for (const auto& entry : fs::directory_iterator(in)) {
      if (entry.path().extension() == ".gs4d") streams.push_back(entry.path());
    }
    std::sort(streams.begin(), streams.end());
    require(!streams.empty(), "no *.gs4d segments in " + in.string());
  } else {
    require_exists(in, "encoded stream");
    streams.push_back(in);
  }
  fs::create_directories(out / "frames");

  int first_frame = 0;
  for (const fs::path& path : streams) {
    DecodedSegment dec;
    try {
      dec = decode_segment(read_file_bytes(path));
    } catch (const InputError&) {
      throw;
    } catch (const std::exception& e) {
      throw StreamError(path.filename().string() + ": " + e.what());
    }
    for (size_t t = 0; t < dec.frames.size(); ++t) {
      FrameState frame = dec.frames[t];
      frame.frame_index = first_frame + static_cast<int>(t);
      // Persist the exact stored rotations; renormalization is a render-time
      // concern and would break byte-level reproducibility checks.
      for (size_t i = 0; i < frame.size(); ++i) {
        const Vec4& q = dec.raw_rotations[t][i];
        frame.kernels[i].rotation = Quaternion(q[0], q[1], q[2], q[3]);
      }
      save_frame(frame, (out / "frames" / frame_name(frame.frame_index)).string());
    }
    std::printf("decode: %s -> frames [%d,%d)\n", path.filename().string().c_str(), first_frame,
                first_frame + static_cast<int>(dec.frames.size()));
    first_frame += static_cast<int>(dec.frames.size());
  }
  print_step_time("decode", t0);
  return 0;
}

// ---------------------------------------------------------------------------
// render: rasterize any frame set from any camera rig.

struct RenderArgs {
  std::string frames, cameras, out;
  int threads = 0;
};

int cmd_render(const RenderArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<Camera> cameras = load_rig(a.cameras);
  const auto frames = list_frames(a.frames);
  fs::create_directories(a.out);
  RasterConfig raster;
  raster.threads = a.threads;
  for (const auto& [t, path] : frames) {
    const FrameState frame = load_frame(path.string());
    for (size_t c = 0; c < cameras.size(); ++c) {
      const Image img = rasterize(frame.kernels, cameras[c], raster);
      const std::string stem = (fs::path(a.out) / target_stem(t, static_cast<int>(c))).string();
      write_png(stem + ".png", img);
      write_raw_image(stem + ".gsrw", img);
    }
  }
  std::printf("render: %zu frames x %zu cameras -> %s\n", frames.size(), cameras.size(),
              a.out.c_str());
  print_step_time("render", t0);
  return 0;
}

// ---------------------------------------------------------------------------
// stats: PSNR per frame per camera plus raw storage per frame.
//
// CSV schema (fixed): frame,camera,psnr_db,frame_bytes
//   frame        global frame index
//   camera       camera index; -1 with an empty psnr_db when no targets given
//   psnr_db      PSNR of the frame rendered from that camera vs the target
//   frame_bytes  raw 32-bit storage of the frame (59 floats per kernel at SH3)

struct StatsArgs {
  std::string frames, targets, cameras, out;
  int threads = 0;
};

int cmd_stats(const StatsArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto frames = list_frames(a.frames);
  require(a.targets.empty() == a.cameras.empty(),
          "--targets and --cameras must be given together");
  std::vector<Camera> cameras;
  if (!a.cameras.empty()) cameras = load_rig(a.cameras);
  RasterConfig raster;
  raster.threads = a.threads;

  std::ofstream report = open_report(a.out);
  report << "frame,camera,psnr_db,frame_bytes\n";
  double psnr_sum = 0.0;
  size_t psnr_count = 0;
  for (const auto& [t, path] : frames) {
    const FrameState frame = load_frame(path.string());
    const size_t bytes = raw_frame_bytes(frame.size(), frame.sh_degree());
    if (cameras.empty()) {
      report << t << ",-1,," << bytes << "\n";
      continue;
    }
    for (size_t c = 0; c < cameras.size(); ++c) {
      const Image rendered = rasterize(frame.kernels, cameras[c], raster);
      const Image target = load_target(a.targets, t, static_cast<int>(c));
      require(target.width == rendered.width && target.height == rendered.height,
              "target size mismatch at " + target_stem(t, static_cast<int>(c)));
      const double db = psnr(rendered, target);
      psnr_sum += db;
      ++psnr_count;
      report << t << "," << c << "," << fmt_double(db) << "," << bytes << "\n";
    }
  }
  if (psnr_count > 0) {
    std::printf("stats: mean PSNR %.3f dB over %zu images -> %s\n", psnr_sum / psnr_count,
                psnr_count, a.out.c_str());
  } else {
    std::printf("stats: storage-only report for %zu frames -> %s\n", frames.size(),
                a.out.c_str());
  }
  print_step_time("stats", t0);
  return 0;
}

// ---------------------------------------------------------------------------
// pipeline: synth -> track -> warp -> optimize -> encode -> decode -> stats.

struct PipelineArgs {
  std::string config, out;
  int threads = 0;
};

int cmd_pipeline(const PipelineArgs& a, const Overrides& ov) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path root = a.out;
  fs::create_directories(root);
  const fs::path seq = root / "seq";

  IoArgs synth_args{a.config, seq.string(), a.threads};
  cmd_synth(synth_args, ov);
  // Downstream steps read the sequence's saved config; overrides are already
  // baked into it.
  const Overrides none;
  cmd_track(TrackArgs{seq.string(), (root / "track").string(), ""}, none);
  cmd_warp(WarpArgs{seq.string(), (root / "track").string(), (root / "warp").string(), ""}, none);
  cmd_optimize(
      OptimizeArgs{seq.string(), (root / "warp").string(), (root / "opt").string(), "", a.threads},
      none);
  cmd_encode(EncodeArgs{(root / "opt" / "frames").string(), (root / "track").string(),
                        (root / "enc").string(), ""},
             none);
  cmd_decode(DecodeArgs{(root / "enc").string(), (root / "dec").string()});
  cmd_stats(StatsArgs{(root / "dec" / "frames").string(), (seq / "targets").string(),
                      (seq / "cameras.json").string(), (root / "stats.csv").string(), a.threads});
  print_step_time("pipeline", t0);
  return 0;
}

}  // namespace
}  // namespace gs4d

int main(int argc, char** argv) {
  using namespace gs4d;
  CLI::App app{"4D Gaussian sequence toolkit"};
  app.require_subcommand(1);

  // config init
  CLI::App* config_cmd = app.add_subcommand("config", "configuration utilities");
  config_cmd->require_subcommand(1);
  std::string config_out;
  CLI::App* config_init = config_cmd->add_subcommand("init", "emit the default configuration");
  config_init->add_option("--out,-o", config_out, "output path (stdout when omitted)");

  Overrides ov;
  IoArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic ground-truth sequence");
  synth->add_option("--config,-c", synth_args.config, "configuration file");
  synth->add_option("--out,-o", synth_args.out, "sequence output directory")->required();
  synth->add_option("--threads", synth_args.threads, "worker threads (0 = auto)");
  add_override_flags(synth, ov);

  TrackArgs track_args;
  CLI::App* track = app.add_subcommand("track", "estimate per-segment ED node motion");
  track->add_option("--seq,-s", track_args.seq, "sequence directory")->required();
  track->add_option("--out,-o", track_args.out, "tracking output directory")->required();
  track->add_option("--config,-c", track_args.config, "configuration file");
  add_override_flags(track, ov);

  WarpArgs warp_args;
  CLI::App* warp = app.add_subcommand("warp", "warp segment keys through tracked motion");
  warp->add_option("--seq,-s", warp_args.seq, "sequence directory")->required();
  warp->add_option("--track,-t", warp_args.track, "tracking directory")->required();
  warp->add_option("--out,-o", warp_args.out, "warp output directory")->required();
  warp->add_option("--config,-c", warp_args.config, "configuration file");
  add_override_flags(warp, ov);

  OptimizeArgs opt_args;
  CLI::App* optimize = app.add_subcommand("optimize", "refine warped frames against targets");
  optimize->add_option("--seq,-s", opt_args.seq, "sequence directory")->required();
  optimize->add_option("--warp,-w", opt_args.warp, "warped frame directory")->required();
  optimize->add_option("--out,-o", opt_args.out, "optimizer output directory")->required();
  optimize->add_option("--config,-c", opt_args.config, "configuration file");
  optimize->add_option("--threads", opt_args.threads, "worker threads (0 = auto)");
  add_override_flags(optimize, ov);

  EncodeArgs enc_args;
  CLI::App* encode = app.add_subcommand("encode", "compress segments into containers");
  encode->add_option("--frames,-f", enc_args.frames, "frame directory to encode")->required();
  encode->add_option("--track,-t", enc_args.track, "tracking directory")->required();
  encode->add_option("--out,-o", enc_args.out, "encoded output directory")->required();
  encode->add_option("--config,-c", enc_args.config, "configuration file");
  add_override_flags(encode, ov);

  DecodeArgs dec_args;
  CLI::App* decode = app.add_subcommand("decode", "reconstruct frames from containers");
  decode->add_option("--in,-i", dec_args.in, "encoded directory or single .gs4d file")->required();
  decode->add_option("--out,-o", dec_args.out, "decoded output directory")->required();

  RenderArgs render_args;
  CLI::App* render = app.add_subcommand("render", "rasterize frames from a camera rig");
  render->add_option("--frames,-f", render_args.frames, "frame directory")->required();
  render->add_option("--cameras", render_args.cameras, "camera rig JSON")->required();
  render->add_option("--out,-o", render_args.out, "image output directory")->required();
  render->add_option("--threads", render_args.threads, "worker threads (0 = auto)");

  StatsArgs stats_args;
  CLI::App* stats = app.add_subcommand("stats", "PSNR and storage report");
  stats->add_option("--frames,-f", stats_args.frames, "frame directory")->required();
  stats->add_option("--targets", stats_args.targets, "reference image directory");
  stats->add_option("--cameras", stats_args.cameras, "camera rig JSON");
  stats->add_option("--out,-o", stats_args.out, "output CSV path")->required();
  stats->add_option("--threads", stats_args.threads, "worker threads (0 = auto)");

  PipelineArgs pipe_args;
  CLI::App* pipeline = app.add_subcommand("pipeline", "run every stage end to end");
  pipeline->add_option("--config,-c", pipe_args.config, "configuration file");
  pipeline->add_option("--out,-o", pipe_args.out, "pipeline output directory")->required();
  pipeline->add_option("--threads", pipe_args.threads, "worker threads (0 = auto)");
  add_override_flags(pipeline, ov);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (config_init->parsed()) return cmd_config_init(config_out);
    if (synth->parsed()) return cmd_synth(synth_args, ov);
    if (track->parsed()) return cmd_track(track_args, ov);
    if (warp->parsed()) return cmd_warp(warp_args, ov);
    if (optimize->parsed()) return cmd_optimize(opt_args, ov);
    if (encode->parsed()) return cmd_encode(enc_args, ov);
    if (decode->parsed()) return cmd_decode(dec_args);
    if (render->parsed()) return cmd_render(render_args);
    if (stats->parsed()) return cmd_stats(stats_args);
    if (pipeline->parsed()) return cmd_pipeline(pipe_args, ov);
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const StreamError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
