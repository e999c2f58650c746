#include "gs4d/frame_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "gs4d/io_util.hpp"
#include "json.hpp"

namespace gs4d {

namespace {

constexpr uint32_t kFrameVersion = 1;
constexpr uint32_t kCorrVersion = 1;
constexpr uint32_t kEdGraphVersion = 1;
constexpr uint32_t kEdMotionVersion = 1;

void write_vec3(ByteWriter& w, const Vec3& v) {
  w.f32(static_cast<float>(v.x()));
  w.f32(static_cast<float>(v.y()));
  w.f32(static_cast<float>(v.z()));
}

Vec3 read_vec3(ByteReader& r) {
  const double x = r.f32();
  const double y = r.f32();
  const double z = r.f32();
  return Vec3(x, y, z);
}

}  // namespace

void save_frame(const FrameState& frame, const std::string& path) {
  if (frame.kernels.empty()) throw std::invalid_argument("save_frame: empty frame");
  const int degree = frame.sh_degree();
  const size_t sh_values = sh_value_count(degree);
  for (size_t i = 0; i < frame.size(); ++i) {
    if (frame.kernels[i].sh.size() != sh_values)
      throw std::invalid_argument("save_frame: kernel " + std::to_string(i) +
                                  " has mismatched SH degree");
  }

  ByteWriter w;
  w.magic("GSFR");
  w.u32(kFrameVersion);
  w.u32(static_cast<uint32_t>(frame.size()));
  w.u8(static_cast<uint8_t>(degree));
  for (const auto& k : frame.kernels) write_vec3(w, k.position);
  for (const auto& k : frame.kernels) {
    w.f32(static_cast<float>(k.rotation.w));
    w.f32(static_cast<float>(k.rotation.x));
    w.f32(static_cast<float>(k.rotation.y));
    w.f32(static_cast<float>(k.rotation.z));
  }
  for (const auto& k : frame.kernels) write_vec3(w, k.log_scale);
  for (const auto& k : frame.kernels) w.f32(static_cast<float>(k.opacity_logit));
  for (const auto& k : frame.kernels)
    for (double c : k.sh) w.f32(static_cast<float>(c));
  w.save(path);
}

FrameState load_frame(const std::string& path) {
  ByteReader r = ByteReader::load(path);
  r.expect_magic("GSFR");
  const uint32_t version = r.u32();
  if (version != kFrameVersion)
    throw std::runtime_error("load_frame: unsupported version " + std::to_string(version));
  const uint32_t count = r.u32();
  const int degree = r.u8();
  if (count == 0) throw std::runtime_error("load_frame: zero kernels in " + path);
  if (degree > kMaxShDegree)
    throw std::runtime_error("load_frame: SH degree " + std::to_string(degree) +
                             " exceeds maximum");
  const size_t sh_values = sh_value_count(degree);

  FrameState frame;
  frame.kernels.resize(count);
  for (auto& k : frame.kernels) k.position = read_vec3(r);
  for (auto& k : frame.kernels) {
    k.rotation.w = r.f32();
    k.rotation.x = r.f32();
    k.rotation.y = r.f32();
    k.rotation.z = r.f32();
  }
  for (auto& k : frame.kernels) k.log_scale = read_vec3(r);
  for (auto& k : frame.kernels) k.opacity_logit = r.f32();
  for (auto& k : frame.kernels) {
    k.sh.resize(sh_values);
    for (double& c : k.sh) c = r.f32();
  }
  r.expect_end();
  return frame;
}

void save_cameras(const std::vector<Camera>& cameras, const std::string& path) {
  nlohmann::json doc;
  doc["version"] = 1;
  auto& list = doc["cameras"] = nlohmann::json::array();
  for (const auto& cam : cameras) {
    const Quaternion q = quat_from_rot(cam.world_to_camera.rotation);
    const Vec3& t = cam.world_to_camera.translation;
    list.push_back({{"fx", cam.fx},
                    {"fy", cam.fy},
                    {"cx", cam.cx},
                    {"cy", cam.cy},
                    {"width", cam.width},
                    {"height", cam.height},
                    {"rotation", {q.w, q.x, q.y, q.z}},
                    {"translation", {t.x(), t.y(), t.z()}}});
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_cameras: cannot open " + path);
  out << doc.dump(2) << "\n";
  if (!out) throw std::runtime_error("save_cameras: write failed for " + path);
}

std::vector<Camera> load_cameras(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_cameras: cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_cameras: invalid JSON in " + path + ": " + e.what());
  }
  std::vector<Camera> cameras;
  try {
    for (const auto& entry : doc.at("cameras")) {
      Camera cam;
      cam.fx = entry.at("fx").get<double>();
      cam.fy = entry.at("fy").get<double>();
      cam.cx = entry.at("cx").get<double>();
      cam.cy = entry.at("cy").get<double>();
      cam.width = entry.at("width").get<int>();
      cam.height = entry.at("height").get<int>();
      const auto& q = entry.at("rotation");
      const auto& t = entry.at("translation");
      Quaternion rot{q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>(),
                     q.at(3).get<double>()};
      cam.world_to_camera.rotation = quat_to_rot(rot);
      cam.world_to_camera.translation =
          Vec3(t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>());
      cam.validate();
      cameras.push_back(cam);
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_cameras: missing or malformed field in " + path + ": " +
                             e.what());
  }
  if (cameras.empty()) throw std::runtime_error("load_cameras: no cameras in " + path);
  return cameras;
}

void save_correspondences(const CorrespondenceSet& corr, const std::string& path) {
  if (corr.src.size() != corr.tgt.size())
    throw std::invalid_argument("save_correspondences: src/tgt size mismatch");
  const bool has_normals = !corr.normals.empty();
  if (has_normals && corr.normals.size() != corr.src.size())
    throw std::invalid_argument("save_correspondences: normals size mismatch");

  ByteWriter w;
  w.magic("GSCR");
  w.u32(kCorrVersion);
  w.u32(static_cast<uint32_t>(corr.src.size()));
  w.u8(has_normals ? 1 : 0);
  for (const auto& p : corr.src) write_vec3(w, p);
  for (const auto& p : corr.tgt) write_vec3(w, p);
  for (const auto& n : corr.normals) write_vec3(w, n);
  w.save(path);
}

CorrespondenceSet load_correspondences(const std::string& path) {
  ByteReader r = ByteReader::load(path);
  r.expect_magic("GSCR");
  const uint32_t version = r.u32();
  if (version != kCorrVersion)
    throw std::runtime_error("load_correspondences: unsupported version " +
                             std::to_string(version));
  const uint32_t count = r.u32();
  const bool has_normals = r.u8() != 0;
  CorrespondenceSet corr;
  corr.src.resize(count);
  corr.tgt.resize(count);
  for (auto& p : corr.src) p = read_vec3(r);
  for (auto& p : corr.tgt) p = read_vec3(r);
  if (has_normals) {
    corr.normals.resize(count);
    for (auto& n : corr.normals) n = read_vec3(r);
  }
  r.expect_end();
  return corr;
}

namespace {

const char* region_name(Region region) {
  switch (region) {
    case Region::kBody: return "body";
    case Region::kHand: return "hand";
    case Region::kFace: return "face";
  }
  throw std::invalid_argument("region_name: unknown region");
}

Region region_from_name(const std::string& name, size_t line) {
  if (name == "body") return Region::kBody;
  if (name == "hand") return Region::kHand;
  if (name == "face") return Region::kFace;
  throw std::runtime_error("load_labels: unknown region '" + name + "' at line " +
                           std::to_string(line));
}

}  // namespace

void save_labels(const std::vector<Region>& labels, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_labels: cannot open " + path);
  for (Region region : labels) out << region_name(region) << "\n";
  if (!out) throw std::runtime_error("save_labels: write failed for " + path);
}

std::vector<Region> load_labels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_labels: cannot open " + path);
  std::vector<Region> labels;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    labels.push_back(region_from_name(line, line_no));
  }
  return labels;
}

void save_ed_graph(const EDGraph& graph, const std::string& path) {
  ByteWriter w;
  w.magic("GSED");
  w.u32(kEdGraphVersion);
  w.u32(static_cast<uint32_t>(graph.size()));
  w.f32(static_cast<float>(graph.node_radius));
  for (const auto& node : graph.nodes) write_vec3(w, node.x);
  if (graph.edges.size() != graph.size())
    throw std::invalid_argument("save_ed_graph: edge table size mismatch");
  for (const auto& neighbors : graph.edges) {
    w.u32(static_cast<uint32_t>(neighbors.size()));
    for (int j : neighbors) w.u32(static_cast<uint32_t>(j));
  }
  w.save(path);
}

EDGraph load_ed_graph(const std::string& path) {
  ByteReader r = ByteReader::load(path);
  r.expect_magic("GSED");
  const uint32_t version = r.u32();
  if (version != kEdGraphVersion)
    throw std::runtime_error("load_ed_graph: unsupported version " + std::to_string(version));
  const uint32_t count = r.u32();
  EDGraph graph;
  graph.node_radius = r.f32();
  if (!(graph.node_radius > 0))
    throw std::runtime_error("load_ed_graph: non-positive node radius in " + path);
  graph.nodes.resize(count);
  for (auto& node : graph.nodes) node.x = read_vec3(r);
  graph.edges.resize(count);
  for (auto& neighbors : graph.edges) {
    const uint32_t degree = r.u32();
    neighbors.resize(degree);
    for (int& j : neighbors) {
      const uint32_t idx = r.u32();
      if (idx >= count)
        throw std::runtime_error("load_ed_graph: neighbor index " + std::to_string(idx) +
                                 " out of range");
      j = static_cast<int>(idx);
    }
  }
  r.expect_end();
  return graph;
}

void save_ed_motion(const std::vector<std::vector<DualQuaternion>>& motions,
                    const std::string& path) {
  const size_t node_count = motions.empty() ? 0 : motions.front().size();
  for (size_t t = 0; t < motions.size(); ++t) {
    if (motions[t].size() != node_count)
      throw std::invalid_argument("save_ed_motion: record " + std::to_string(t) +
                                  " has inconsistent node count");
  }
  ByteWriter w;
  w.magic("GSMO");
  w.u32(kEdMotionVersion);
  w.u32(static_cast<uint32_t>(node_count));
  w.u32(static_cast<uint32_t>(motions.size()));
  for (const auto& record : motions) {
    for (const auto& dq : record) {
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
  w.save(path);
}

std::vector<std::vector<DualQuaternion>> load_ed_motion(const std::string& path) {
  ByteReader r = ByteReader::load(path);
  r.expect_magic("GSMO");
  const uint32_t version = r.u32();
  if (version != kEdMotionVersion)
    throw std::runtime_error("load_ed_motion: unsupported version " + std::to_string(version));
  const uint32_t node_count = r.u32();
  const uint32_t record_count = r.u32();
  std::vector<std::vector<DualQuaternion>> motions(record_count);
  for (auto& record : motions) {
    record.resize(node_count);
    for (auto& dq : record) {
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
  r.expect_end();
  return motions;
}

}  // namespace gs4d
