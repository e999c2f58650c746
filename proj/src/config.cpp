#include "gs4d/config.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace gs4d {

namespace {

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
  double v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw std::runtime_error("expected a number, got '" + text + "'");
  return v;
}

int64_t parse_int(const std::string& text) {
  int64_t v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw std::runtime_error("expected an integer, got '" + text + "'");
  return v;
}

bool parse_bool(const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw std::runtime_error("expected true/false, got '" + text + "'");
}

// One config key: how to print the current value and how to assign a new one.
struct KeyDef {
  const char* key;
  const char* section;  // non-null starts a new comment block when emitting
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&)> set;
};

void check_range(bool ok, const char* key, const char* what) {
  if (!ok) throw std::runtime_error(std::string(key) + " " + what);
}

// clang-format off
const std::vector<KeyDef>& key_table() {
  auto int_key = [](const char* key, const char* section, int PipelineConfig::*member,
                    int lo, const char* what) {
    return KeyDef{key, section,
                  [member](const PipelineConfig& c) { return std::to_string(c.*member); },
                  [member, lo, key, what](PipelineConfig& c, const std::string& v) {
                    const int64_t x = parse_int(v);
                    check_range(x >= lo && x <= INT32_MAX, key, what);
                    c.*member = static_cast<int>(x);
                  }};
  };
  auto real_key = [](const char* key, const char* section, double PipelineConfig::*member,
                     bool positive) {
    return KeyDef{key, section,
                  [member](const PipelineConfig& c) { return format_double(c.*member); },
                  [member, positive, key](PipelineConfig& c, const std::string& v) {
                    const double x = parse_double(v);
                    check_range(!positive || x > 0, key, "must be > 0");
                    c.*member = x;
                  }};
  };
  static const std::vector<KeyDef> table = {
      {"seed", "Synthetic scene",
       [](const PipelineConfig& c) { return std::to_string(c.seed); },
       [](PipelineConfig& c, const std::string& v) {
         const int64_t x = parse_int(v);
         check_range(x >= 0, "seed", "must be >= 0");
         c.seed = static_cast<uint64_t>(x);
       }},
      int_key("kernel_count", nullptr, &PipelineConfig::kernel_count, 100, "must be >= 100"),
      int_key("frame_count", nullptr, &PipelineConfig::frame_count, 1, "must be >= 1"),
      int_key("camera_count", nullptr, &PipelineConfig::camera_count, 1, "must be >= 1"),
      int_key("image_size", nullptr, &PipelineConfig::image_size, 8, "must be >= 8"),
      {"shape", nullptr,
       [](const PipelineConfig& c) { return c.shape; },
       [](PipelineConfig& c, const std::string& v) {
         check_range(v == "sphere" || v == "cylinder" || v == "two_lobe", "shape",
                     "must be sphere, cylinder, or two_lobe");
         c.shape = v;
       }},
      {"field", nullptr,
       [](const PipelineConfig& c) { return c.field; },
       [](PipelineConfig& c, const std::string& v) {
         check_range(v == "rigid" || v == "bend" || v == "twist" || v == "ripple", "field",
                     "must be rigid, bend, twist, or ripple");
         c.field = v;
       }},
      real_key("field_strength", nullptr, &PipelineConfig::field_strength, false),
      real_key("drift_opacity", nullptr, &PipelineConfig::drift_opacity, false),
      real_key("drift_sh", nullptr, &PipelineConfig::drift_sh, false),
      int_key("drift_period", nullptr, &PipelineConfig::drift_period, 1, "must be >= 1"),

      real_key("ed_spacing", "Embedded-deformation tracking", &PipelineConfig::ed_spacing, true),
      real_key("lambda_data", nullptr, &PipelineConfig::lambda_data, false),
      real_key("lambda_reg", nullptr, &PipelineConfig::lambda_reg, false),
      int_key("track_iterations", nullptr, &PipelineConfig::track_iterations, 1, "must be >= 1"),
      real_key("track_tol", nullptr, &PipelineConfig::track_tol, true),

      real_key("lambda_sh", "Per-frame energy weights", &PipelineConfig::lambda_sh, false),
      real_key("lambda_opacity", nullptr, &PipelineConfig::lambda_opacity, false),
      real_key("lambda_scale", nullptr, &PipelineConfig::lambda_scale, false),
      real_key("lambda_smooth", nullptr, &PipelineConfig::lambda_smooth, false),
      real_key("lambda_temp", nullptr, &PipelineConfig::lambda_temp, false),
      real_key("lambda_color", nullptr, &PipelineConfig::lambda_color, false),
      real_key("alpha", nullptr, &PipelineConfig::alpha, false),

      int_key("iterations", "Optimizer", &PipelineConfig::iterations, 0, "must be >= 0"),

      int_key("segment_length", "Codec", &PipelineConfig::segment_length, 1, "must be >= 1"),
      int_key("key_motion_bits", nullptr, &PipelineConfig::key_motion_bits, 0, "must be >= 0"),
      int_key("key_appearance_bits", nullptr, &PipelineConfig::key_appearance_bits, 0,
              "must be >= 0"),
      int_key("motion_bits", nullptr, &PipelineConfig::motion_bits, 0, "must be >= 0"),
      int_key("appearance_bits", nullptr, &PipelineConfig::appearance_bits, 0, "must be >= 0"),
      {"residuals", nullptr,
       [](const PipelineConfig& c) { return std::string(c.residuals ? "true" : "false"); },
       [](PipelineConfig& c, const std::string& v) { c.residuals = parse_bool(v); }},
  };
  return table;
}
// clang-format on

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

EnergyWeights PipelineConfig::energy_weights() const {
  EnergyWeights w;
  w.lambda_sh = lambda_sh;
  w.lambda_opacity = lambda_opacity;
  w.lambda_scale = lambda_scale;
  w.lambda_smooth = lambda_smooth;
  w.lambda_temp = lambda_temp;
  w.lambda_color = lambda_color;
  w.alpha = alpha;
  return w;
}

TrackConfig PipelineConfig::track_config() const {
  TrackConfig t;
  t.lambda_data = lambda_data;
  t.lambda_reg = lambda_reg;
  t.max_iterations = track_iterations;
  t.convergence_tol = track_tol;
  return t;
}

BitPolicy PipelineConfig::bit_policy() const {
  BitPolicy p;
  p.key_motion_bits = key_motion_bits;
  p.key_appearance_bits = key_appearance_bits;
  p.motion_bits = motion_bits;
  p.appearance_bits = appearance_bits;
  p.residuals = residuals;
  return p;
}

OptimizeConfig PipelineConfig::optimize_config() const {
  OptimizeConfig c;
  c.iterations = iterations;
  return c;
}

std::string config_to_text(const PipelineConfig& config) {
  std::ostringstream out;
  out << "# gs4d pipeline configuration (format version 1)\n";
  for (const KeyDef& def : key_table()) {
    if (def.section) out << "\n# " << def.section << "\n";
    out << def.key << " = " << def.get(config) << "\n";
  }
  return out.str();
}

PipelineConfig parse_config_text(const std::string& text) {
  PipelineConfig config;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error("config line " + std::to_string(line_no) + ": empty key");

    const KeyDef* def = nullptr;
    for (const KeyDef& candidate : key_table()) {
      if (key == candidate.key) {
        def = &candidate;
        break;
      }
    }
    if (!def)
      throw std::runtime_error("config line " + std::to_string(line_no) + ": unknown key '" +
                               key + "'");
    try {
      def->set(config, value);
    } catch (const std::exception& e) {
      throw std::runtime_error("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

void save_config(const PipelineConfig& config, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_config: cannot open " + path);
  out << config_to_text(config);
  if (!out) throw std::runtime_error("save_config: write failed for " + path);
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_config: cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

}  // namespace gs4d
