#include "gs4d/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>

#include "gs4d/camera.hpp"
#include "gs4d/io_util.hpp"

namespace gs4d {

std::vector<Camera> camera_ring(int count, double radius, double height, const Vec3& target,
                                double fov_y, int width, int image_height) {
  if (count < 1) throw std::invalid_argument("camera_ring: need at least one camera");
  std::vector<Camera> cams;
  cams.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double angle = 2.0 * M_PI * i / count;
    const Vec3 eye = target + Vec3(radius * std::cos(angle), radius * std::sin(angle), height);
    cams.push_back(Camera::look_at(eye, target, Vec3(0, 0, 1), fov_y, width, image_height));
  }
  return cams;
}

double psnr(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) {
    throw std::invalid_argument("psnr: image size mismatch");
  }
  double mse = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.data.size());
  if (mse == 0.0) return 99.0;
  return 10.0 * std::log10(1.0 / mse);
}

namespace {
struct PngFile {
  FILE* f = nullptr;
  explicit PngFile(const std::string& path, const char* mode) : f(std::fopen(path.c_str(), mode)) {
    if (!f) throw std::runtime_error("cannot open " + path);
  }
  ~PngFile() {
    if (f) std::fclose(f);
  }
};
}  // namespace

void write_png(const std::string& path, const Image& image) {
  PngFile file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("png write failed: " + path);
  }
  png_init_io(png, file.f);
  png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<unsigned char> row(static_cast<size_t>(image.width) * 3);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(image.at(x, y, c), 0.0, 1.0);
        row[x * 3 + c] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png(const std::string& path) {
  PngFile file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("png read failed: " + path);
  }
  png_init_io(png, file.f);
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  Image image(w, h);
  std::vector<unsigned char> row(static_cast<size_t>(w) * 3);
  for (int y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) image.at(x, y, c) = row[x * 3 + c] / 255.0;
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

void write_raw_image(const std::string& path, const Image& image) {
  ByteWriter w;
  w.magic("GSRW");
  w.u32(1);
  w.u32(static_cast<uint32_t>(image.width));
  w.u32(static_cast<uint32_t>(image.height));
  for (double v : image.data) w.f32(static_cast<float>(v));
  w.save(path);
}

Image read_raw_image(const std::string& path) {
  ByteReader r = ByteReader::load(path);
  r.expect_magic("GSRW");
  const uint32_t version = r.u32();
  if (version != 1) throw std::runtime_error("raw image: unsupported version");
  const int w = static_cast<int>(r.u32());
  const int h = static_cast<int>(r.u32());
  Image image(w, h);
  for (double& v : image.data) v = r.f32();
  r.expect_end();
  return image;
}

}  // namespace gs4d
