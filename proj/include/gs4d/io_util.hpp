#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gs4d {

// Little-endian binary writer backing every container format.
class ByteWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(v); }
  void u16(uint16_t v) {
    buf_.push_back(static_cast<uint8_t>(v));
    buf_.push_back(static_cast<uint8_t>(v >> 8));
  }
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<uint64_t>(v)); }
  void magic(const char tag[4]) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<uint8_t>(tag[i]));
  }
  void bytes(const uint8_t* p, size_t n) { buf_.insert(buf_.end(), p, p + n); }

  const std::vector<uint8_t>& data() const { return buf_; }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(reinterpret_cast<const char*>(buf_.data()),
              static_cast<std::streamsize>(buf_.size()));
    if (!out) throw std::runtime_error("short write to " + path);
  }

 private:
  std::vector<uint8_t> buf_;
};

class ByteReader {
 public:
  ByteReader(const uint8_t* data, size_t size) : data_(data), size_(size) {}
  explicit ByteReader(const std::vector<uint8_t>& buf) : ByteReader(buf.data(), buf.size()) {}

  static std::vector<uint8_t> load_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::vector<uint8_t> buf(static_cast<size_t>(in.tellg()));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in) throw std::runtime_error("short read from " + path);
    return buf;
  }

  // Keeps the backing storage alive alongside the cursor.
  static ByteReader load(const std::string& path) {
    ByteReader r(nullptr, 0);
    r.owned_ = load_bytes(path);
    r.data_ = r.owned_.data();
    r.size_ = r.owned_.size();
    return r;
  }

  size_t position() const { return pos_; }
  size_t remaining() const { return size_ - pos_; }

  uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  uint16_t u16() {
    need(2);
    uint16_t v = static_cast<uint16_t>(data_[pos_]) |
                 static_cast<uint16_t>(data_[pos_ + 1]) << 8;
    pos_ += 2;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

  const uint8_t* raw(size_t n) {
    need(n);
    const uint8_t* p = data_ + pos_;
    pos_ += n;
    return p;
  }

  void expect_magic(const char tag[4]) {
    need(4);
    if (std::memcmp(data_ + pos_, tag, 4) != 0) {
      throw std::runtime_error(std::string("bad magic, expected ") + std::string(tag, 4));
    }
    pos_ += 4;
  }

  void expect_end() const {
    if (pos_ != size_) {
      throw std::runtime_error("trailing bytes at offset " + std::to_string(pos_));
    }
  }

  size_t offset() const { return pos_; }

 private:
  void need(size_t n) const {
    if (pos_ + n > size_) {
      throw std::runtime_error("truncated stream at offset " + std::to_string(pos_));
    }
  }

  const uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
  std::vector<uint8_t> owned_;
};

}  // namespace gs4d
