#pragma once

#include <array>
#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <variant>
#include <vector>

#include "spikedet/error.hpp"
#include "spikedet/tensor.hpp"

namespace spikedet {

// TensorFile layout, all integers little-endian:
//   [0,4)   magic "SUT1"
//   [4,8)   dtype u32: 0 = U8_SPIKE, 1 = F32
//   [8,24)  extents t, c, h, w as u32
//   [24,..) row-major payload, 1 byte per spike or 4 bytes per IEEE-754 float

enum class DType : std::uint32_t { U8Spike = 0, F32 = 1 };

using AnyTensor = std::variant<SpikeTensor, FloatTensor>;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

inline float get_f32(const unsigned char* p) { return std::bit_cast<float>(get_u32(p)); }

inline std::uint32_t narrow_extent(std::size_t v) {
  if (v > 0xffffffffu) fail(ErrorKind::Size, "extent does not fit in 32 bits");
  return static_cast<std::uint32_t>(v);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path.string() + "' for reading");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "write to '" + path.string() + "' failed");
}

inline void encode_shape(std::string& out, const Shape& s) {
  put_u32(out, narrow_extent(s.t));
  put_u32(out, narrow_extent(s.c));
  put_u32(out, narrow_extent(s.h));
  put_u32(out, narrow_extent(s.w));
}

}  // namespace detail

inline std::string encode_tensor(const SpikeTensor& x) {
  std::string out = "SUT1";
  detail::put_u32(out, static_cast<std::uint32_t>(DType::U8Spike));
  detail::encode_shape(out, x.shape());
  out.append(reinterpret_cast<const char*>(x.data().data()), x.size());
  return out;
}

inline std::string encode_tensor(const FloatTensor& x) {
  std::string out = "SUT1";
  detail::put_u32(out, static_cast<std::uint32_t>(DType::F32));
  detail::encode_shape(out, x.shape());
  out.reserve(out.size() + 4 * x.size());
  for (float v : x.data()) detail::put_f32(out, v);
  return out;
}

inline AnyTensor decode_tensor(const std::string& bytes) {
  constexpr std::size_t header = 24;
  if (bytes.size() < header) fail(ErrorKind::Format, "tensor file shorter than its header");
  if (bytes.compare(0, 4, "SUT1") != 0) fail(ErrorKind::Format, "bad tensor magic");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t dtype = detail::get_u32(p + 4);
  Shape shape{detail::get_u32(p + 8), detail::get_u32(p + 12), detail::get_u32(p + 16),
              detail::get_u32(p + 20)};
  std::size_t n = 0;
  try {
    n = shape.checked_numel();
  } catch (const Error& e) {
    fail(ErrorKind::Format, std::string("tensor header: ") + e.what());
  }
  const std::size_t payload = bytes.size() - header;
  if (dtype == static_cast<std::uint32_t>(DType::U8Spike)) {
    if (payload != n) {
      fail(ErrorKind::Format, "spike payload is " + std::to_string(payload) + " bytes, expected " +
                                  std::to_string(n));
    }
    return SpikeTensor(shape, std::vector<std::uint8_t>(p + header, p + header + n));
  }
  if (dtype == static_cast<std::uint32_t>(DType::F32)) {
    if (n > payload / 4 || payload != 4 * n) {
      fail(ErrorKind::Format, "f32 payload is " + std::to_string(payload) + " bytes, expected " +
                                  std::to_string(4 * n));
    }
    std::vector<float> data(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = detail::get_f32(p + header + 4 * i);
    return FloatTensor(shape, std::move(data));
  }
  fail(ErrorKind::Format, "unknown tensor dtype " + std::to_string(dtype));
}

template <class T>
void write_tensor(const Tensor<T>& x, const std::filesystem::path& path) {
  detail::write_file(path, encode_tensor(x));
}

inline AnyTensor read_tensor(const std::filesystem::path& path) {
  return decode_tensor(detail::read_file(path));
}

/// Typed read; a dtype other than the requested one is a format error.
template <class T>
Tensor<T> read_tensor_as(const std::filesystem::path& path) {
  AnyTensor any = read_tensor(path);
  if (auto* x = std::get_if<Tensor<T>>(&any)) return std::move(*x);
  fail(ErrorKind::Format, "'" + path.string() + "' holds a different dtype");
}

// --- PGM (P5, 8-bit) ---------------------------------------------------------

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  unsigned maxval = 255;
  std::vector<std::uint8_t> pixels;  // row-major
};

namespace detail {

class PgmHeaderReader {
 public:
  explicit PgmHeaderReader(const std::string& bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char ch = bytes_[pos_];
      if (ch == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n' && bytes_[pos_] != '\r') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t number() {
    skip_space_and_comments();
    std::size_t value = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      value = value * 10 + static_cast<std::size_t>(bytes_[pos_] - '0');
      if (value > 0xffffffu) fail(ErrorKind::Format, "PGM header value too large");
      ++pos_;
      ++digits;
    }
    if (digits == 0) fail(ErrorKind::Format, "malformed PGM header");
    return value;
  }

  std::size_t pos() const { return pos_; }
  void advance() { ++pos_; }
  bool at_space() const {
    return pos_ < bytes_.size() && std::isspace(static_cast<unsigned char>(bytes_[pos_]));
  }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 2;
};

}  // namespace detail

inline GrayImage decode_pgm(const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    fail(ErrorKind::Format, "not a binary PGM (P5)");
  }
  detail::PgmHeaderReader reader(bytes);
  GrayImage img;
  img.width = reader.number();
  img.height = reader.number();
  const std::size_t maxval = reader.number();
  if (img.width == 0 || img.height == 0) fail(ErrorKind::Format, "PGM has a zero dimension");
  if (maxval == 0 || maxval > 255) {
    fail(ErrorKind::Format, "unsupported PGM maxval " + std::to_string(maxval) + " (8-bit only)");
  }
  img.maxval = static_cast<unsigned>(maxval);
  if (!reader.at_space()) fail(ErrorKind::Format, "malformed PGM header");
  reader.advance();
  const std::size_t n = img.width * img.height;
  if (bytes.size() - reader.pos() < n) fail(ErrorKind::Format, "truncated PGM raster");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + reader.pos();
  img.pixels.assign(p, p + n);
  return img;
}

inline std::string encode_pgm(const GrayImage& img) {
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n" +
                    std::to_string(img.maxval) + "\n";
  out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
  return out;
}

inline GrayImage read_pgm(const std::filesystem::path& path) {
  return decode_pgm(detail::read_file(path));
}

inline void write_pgm(const GrayImage& img, const std::filesystem::path& path) {
  detail::write_file(path, encode_pgm(img));
}

/// Spike plane (t, c) as a PGM: 1 -> 255, 0 -> 0.
inline GrayImage spike_plane_to_gray(const SpikeTensor& x, std::size_t t, std::size_t c) {
  const Shape& s = x.shape();
  if (t >= s.t || c >= s.c) {
    fail(ErrorKind::Shape, "plane (" + std::to_string(t) + "," + std::to_string(c) +
                               ") outside " + s.str());
  }
  GrayImage img{s.w, s.h, 255, {}};
  img.pixels.reserve(s.plane());
  for (std::uint8_t v : x.plane(t, c)) img.pixels.push_back(v ? 255 : 0);
  return img;
}

/// Binarize a 255-maxval gray image: gray >= 128 -> 1.
inline SpikeTensor gray_to_spikes(const GrayImage& img) {
  if (img.maxval != 255) fail(ErrorKind::Format, "spike PGM must use maxval 255");
  std::vector<std::uint8_t> data(img.pixels.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = img.pixels[i] >= 128 ? 1 : 0;
  return SpikeTensor(Shape{1, 1, img.height, img.width}, std::move(data));
}

inline void to_pgm(const SpikeTensor& x, std::size_t t, std::size_t c,
                   const std::filesystem::path& path) {
  write_pgm(spike_plane_to_gray(x, t, c), path);
}

inline SpikeTensor from_pgm(const std::filesystem::path& path) {
  return gray_to_spikes(read_pgm(path));
}

/// Gray image normalized to [0, 1], replicated over `channels` (t = 1).
inline FloatTensor gray_to_image(const GrayImage& img, std::size_t channels = 3) {
  FloatTensor out(Shape{1, channels, img.height, img.width});
  const float scale = 1.0f / static_cast<float>(img.maxval);
  for (std::size_t c = 0; c < channels; ++c) {
    auto dst = out.plane(0, c);
    for (std::size_t i = 0; i < dst.size(); ++i) {
      dst[i] = static_cast<float>(img.pixels[i]) * scale;
    }
  }
  return out;
}

}  // namespace spikedet
