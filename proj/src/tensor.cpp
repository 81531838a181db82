#include "lcnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

namespace lcnn {

namespace {

constexpr char kMagic[4] = {'T', '4', 'D', '1'};

std::uint64_t checked_volume(std::uint32_t n, std::uint32_t c, std::uint32_t h,
                             std::uint32_t w, const char* what) {
  if (n == 0 || c == 0 || h == 0 || w == 0) {
    throw ShapeError(std::string(what) + ": all dims must be >= 1");
  }
  const std::uint64_t volume =
      std::uint64_t{n} * c * std::uint64_t{h} * std::uint64_t{w};
  // Dims are 32-bit counts; keep the element count (and the byte count) well
  // inside 64-bit range.
  if (volume > std::numeric_limits<std::uint32_t>::max()) {
    throw ShapeError(std::string(what) + ": dim product overflows");
  }
  return volume;
}

}  // namespace

const char* layout_name(Layout layout) {
  switch (layout) {
    case Layout::NCHW:
      return "nchw";
    case Layout::CHWN:
      return "chwn";
    case Layout::NHWC:
      return "nhwc";
    case Layout::HWCN:
      return "hwcn";
  }
  return "?";
}

std::optional<Layout> layout_from_name(std::string_view name) {
  if (name == "nchw" || name == "NCHW") return Layout::NCHW;
  if (name == "chwn" || name == "CHWN") return Layout::CHWN;
  if (name == "nhwc" || name == "NHWC") return Layout::NHWC;
  if (name == "hwcn" || name == "HWCN") return Layout::HWCN;
  return std::nullopt;
}

Strides layout_strides(Layout layout, std::uint32_t n, std::uint32_t c,
                       std::uint32_t h, std::uint32_t w) {
  Strides s{};
  switch (layout) {
    case Layout::NCHW:
      s.w = 1;
      s.h = w;
      s.c = std::uint64_t{h} * w;
      s.n = std::uint64_t{c} * h * w;
      break;
    case Layout::CHWN:
      s.n = 1;
      s.w = n;
      s.h = std::uint64_t{w} * n;
      s.c = std::uint64_t{h} * w * n;
      break;
    case Layout::NHWC:
      s.c = 1;
      s.w = c;
      s.h = std::uint64_t{w} * c;
      s.n = std::uint64_t{h} * w * c;
      break;
    case Layout::HWCN:
      s.n = 1;
      s.c = n;
      s.w = std::uint64_t{c} * n;
      s.h = std::uint64_t{w} * c * n;
      break;
  }
  return s;
}

Tensor4D::Tensor4D(std::uint32_t n, std::uint32_t c, std::uint32_t h,
                   std::uint32_t w, Layout layout)
    : n_(n), c_(c), h_(h), w_(w), layout_(layout),
      data_(checked_volume(n, c, h, w, "Tensor4D"), 0.0f) {}

Tensor4D::Tensor4D(std::uint32_t n, std::uint32_t c, std::uint32_t h,
                   std::uint32_t w, Layout layout, std::vector<float> data)
    : n_(n), c_(c), h_(h), w_(w), layout_(layout), data_(std::move(data)) {
  if (data_.size() != checked_volume(n, c, h, w, "Tensor4D")) {
    throw ShapeError("Tensor4D: data length does not match dims");
  }
}

std::uint64_t Tensor4D::flat_index(std::uint32_t n, std::uint32_t c,
                                   std::uint32_t h, std::uint32_t w) const {
  const Strides s = strides();
  return std::uint64_t{n} * s.n + std::uint64_t{c} * s.c +
         std::uint64_t{h} * s.h + std::uint64_t{w} * s.w;
}

void Tensor4D::check_bounds(std::uint32_t n, std::uint32_t c, std::uint32_t h,
                            std::uint32_t w) const {
  if (n >= n_ || c >= c_ || h >= h_ || w >= w_) {
    throw IndexError("Tensor4D: index (" + std::to_string(n) + "," +
                     std::to_string(c) + "," + std::to_string(h) + "," +
                     std::to_string(w) + ") out of range");
  }
}

float Tensor4D::at(std::uint32_t n, std::uint32_t c, std::uint32_t h,
                   std::uint32_t w) const {
  check_bounds(n, c, h, w);
  return data_[flat_index(n, c, h, w)];
}

void Tensor4D::set(std::uint32_t n, std::uint32_t c, std::uint32_t h,
                   std::uint32_t w, float value) {
  check_bounds(n, c, h, w);
  data_[flat_index(n, c, h, w)] = value;
}

bool Tensor4D::same_dims(const Tensor4D& other) const {
  return n_ == other.n_ && c_ == other.c_ && h_ == other.h_ && w_ == other.w_;
}

Tensor4D Tensor4D::with_layout_tag(Layout layout) const {
  return Tensor4D(n_, c_, h_, w_, layout, data_);
}

FilterBank::FilterBank(std::uint32_t c_o, std::uint32_t c_i, std::uint32_t f_h,
                       std::uint32_t f_w)
    : c_o_(c_o), c_i_(c_i), f_h_(f_h), f_w_(f_w),
      data_(checked_volume(c_o, c_i, f_h, f_w, "FilterBank"), 0.0f) {}

FilterBank::FilterBank(std::uint32_t c_o, std::uint32_t c_i, std::uint32_t f_h,
                       std::uint32_t f_w, std::vector<float> data)
    : c_o_(c_o), c_i_(c_i), f_h_(f_h), f_w_(f_w), data_(std::move(data)) {
  if (data_.size() != checked_volume(c_o, c_i, f_h, f_w, "FilterBank")) {
    throw ShapeError("FilterBank: data length does not match dims");
  }
}

float FilterBank::at(std::uint32_t co, std::uint32_t ci, std::uint32_t fh,
                     std::uint32_t fw) const {
  if (co >= c_o_ || ci >= c_i_ || fh >= f_h_ || fw >= f_w_) {
    throw IndexError("FilterBank: index out of range");
  }
  return data_[flat_index(co, ci, fh, fw)];
}

bool approx_equal(const Tensor4D& a, const Tensor4D& b, float rel_tol) {
  if (!a.same_dims(b)) {
    throw ShapeError("approx_equal: dim mismatch");
  }
  for (std::uint32_t n = 0; n < a.n(); ++n) {
    for (std::uint32_t c = 0; c < a.c(); ++c) {
      for (std::uint32_t h = 0; h < a.h(); ++h) {
        for (std::uint32_t w = 0; w < a.w(); ++w) {
          const float x = a.data()[a.flat_index(n, c, h, w)];
          const float y = b.data()[b.flat_index(n, c, h, w)];
          const float scale = std::max({std::fabs(x), std::fabs(y), 1.0f});
          if (std::fabs(x - y) > rel_tol * scale) return false;
        }
      }
    }
  }
  return true;
}

bool approx_equal(const Matrix& a, const Matrix& b, float rel_tol) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw ShapeError("approx_equal: matrix dim mismatch");
  }
  for (std::uint64_t i = 0; i < a.data.size(); ++i) {
    const float x = a.data[i];
    const float y = b.data[i];
    const float scale = std::max({std::fabs(x), std::fabs(y), 1.0f});
    if (std::fabs(x - y) > rel_tol * scale) return false;
  }
  return true;
}

namespace {

void put_u32_le(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32_le(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw FormatError("t4d: truncated header");
  return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) |
         (std::uint32_t{b[2]} << 16) | (std::uint32_t{b[3]} << 24);
}

}  // namespace

void write_t4d(std::ostream& out, const Tensor4D& t) {
  out.write(kMagic, 4);
  put_u32_le(out, t.n());
  put_u32_le(out, t.c());
  put_u32_le(out, t.h());
  put_u32_le(out, t.w());
  const unsigned char tail[4] = {static_cast<unsigned char>(t.layout()), 0, 0,
                                 0};
  out.write(reinterpret_cast<const char*>(tail), 4);
  // Payload is IEEE-754 single precision; on a little-endian host the raw
  // bytes are already the file order.
  static_assert(sizeof(float) == 4);
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.size() * 4));
  if (!out) throw FormatError("t4d: write failed");
}

Tensor4D read_t4d(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("t4d: bad magic");
  }
  const std::uint32_t n = get_u32_le(in);
  const std::uint32_t c = get_u32_le(in);
  const std::uint32_t h = get_u32_le(in);
  const std::uint32_t w = get_u32_le(in);
  unsigned char tail[4];
  in.read(reinterpret_cast<char*>(tail), 4);
  if (!in) throw FormatError("t4d: truncated header");
  if (tail[0] > 3) {
    throw FormatError("t4d: unknown layout code " + std::to_string(tail[0]));
  }
  const Layout layout = static_cast<Layout>(tail[0]);
  const std::uint64_t volume =
      std::uint64_t{n} * c * std::uint64_t{h} * std::uint64_t{w};
  if (n == 0 || c == 0 || h == 0 || w == 0 ||
      volume > std::numeric_limits<std::uint32_t>::max()) {
    throw FormatError("t4d: bad dims");
  }
  std::vector<float> data(volume);
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(volume * 4));
  if (static_cast<std::uint64_t>(in.gcount()) != volume * 4) {
    throw FormatError("t4d: truncated payload");
  }
  return Tensor4D(n, c, h, w, layout, std::move(data));
}

void write_t4d(const std::filesystem::path& path, const Tensor4D& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("t4d: cannot open " + path.string());
  write_t4d(out, t);
}

Tensor4D read_t4d(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("t4d: cannot open " + path.string());
  return read_t4d(in);
}

}  // namespace lcnn
