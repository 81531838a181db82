#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "lcnn/errors.hpp"

namespace lcnn {

// Dimension order of a dense 4D array. The last-named dimension is the one
// stored contiguously (NCHW: W contiguous, CHWN: N contiguous, and so on).
enum class Layout : std::uint8_t { NCHW = 0, CHWN = 1, NHWC = 2, HWCN = 3 };

struct Strides {
  std::uint64_t n, c, h, w;
};

const char* layout_name(Layout layout);
std::optional<Layout> layout_from_name(std::string_view name);

// Stride of each logical dimension for the given layout: prefix products of
// the extents below it, so the layout's lowest dimension always has stride 1.
Strides layout_strides(Layout layout, std::uint32_t n, std::uint32_t c,
                       std::uint32_t h, std::uint32_t w);

// Dense single-precision 4D array tagged with its memory layout.
// Treated as immutable once filled; kernels allocate a fresh tensor per
// output and never write through their inputs.
class Tensor4D {
 public:
  Tensor4D(std::uint32_t n, std::uint32_t c, std::uint32_t h, std::uint32_t w,
           Layout layout);
  Tensor4D(std::uint32_t n, std::uint32_t c, std::uint32_t h, std::uint32_t w,
           Layout layout, std::vector<float> data);

  std::uint32_t n() const { return n_; }
  std::uint32_t c() const { return c_; }
  std::uint32_t h() const { return h_; }
  std::uint32_t w() const { return w_; }
  Layout layout() const { return layout_; }
  std::uint64_t size() const { return data_.size(); }
  Strides strides() const { return layout_strides(layout_, n_, c_, h_, w_); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }

  // Flat offset of logical element (n, c, h, w); no bounds check.
  std::uint64_t flat_index(std::uint32_t n, std::uint32_t c, std::uint32_t h,
                           std::uint32_t w) const;

  // Bounds-checked element access.
  float at(std::uint32_t n, std::uint32_t c, std::uint32_t h,
           std::uint32_t w) const;
  void set(std::uint32_t n, std::uint32_t c, std::uint32_t h, std::uint32_t w,
           float value);

  bool same_dims(const Tensor4D& other) const;

  // Same buffer reinterpreted under a different layout tag (no data motion).
  Tensor4D with_layout_tag(Layout layout) const;

 private:
  void check_bounds(std::uint32_t n, std::uint32_t c, std::uint32_t h,
                    std::uint32_t w) const;

  std::uint32_t n_, c_, h_, w_;
  Layout layout_;
  std::vector<float> data_;
};

// Convolution weights, always stored in (c_o, c_i, f_h, f_w) order; the
// layout-specialized kernels index into this single order.
class FilterBank {
 public:
  FilterBank(std::uint32_t c_o, std::uint32_t c_i, std::uint32_t f_h,
             std::uint32_t f_w);
  FilterBank(std::uint32_t c_o, std::uint32_t c_i, std::uint32_t f_h,
             std::uint32_t f_w, std::vector<float> data);

  std::uint32_t c_o() const { return c_o_; }
  std::uint32_t c_i() const { return c_i_; }
  std::uint32_t f_h() const { return f_h_; }
  std::uint32_t f_w() const { return f_w_; }
  std::uint64_t size() const { return data_.size(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }

  std::uint64_t flat_index(std::uint32_t co, std::uint32_t ci,
                           std::uint32_t fh, std::uint32_t fw) const {
    return ((std::uint64_t{co} * c_i_ + ci) * f_h_ + fh) * f_w_ + fw;
  }
  float at(std::uint32_t co, std::uint32_t ci, std::uint32_t fh,
           std::uint32_t fw) const;

 private:
  std::uint32_t c_o_, c_i_, f_h_, f_w_;
  std::vector<float> data_;
};

// Row-major 2D matrix; the classifier tail (fc + softmax) works on these.
struct Matrix {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(std::uint32_t r, std::uint32_t c)
      : rows(r), cols(c), data(std::uint64_t{r} * c, 0.0f) {}

  float& at(std::uint32_t r, std::uint32_t c) {
    return data[std::uint64_t{r} * cols + c];
  }
  float at(std::uint32_t r, std::uint32_t c) const {
    return data[std::uint64_t{r} * cols + c];
  }
};

// True iff every logically-corresponding pair of elements differs by at most
// rel_tol * max(|x|, |y|, 1). Layouts may differ; dims must match.
bool approx_equal(const Tensor4D& a, const Tensor4D& b, float rel_tol);
bool approx_equal(const Matrix& a, const Matrix& b, float rel_tol);

// Binary tensor file format, little-endian: magic "T4D1", four u32 dims
// (N, C, H, W), one u8 layout code, three reserved zero bytes, then the
// payload as 32-bit floats in the layout's flat order.
void write_t4d(std::ostream& out, const Tensor4D& t);
Tensor4D read_t4d(std::istream& in);
void write_t4d(const std::filesystem::path& path, const Tensor4D& t);
Tensor4D read_t4d(const std::filesystem::path& path);

}  // namespace lcnn
