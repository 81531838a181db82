#pragma once

#include <cstdint>
#include <utility>

#include "lcnn/tensor.hpp"

namespace lcnn {

struct ConvParams {
  std::uint32_t stride = 1;
  std::uint32_t pad = 0;
};

// Output extents (h_out, w_out) for a windowed op: floor((x + 2*pad - f) / stride) + 1.
// Throws ShapeError when either extent would drop below 1.
std::pair<std::uint32_t, std::uint32_t> conv_output_extents(
    std::uint32_t h, std::uint32_t w, std::uint32_t f_h, std::uint32_t f_w,
    const ConvParams& p);

// Brute-force reference: the quadruple sum evaluated per output element with
// 64-bit accumulation, input in any layout, output NCHW. Ground truth for the
// three fast paths.
Tensor4D conv_oracle(const Tensor4D& in, const FilterBank& f,
                     const ConvParams& p);

// Layout-specialized direct convolution; input must be CHWN or NCHW and the
// output keeps the input's layout. CHWN runs the image dimension innermost
// with a small block of images held in local accumulators; NCHW runs the
// filter window innermost.
Tensor4D conv_direct(const Tensor4D& in, const FilterBank& f,
                     const ConvParams& p);

// Receptive-field unroll of an NCHW tensor: rows = c_i*f_h*f_w, one column
// per output position (n, oh, ow); padded taps come out as zeros.
Matrix im2col(const Tensor4D& in, std::uint32_t f_h, std::uint32_t f_w,
              const ConvParams& p);

// Convolution as a matrix product: [c_o x (c_i*f_h*f_w)] filter matrix times
// the im2col matrix, scattered back to an NCHW tensor.
Tensor4D conv_gemm(const Tensor4D& in, const FilterBank& f,
                   const ConvParams& p);

// Frequency-domain convolution (stride 1 only): per (n, c_o), the sum over
// input channels of IFFT(FFT(padded input) * FFT(flipped padded filter)),
// cropped to the valid region. Throws UnsupportedError for stride > 1.
Tensor4D conv_fft(const Tensor4D& in, const FilterBank& f,
                  const ConvParams& p);

// Cache-blocked row-major matrix product: c (m x n) = a (m x k) * b (k x n).
// c is overwritten. Shared by conv_gemm and the fully-connected layer.
void gemm_blocked(const float* a, const float* b, float* c, std::uint64_t m,
                  std::uint64_t n, std::uint64_t k);
Matrix gemm_blocked(const Matrix& a, const Matrix& b);

}  // namespace lcnn
