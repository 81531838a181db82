#include "lcnn/conv.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

namespace lcnn {

namespace {

void check_conv_inputs(const Tensor4D& in, const FilterBank& f) {
  if (in.c() != f.c_i()) {
    throw ShapeError("conv: input channels " + std::to_string(in.c()) +
                     " do not match filter c_i " + std::to_string(f.c_i()));
  }
}

}  // namespace

std::pair<std::uint32_t, std::uint32_t> conv_output_extents(
    std::uint32_t h, std::uint32_t w, std::uint32_t f_h, std::uint32_t f_w,
    const ConvParams& p) {
  if (p.stride < 1) throw ShapeError("conv: stride must be >= 1");
  const std::int64_t span_h = std::int64_t{h} + 2 * std::int64_t{p.pad} - f_h;
  const std::int64_t span_w = std::int64_t{w} + 2 * std::int64_t{p.pad} - f_w;
  if (span_h < 0 || span_w < 0) {
    throw ShapeError("conv: window larger than padded input");
  }
  return {static_cast<std::uint32_t>(span_h / p.stride + 1),
          static_cast<std::uint32_t>(span_w / p.stride + 1)};
}

namespace {

// Window tap range along one axis: taps f with 0 <= o*stride + f - pad < extent.
struct TapRange {
  std::uint32_t lo, hi;  // half-open
};

TapRange tap_range(std::uint32_t o, std::uint32_t stride, std::uint32_t pad,
                   std::uint32_t f, std::uint32_t extent) {
  const std::int64_t start = std::int64_t{o} * stride - pad;
  const std::int64_t lo = std::max<std::int64_t>(0, -start);
  const std::int64_t hi = std::min<std::int64_t>(f, extent - start);
  if (hi <= lo) return {0, 0};
  return {static_cast<std::uint32_t>(lo), static_cast<std::uint32_t>(hi)};
}

}  // namespace

Tensor4D conv_oracle(const Tensor4D& in, const FilterBank& f,
                     const ConvParams& p) {
  check_conv_inputs(in, f);
  const auto [h_out, w_out] =
      conv_output_extents(in.h(), in.w(), f.f_h(), f.f_w(), p);
  Tensor4D out(in.n(), f.c_o(), h_out, w_out, Layout::NCHW);
  const Strides si = in.strides();
  const float* src = in.data();
  const float* flt = f.data();
  float* dst = out.data();

  std::uint64_t oi = 0;
  for (std::uint32_t n = 0; n < in.n(); ++n) {
    for (std::uint32_t co = 0; co < f.c_o(); ++co) {
      for (std::uint32_t oh = 0; oh < h_out; ++oh) {
        const TapRange rh = tap_range(oh, p.stride, p.pad, f.f_h(), in.h());
        for (std::uint32_t ow = 0; ow < w_out; ++ow, ++oi) {
          const TapRange rw = tap_range(ow, p.stride, p.pad, f.f_w(), in.w());
          double acc = 0.0;
          for (std::uint32_t ci = 0; ci < f.c_i(); ++ci) {
            const std::uint64_t base =
                std::uint64_t{n} * si.n + std::uint64_t{ci} * si.c;
            for (std::uint32_t fh = rh.lo; fh < rh.hi; ++fh) {
              const std::uint64_t ih = std::uint64_t{oh} * p.stride + fh - p.pad;
              std::uint64_t idx =
                  base + ih * si.h +
                  (std::uint64_t{ow} * p.stride + rw.lo - p.pad) * si.w;
              const float* wrow = flt + f.flat_index(co, ci, fh, rw.lo);
              for (std::uint32_t fw = rw.lo; fw < rw.hi; ++fw) {
                acc += double{src[idx]} * double{wrow[fw - rw.lo]};
                idx += si.w;
              }
            }
          }
          dst[oi] = static_cast<float>(acc);
        }
      }
    }
  }
  return out;
}

namespace {

// CHWN kernel: the batch dimension is contiguous, so the innermost loop runs
// over a block of images whose partial sums live in local accumulators for
// the whole filter window. Per-channel window sums stay in 32-bit; the
// running totals carry 64 bits so deep channel reductions hold the oracle
// tolerance.
Tensor4D conv_direct_chwn(const Tensor4D& in, const FilterBank& f,
                          const ConvParams& p, std::uint32_t h_out,
                          std::uint32_t w_out) {
  constexpr std::uint32_t kImageBlock = 4;
  Tensor4D out(in.n(), f.c_o(), h_out, w_out, Layout::CHWN);
  const std::uint32_t batch = in.n();
  const float* src = in.data();
  const float* flt = f.data();
  float* dst = out.data();
  const std::uint64_t in_hw = std::uint64_t{in.h()} * in.w();

  for (std::uint32_t co = 0; co < f.c_o(); ++co) {
    for (std::uint32_t oh = 0; oh < h_out; ++oh) {
      const TapRange rh = tap_range(oh, p.stride, p.pad, f.f_h(), in.h());
      for (std::uint32_t ow = 0; ow < w_out; ++ow) {
        const TapRange rw = tap_range(ow, p.stride, p.pad, f.f_w(), in.w());
        const std::uint64_t iw0 = std::uint64_t{ow} * p.stride + rw.lo - p.pad;
        for (std::uint32_t n0 = 0; n0 < batch; n0 += kImageBlock) {
          const std::uint32_t nb = std::min(kImageBlock, batch - n0);
          double acc[kImageBlock] = {0.0, 0.0, 0.0, 0.0};
          for (std::uint32_t ci = 0; ci < f.c_i(); ++ci) {
            float wsum[kImageBlock] = {0.0f, 0.0f, 0.0f, 0.0f};
            for (std::uint32_t fh = rh.lo; fh < rh.hi; ++fh) {
              const std::uint64_t ih =
                  std::uint64_t{oh} * p.stride + fh - p.pad;
              const float* base =
                  src + (std::uint64_t{ci} * in_hw + ih * in.w() + iw0) *
                            batch + n0;
              const float* wrow = flt + f.flat_index(co, ci, fh, rw.lo);
              for (std::uint32_t fw = rw.lo; fw < rw.hi; ++fw) {
                const float wv = wrow[fw - rw.lo];
                for (std::uint32_t b = 0; b < nb; ++b) {
                  wsum[b] += base[b] * wv;
                }
                base += batch;
              }
            }
            for (std::uint32_t b = 0; b < nb; ++b) acc[b] += wsum[b];
          }
          float* obase =
              dst +
              ((std::uint64_t{co} * h_out + oh) * w_out + ow) * batch + n0;
          for (std::uint32_t b = 0; b < nb; ++b) {
            obase[b] = static_cast<float>(acc[b]);
          }
        }
      }
    }
  }
  return out;
}

// NCHW kernel: the pixel row is contiguous, so the filter window's width loop
// sits innermost and one output pixel accumulates locally. Same accumulation
// split as the CHWN kernel.
Tensor4D conv_direct_nchw(const Tensor4D& in, const FilterBank& f,
                          const ConvParams& p, std::uint32_t h_out,
                          std::uint32_t w_out) {
  Tensor4D out(in.n(), f.c_o(), h_out, w_out, Layout::NCHW);
  const float* src = in.data();
  const float* flt = f.data();
  float* dst = out.data();
  const std::uint64_t in_hw = std::uint64_t{in.h()} * in.w();

  std::uint64_t oi = 0;
  for (std::uint32_t n = 0; n < in.n(); ++n) {
    for (std::uint32_t co = 0; co < f.c_o(); ++co) {
      for (std::uint32_t oh = 0; oh < h_out; ++oh) {
        const TapRange rh = tap_range(oh, p.stride, p.pad, f.f_h(), in.h());
        for (std::uint32_t ow = 0; ow < w_out; ++ow, ++oi) {
          const TapRange rw = tap_range(ow, p.stride, p.pad, f.f_w(), in.w());
          const std::uint64_t iw0 =
              std::uint64_t{ow} * p.stride + rw.lo - p.pad;
          double acc = 0.0;
          for (std::uint32_t ci = 0; ci < f.c_i(); ++ci) {
            const float* chan = src + (std::uint64_t{n} * in.c() + ci) * in_hw;
            float wsum = 0.0f;
            for (std::uint32_t fh = rh.lo; fh < rh.hi; ++fh) {
              const std::uint64_t ih =
                  std::uint64_t{oh} * p.stride + fh - p.pad;
              const float* row = chan + ih * in.w() + iw0;
              const float* wrow = flt + f.flat_index(co, ci, fh, rw.lo);
              for (std::uint32_t fw = 0; fw < rw.hi - rw.lo; ++fw) {
                wsum += row[fw] * wrow[fw];
              }
            }
            acc += wsum;
          }
          dst[oi] = static_cast<float>(acc);
        }
      }
    }
  }
  return out;
}

}  // namespace

Tensor4D conv_direct(const Tensor4D& in, const FilterBank& f,
                     const ConvParams& p) {
  check_conv_inputs(in, f);
  const auto [h_out, w_out] =
      conv_output_extents(in.h(), in.w(), f.f_h(), f.f_w(), p);
  switch (in.layout()) {
    case Layout::CHWN:
      return conv_direct_chwn(in, f, p, h_out, w_out);
    case Layout::NCHW:
      return conv_direct_nchw(in, f, p, h_out, w_out);
    default:
      throw LayoutError("conv_direct: only CHWN and NCHW kernels exist");
  }
}

Matrix im2col(const Tensor4D& in, std::uint32_t f_h, std::uint32_t f_w,
              const ConvParams& p) {
  if (in.layout() != Layout::NCHW) {
    throw LayoutError("im2col: input must be NCHW");
  }
  const auto [h_out, w_out] = conv_output_extents(in.h(), in.w(), f_h, f_w, p);
  const std::uint64_t cols =
      std::uint64_t{in.n()} * h_out * w_out;
  const std::uint64_t rows = std::uint64_t{in.c()} * f_h * f_w;
  Matrix m(static_cast<std::uint32_t>(rows), static_cast<std::uint32_t>(cols));
  const float* src = in.data();
  const std::uint64_t in_hw = std::uint64_t{in.h()} * in.w();

  for (std::uint32_t ci = 0; ci < in.c(); ++ci) {
    for (std::uint32_t fh = 0; fh < f_h; ++fh) {
      for (std::uint32_t fw = 0; fw < f_w; ++fw) {
        const std::uint64_t row = (std::uint64_t{ci} * f_h + fh) * f_w + fw;
        float* out_row = m.data.data() + row * cols;
        std::uint64_t j = 0;
        for (std::uint32_t n = 0; n < in.n(); ++n) {
          const float* chan = src + (std::uint64_t{n} * in.c() + ci) * in_hw;
          for (std::uint32_t oh = 0; oh < h_out; ++oh) {
            const std::int64_t ih = std::int64_t{oh} * p.stride + fh - p.pad;
            for (std::uint32_t ow = 0; ow < w_out; ++ow, ++j) {
              const std::int64_t iw = std::int64_t{ow} * p.stride + fw - p.pad;
              out_row[j] = (ih >= 0 && ih < in.h() && iw >= 0 && iw < in.w())
                               ? chan[ih * in.w() + iw]
                               : 0.0f;
            }
          }
        }
      }
    }
  }
  return m;
}

void gemm_blocked(const float* a, const float* b, float* c, std::uint64_t m,
                  std::uint64_t n, std::uint64_t k) {
  constexpr std::uint64_t kBlock = 64;
  constexpr std::uint64_t kFlush = 16;
  // Products and the short within-flush reduction run in 32-bit; every
  // kFlush steps the partial tile lands in a 64-bit master tile, which keeps
  // long reductions within the oracle tolerance at a cost of one wide add
  // per kFlush products.
  std::vector<float> tile(kBlock * kBlock);
  std::vector<double> master(kBlock * kBlock);
  for (std::uint64_t i0 = 0; i0 < m; i0 += kBlock) {
    const std::uint64_t bi = std::min(kBlock, m - i0);
    for (std::uint64_t j0 = 0; j0 < n; j0 += kBlock) {
      const std::uint64_t bj = std::min(kBlock, n - j0);
      std::fill(master.begin(), master.begin() + bi * bj, 0.0);
      for (std::uint64_t k0 = 0; k0 < k; k0 += kFlush) {
        const std::uint64_t km = std::min(k0 + kFlush, k);
        std::fill(tile.begin(), tile.begin() + bi * bj, 0.0f);
        for (std::uint64_t i = 0; i < bi; ++i) {
          float* trow = tile.data() + i * bj;
          const float* arow = a + (i0 + i) * k;
          for (std::uint64_t kk = k0; kk < km; ++kk) {
            const float av = arow[kk];
            const float* brow = b + kk * n + j0;
            for (std::uint64_t j = 0; j < bj; ++j) {
              trow[j] += av * brow[j];
            }
          }
        }
        for (std::uint64_t idx = 0; idx < bi * bj; ++idx) {
          master[idx] += tile[idx];
        }
      }
      for (std::uint64_t i = 0; i < bi; ++i) {
        float* crow = c + (i0 + i) * n + j0;
        for (std::uint64_t j = 0; j < bj; ++j) {
          crow[j] = static_cast<float>(master[i * bj + j]);
        }
      }
    }
  }
}

Matrix gemm_blocked(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) {
    throw ShapeError("gemm: inner dims disagree (" + std::to_string(a.cols) +
                     " vs " + std::to_string(b.rows) + ")");
  }
  Matrix c(a.rows, b.cols);
  gemm_blocked(a.data.data(), b.data.data(), c.data.data(), a.rows, b.cols,
               a.cols);
  return c;
}

Tensor4D conv_gemm(const Tensor4D& in, const FilterBank& f,
                   const ConvParams& p) {
  check_conv_inputs(in, f);
  if (in.layout() != Layout::NCHW) {
    throw LayoutError("conv_gemm: input must be NCHW");
  }
  const auto [h_out, w_out] =
      conv_output_extents(in.h(), in.w(), f.f_h(), f.f_w(), p);
  const Matrix unrolled = im2col(in, f.f_h(), f.f_w(), p);
  // Filter data is already the row-major [c_o x (c_i*f_h*f_w)] matrix.
  std::vector<float> product(std::uint64_t{f.c_o()} * unrolled.cols);
  gemm_blocked(f.data(), unrolled.data.data(), product.data(), f.c_o(),
               unrolled.cols, unrolled.rows);

  Tensor4D out(in.n(), f.c_o(), h_out, w_out, Layout::NCHW);
  float* dst = out.data();
  const std::uint64_t hw_out = std::uint64_t{h_out} * w_out;
  for (std::uint32_t co = 0; co < f.c_o(); ++co) {
    const float* prow = product.data() + std::uint64_t{co} * unrolled.cols;
    for (std::uint32_t n = 0; n < in.n(); ++n) {
      float* oslab = dst + (std::uint64_t{n} * f.c_o() + co) * hw_out;
      const float* pslab = prow + std::uint64_t{n} * hw_out;
      std::copy(pslab, pslab + hw_out, oslab);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// FFT path
// ---------------------------------------------------------------------------

namespace {

using Cpx = std::complex<float>;

std::uint32_t next_pow2(std::uint32_t v) {
  std::uint32_t p = 1;
  while (p < v) p <<= 1;
  return p;
}

// In-place iterative radix-2 transform; len must be a power of two.
void fft1d(Cpx* a, std::uint32_t len, bool inverse) {
  for (std::uint32_t i = 1, j = 0; i < len; ++i) {
    std::uint32_t bit = len >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::uint32_t step = 2; step <= len; step <<= 1) {
    const double angle = (inverse ? 2.0 : -2.0) * M_PI / step;
    const Cpx wstep(static_cast<float>(std::cos(angle)),
                    static_cast<float>(std::sin(angle)));
    for (std::uint32_t base = 0; base < len; base += step) {
      Cpx w(1.0f, 0.0f);
      for (std::uint32_t off = 0; off < step / 2; ++off) {
        const Cpx u = a[base + off];
        const Cpx v = a[base + off + step / 2] * w;
        a[base + off] = u + v;
        a[base + off + step / 2] = u - v;
        w *= wstep;
      }
    }
  }
  if (inverse) {
    const float scale = 1.0f / static_cast<float>(len);
    for (std::uint32_t i = 0; i < len; ++i) a[i] *= scale;
  }
}

// Row-column 2D transform over an sh x sw grid stored row-major.
void fft2d(Cpx* grid, std::uint32_t sh, std::uint32_t sw, bool inverse,
           std::vector<Cpx>& column) {
  for (std::uint32_t r = 0; r < sh; ++r) fft1d(grid + std::uint64_t{r} * sw, sw, inverse);
  column.resize(sh);
  for (std::uint32_t c = 0; c < sw; ++c) {
    for (std::uint32_t r = 0; r < sh; ++r) column[r] = grid[std::uint64_t{r} * sw + c];
    fft1d(column.data(), sh, inverse);
    for (std::uint32_t r = 0; r < sh; ++r) grid[std::uint64_t{r} * sw + c] = column[r];
  }
}

}  // namespace

Tensor4D conv_fft(const Tensor4D& in, const FilterBank& f,
                  const ConvParams& p) {
  check_conv_inputs(in, f);
  if (in.layout() != Layout::NCHW) {
    throw LayoutError("conv_fft: input must be NCHW");
  }
  if (p.stride != 1) {
    throw UnsupportedError("conv_fft: stride " + std::to_string(p.stride) +
                           " not supported (stride must be 1)");
  }
  const auto [h_out, w_out] =
      conv_output_extents(in.h(), in.w(), f.f_h(), f.f_w(), p);
  const std::uint32_t hp = in.h() + 2 * p.pad;
  const std::uint32_t wp = in.w() + 2 * p.pad;
  const std::uint32_t sh = next_pow2(hp + f.f_h() - 1);
  const std::uint32_t sw = next_pow2(wp + f.f_w() - 1);
  const std::uint64_t grid = std::uint64_t{sh} * sw;

  std::vector<Cpx> column;

  // Forward transforms of every padded input channel, kept for all output
  // channels (filters are transformed per c_o row, which stays small).
  std::vector<Cpx> in_freq(std::uint64_t{in.n()} * in.c() * grid);
  const float* src = in.data();
  const std::uint64_t in_hw = std::uint64_t{in.h()} * in.w();
  for (std::uint32_t n = 0; n < in.n(); ++n) {
    for (std::uint32_t ci = 0; ci < in.c(); ++ci) {
      Cpx* g = in_freq.data() + (std::uint64_t{n} * in.c() + ci) * grid;
      std::fill(g, g + grid, Cpx(0.0f, 0.0f));
      const float* chan = src + (std::uint64_t{n} * in.c() + ci) * in_hw;
      for (std::uint32_t h = 0; h < in.h(); ++h) {
        for (std::uint32_t w = 0; w < in.w(); ++w) {
          g[std::uint64_t{h + p.pad} * sw + (w + p.pad)] = Cpx(chan[h * in.w() + w], 0.0f);
        }
      }
      fft2d(g, sh, sw, false, column);
    }
  }

  Tensor4D out(in.n(), f.c_o(), h_out, w_out, Layout::NCHW);
  float* dst = out.data();
  const std::uint64_t hw_out = std::uint64_t{h_out} * w_out;

  std::vector<Cpx> filt_freq(std::uint64_t{in.c()} * grid);
  std::vector<Cpx> acc(grid);
  for (std::uint32_t co = 0; co < f.c_o(); ++co) {
    for (std::uint32_t ci = 0; ci < in.c(); ++ci) {
      Cpx* g = filt_freq.data() + std::uint64_t{ci} * grid;
      std::fill(g, g + grid, Cpx(0.0f, 0.0f));
      // Flip both axes so the frequency-domain product realizes the
      // cross-correlation the space-domain kernels compute.
      for (std::uint32_t fh = 0; fh < f.f_h(); ++fh) {
        for (std::uint32_t fw = 0; fw < f.f_w(); ++fw) {
          g[std::uint64_t{f.f_h() - 1 - fh} * sw + (f.f_w() - 1 - fw)] =
              Cpx(f.data()[f.flat_index(co, ci, fh, fw)], 0.0f);
        }
      }
      fft2d(g, sh, sw, false, column);
    }
    for (std::uint32_t n = 0; n < in.n(); ++n) {
      std::fill(acc.begin(), acc.end(), Cpx(0.0f, 0.0f));
      for (std::uint32_t ci = 0; ci < in.c(); ++ci) {
        const Cpx* a = in_freq.data() + (std::uint64_t{n} * in.c() + ci) * grid;
        const Cpx* b = filt_freq.data() + std::uint64_t{ci} * grid;
        for (std::uint64_t i = 0; i < grid; ++i) acc[i] += a[i] * b[i];
      }
      fft2d(acc.data(), sh, sw, true, column);
      // The linear convolution of the padded input with the flipped filter
      // equals the correlation shifted by the filter extent minus one.
      float* oslab = dst + (std::uint64_t{n} * f.c_o() + co) * hw_out;
      for (std::uint32_t oh = 0; oh < h_out; ++oh) {
        const Cpx* row = acc.data() + std::uint64_t{oh + f.f_h() - 1} * sw + (f.f_w() - 1);
        for (std::uint32_t ow = 0; ow < w_out; ++ow) {
          oslab[std::uint64_t{oh} * w_out + ow] = row[ow].real();
        }
      }
    }
  }
  return out;
}

}  // namespace lcnn
