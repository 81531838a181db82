#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>

#include "doctest.h"
#include "lcnn/conv.hpp"
#include "lcnn/layout.hpp"

using namespace lcnn;

namespace {

Tensor4D random_tensor(std::mt19937& rng, std::uint32_t n, std::uint32_t c,
                       std::uint32_t h, std::uint32_t w,
                       Layout layout = Layout::NCHW) {
  Tensor4D t(n, c, h, w, layout);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  for (std::uint64_t i = 0; i < t.size(); ++i) t.data()[i] = dist(rng);
  return t;
}

FilterBank random_filter(std::mt19937& rng, std::uint32_t c_o,
                         std::uint32_t c_i, std::uint32_t f) {
  FilterBank fb(c_o, c_i, f, f);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  for (std::uint64_t i = 0; i < fb.size(); ++i) fb.data()[i] = dist(rng);
  return fb;
}

}  // namespace

TEST_CASE("oracle on a hand-summed example") {
  const Tensor4D in(1, 1, 3, 3, Layout::NCHW,
                    {1, 2, 3, 4, 5, 6, 7, 8, 9});
  const FilterBank f(1, 1, 2, 2, {1, 0, 0, 1});
  const Tensor4D out = conv_oracle(in, f, ConvParams{1, 0});
  CHECK(out.n() == 1);
  CHECK(out.c() == 1);
  CHECK(out.h() == 2);
  CHECK(out.w() == 2);
  CHECK(out.at(0, 0, 0, 0) == 6.0f);   // 1 + 5
  CHECK(out.at(0, 0, 0, 1) == 8.0f);   // 2 + 6
  CHECK(out.at(0, 0, 1, 0) == 12.0f);  // 4 + 8
  CHECK(out.at(0, 0, 1, 1) == 14.0f);  // 5 + 9
}

TEST_CASE("unit filter is the identity") {
  std::mt19937 rng(5);
  const Tensor4D in = random_tensor(rng, 2, 3, 4, 4);
  FilterBank f(3, 3, 1, 1);
  for (std::uint32_t co = 0; co < 3; ++co) {
    f.data()[f.flat_index(co, co, 0, 0)] = 1.0f;
  }
  const Tensor4D out = conv_oracle(in, f, ConvParams{1, 0});
  CHECK(approx_equal(out, in, 1e-6f));
}

TEST_CASE("output extent formula") {
  // 24x24 maps, 5x5 window, stride 1, no padding.
  const auto [ho, wo] = conv_output_extents(24, 24, 5, 5, ConvParams{1, 0});
  CHECK(ho == 20);
  CHECK(wo == 20);
  std::mt19937 rng(6);
  const Tensor4D in = random_tensor(rng, 2, 3, 24, 24);
  const FilterBank f = random_filter(rng, 64, 3, 5);
  const Tensor4D out = conv_oracle(in, f, ConvParams{1, 0});
  CHECK(out.n() == 2);
  CHECK(out.c() == 64);
  CHECK(out.h() == 20);
  CHECK(out.w() == 20);

  CHECK(conv_output_extents(5, 5, 3, 3, ConvParams{2, 0}).first == 2);
  CHECK_THROWS_AS((void)conv_output_extents(2, 2, 3, 3, ConvParams{1, 0}),
                  ShapeError);
}

TEST_CASE("shape validation") {
  std::mt19937 rng(8);
  const Tensor4D in = random_tensor(rng, 1, 3, 4, 4);
  const FilterBank f = random_filter(rng, 2, 4, 3);
  CHECK_THROWS_AS((void)conv_oracle(in, f, ConvParams{}), ShapeError);
  const FilterBank ok = random_filter(rng, 2, 3, 3);
  CHECK_THROWS_AS((void)conv_direct(in.with_layout_tag(Layout::NHWC), ok,
                                    ConvParams{}),
                  LayoutError);
  CHECK_THROWS_AS((void)conv_gemm(in.with_layout_tag(Layout::CHWN), ok,
                                  ConvParams{}),
                  LayoutError);
}

TEST_CASE("direct kernels agree with the oracle") {
  std::mt19937 rng(9);
  const struct {
    std::uint32_t n, c, h, f, c_o, stride, pad;
  } configs[] = {
      {1, 1, 5, 3, 2, 1, 0},  {4, 3, 8, 3, 5, 1, 1},  {7, 2, 9, 5, 3, 2, 2},
      {32, 16, 6, 3, 8, 1, 1}, {130, 3, 5, 3, 4, 1, 0}, {2, 1, 4, 1, 1, 2, 0},
  };
  for (const auto& cfg : configs) {
    const Tensor4D base = random_tensor(rng, cfg.n, cfg.c, cfg.h, cfg.h);
    const FilterBank f = random_filter(rng, cfg.c_o, cfg.c, cfg.f);
    const ConvParams p{cfg.stride, cfg.pad};
    const Tensor4D want = conv_oracle(base, f, p);

    const Tensor4D nchw = conv_direct(base, f, p);
    CHECK(nchw.layout() == Layout::NCHW);
    CHECK(approx_equal(nchw, want, 1e-5f));

    const Tensor4D chwn_in = transform(base, Layout::CHWN);
    const Tensor4D chwn = conv_direct(chwn_in, f, p);
    CHECK(chwn.layout() == Layout::CHWN);
    CHECK(approx_equal(chwn, want, 1e-5f));
  }
}

TEST_CASE("batch independence of the blocked CHWN kernel") {
  std::mt19937 rng(10);
  const std::uint32_t batch = 128;
  const Tensor4D whole =
      random_tensor(rng, batch, 3, 6, 6, Layout::CHWN);
  const FilterBank f = random_filter(rng, 4, 3, 3);
  const Tensor4D out = conv_direct(whole, f, ConvParams{1, 0});

  // Same images pushed through in two halves.
  for (std::uint32_t half = 0; half < 2; ++half) {
    Tensor4D part(batch / 2, 3, 6, 6, Layout::CHWN);
    for (std::uint32_t n = 0; n < batch / 2; ++n)
      for (std::uint32_t c = 0; c < 3; ++c)
        for (std::uint32_t h = 0; h < 6; ++h)
          for (std::uint32_t w = 0; w < 6; ++w)
            part.set(n, c, h, w, whole.at(half * batch / 2 + n, c, h, w));
    const Tensor4D part_out = conv_direct(part, f, ConvParams{1, 0});
    for (std::uint32_t n = 0; n < batch / 2; ++n)
      for (std::uint32_t c = 0; c < 4; ++c)
        for (std::uint32_t h = 0; h < part_out.h(); ++h)
          for (std::uint32_t w = 0; w < part_out.w(); ++w)
            CHECK(part_out.at(n, c, h, w) ==
                  out.at(half * batch / 2 + n, c, h, w));
  }
}

TEST_CASE("zero filter annihilates") {
  std::mt19937 rng(12);
  const Tensor4D in = random_tensor(rng, 3, 2, 5, 5, Layout::CHWN);
  const FilterBank f(2, 2, 3, 3);
  const Tensor4D out = conv_direct(in, f, ConvParams{1, 0});
  for (std::uint64_t i = 0; i < out.size(); ++i) CHECK(out.data()[i] == 0.0f);
}

TEST_CASE("im2col lays out receptive fields as columns") {
  SUBCASE("2x2 window over a 3x3 map") {
    const Tensor4D in(1, 1, 3, 3, Layout::NCHW, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    const Matrix m = im2col(in, 2, 2, ConvParams{1, 0});
    CHECK(m.rows == 4);
    CHECK(m.cols == 4);
    // Columns are the four patches in (oh, ow) order.
    const float want[4][4] = {{1, 2, 4, 5}, {2, 3, 5, 6}, {4, 5, 7, 8},
                              {5, 6, 8, 9}};
    for (std::uint32_t j = 0; j < 4; ++j)
      for (std::uint32_t r = 0; r < 4; ++r)
        CHECK(m.at(r, j) == want[j][r]);
  }
  SUBCASE("1x1 window reshapes") {
    std::mt19937 rng(13);
    const Tensor4D in = random_tensor(rng, 2, 3, 2, 2);
    const Matrix m = im2col(in, 1, 1, ConvParams{1, 0});
    CHECK(m.rows == 3);
    CHECK(m.cols == 8);
    for (std::uint32_t ci = 0; ci < 3; ++ci)
      for (std::uint32_t n = 0; n < 2; ++n)
        for (std::uint32_t h = 0; h < 2; ++h)
          for (std::uint32_t w = 0; w < 2; ++w)
            CHECK(m.at(ci, (n * 2 + h) * 2 + w) == in.at(n, ci, h, w));
  }
  SUBCASE("padding samples as zero rows") {
    const Tensor4D in(1, 1, 1, 1, Layout::NCHW, {7.0f});
    const Matrix m = im2col(in, 3, 3, ConvParams{1, 1});
    CHECK(m.rows == 9);
    CHECK(m.cols == 1);
    for (std::uint32_t r = 0; r < 9; ++r) {
      CHECK(m.at(r, 0) == (r == 4 ? 7.0f : 0.0f));
    }
  }
}

TEST_CASE("gemm path agrees with the oracle and the direct kernels") {
  std::mt19937 rng(14);
  std::uniform_int_distribution<std::uint32_t> dim(3, 12);
  std::uniform_int_distribution<std::uint32_t> chan(1, 8);
  std::uniform_int_distribution<std::uint32_t> pick_f(1, 3);
  for (int trial = 0; trial < 40; ++trial) {
    const std::uint32_t h = dim(rng);
    const std::uint32_t f = std::min(pick_f(rng), h);
    const std::uint32_t stride = 1 + (trial % 2);
    const std::uint32_t pad = trial % 3;
    const Tensor4D in = random_tensor(rng, chan(rng), chan(rng), h, h);
    const FilterBank fb = random_filter(rng, chan(rng), in.c(), f);
    const ConvParams p{stride, pad};
    const Tensor4D want = conv_oracle(in, fb, p);
    const Tensor4D got = conv_gemm(in, fb, p);
    CHECK(approx_equal(got, want, 1e-5f));
    const Tensor4D direct = conv_direct(transform(in, Layout::CHWN), fb, p);
    CHECK(approx_equal(got, direct, 1e-5f));
  }
}

TEST_CASE("four-way agreement across the parameter grid") {
  std::mt19937 rng(40);
  int covered = 0;
  for (const std::uint32_t c_i : {1u, 3u, 16u, 64u}) {
    for (const std::uint32_t n : {1u, 4u, 32u}) {
      for (const std::uint32_t f : {1u, 3u, 5u}) {
        for (const std::uint32_t stride : {1u, 2u}) {
          // One pad value per cell keeps the grid affordable.
          const std::uint32_t pad = (c_i + n + f + stride) % 3;
          const std::uint32_t h = f + 4;
          const Tensor4D in = random_tensor(rng, n, c_i, h, h);
          const FilterBank fb = random_filter(rng, 3, c_i, f);
          const ConvParams p{stride, pad};
          const Tensor4D want = conv_oracle(in, fb, p);
          CHECK(approx_equal(conv_direct(in, fb, p), want, 1e-5f));
          CHECK(approx_equal(conv_direct(transform(in, Layout::CHWN), fb, p),
                             want, 1e-5f));
          CHECK(approx_equal(conv_gemm(in, fb, p), want, 1e-5f));
          if (stride == 1) {
            CHECK(approx_equal(conv_fft(in, fb, p), want, 1e-3f));
          }
          ++covered;
        }
      }
    }
  }
  CHECK(covered == 72);
}

TEST_CASE("all-ones 1x1 filter sums channels per pixel") {
  std::mt19937 rng(15);
  const Tensor4D in = random_tensor(rng, 2, 4, 3, 3);
  FilterBank f(1, 4, 1, 1);
  std::fill(f.data(), f.data() + f.size(), 1.0f);
  const Tensor4D out = conv_gemm(in, f, ConvParams{1, 0});
  for (std::uint32_t n = 0; n < 2; ++n)
    for (std::uint32_t h = 0; h < 3; ++h)
      for (std::uint32_t w = 0; w < 3; ++w) {
        float sum = 0.0f;
        for (std::uint32_t c = 0; c < 4; ++c) sum += in.at(n, c, h, w);
        CHECK(out.at(n, 0, h, w) == doctest::Approx(sum).epsilon(1e-5));
      }
}

TEST_CASE("fft path agrees with the oracle on stride-1 configs") {
  std::mt19937 rng(16);
  std::uniform_int_distribution<std::uint32_t> dim(3, 32);
  std::uniform_int_distribution<std::uint32_t> chan(1, 4);
  for (int trial = 0; trial < 15; ++trial) {
    const std::uint32_t h = dim(rng);
    const std::uint32_t f = std::min<std::uint32_t>(1 + 2 * (trial % 3), h);
    const std::uint32_t pad = trial % 3;
    const Tensor4D in = random_tensor(rng, chan(rng), chan(rng), h, h);
    const FilterBank fb = random_filter(rng, chan(rng), in.c(), f);
    const ConvParams p{1, pad};
    CHECK(approx_equal(conv_fft(in, fb, p), conv_oracle(in, fb, p), 1e-3f));
  }
}

TEST_CASE("delta filter under fft reproduces the input crop") {
  std::mt19937 rng(18);
  const Tensor4D in = random_tensor(rng, 2, 1, 8, 8);
  FilterBank f(1, 1, 3, 3);
  f.data()[f.flat_index(0, 0, 0, 0)] = 1.0f;
  const Tensor4D out = conv_fft(in, f, ConvParams{1, 0});
  CHECK(out.h() == 6);
  for (std::uint32_t n = 0; n < 2; ++n)
    for (std::uint32_t h = 0; h < 6; ++h)
      for (std::uint32_t w = 0; w < 6; ++w)
        CHECK(out.at(n, 0, h, w) ==
              doctest::Approx(in.at(n, 0, h, w)).epsilon(1e-3));
}

TEST_CASE("fft rejects strided configs") {
  std::mt19937 rng(19);
  const Tensor4D in = random_tensor(rng, 1, 3, 16, 16);
  const FilterBank f = random_filter(rng, 4, 3, 3);
  CHECK_THROWS_AS((void)conv_fft(in, f, ConvParams{2, 0}), UnsupportedError);
}

TEST_CASE("linearity in the input") {
  std::mt19937 rng(20);
  const Tensor4D in = random_tensor(rng, 2, 3, 6, 6);
  const FilterBank f = random_filter(rng, 4, 3, 3);
  const ConvParams p{1, 1};
  const Tensor4D base = conv_gemm(in, f, p);
  for (const float a : {-1.0f, 0.5f, 2.0f}) {
    Tensor4D scaled_in = in;
    for (std::uint64_t i = 0; i < scaled_in.size(); ++i)
      scaled_in.data()[i] *= a;
    const Tensor4D got = conv_gemm(scaled_in, f, p);
    Tensor4D want = base;
    for (std::uint64_t i = 0; i < want.size(); ++i) want.data()[i] *= a;
    CHECK(approx_equal(got, want, 1e-5f));
  }
}

TEST_CASE("permuting the batch permutes outputs") {
  std::mt19937 rng(21);
  const Tensor4D in = random_tensor(rng, 4, 2, 5, 5);
  const FilterBank f = random_filter(rng, 3, 2, 3);
  const Tensor4D out = conv_gemm(in, f, ConvParams{1, 0});

  const std::uint32_t perm[4] = {2, 0, 3, 1};
  Tensor4D shuffled(4, 2, 5, 5, Layout::NCHW);
  for (std::uint32_t n = 0; n < 4; ++n)
    for (std::uint32_t c = 0; c < 2; ++c)
      for (std::uint32_t h = 0; h < 5; ++h)
        for (std::uint32_t w = 0; w < 5; ++w)
          shuffled.set(n, c, h, w, in.at(perm[n], c, h, w));
  const Tensor4D got = conv_gemm(shuffled, f, ConvParams{1, 0});
  for (std::uint32_t n = 0; n < 4; ++n)
    for (std::uint32_t c = 0; c < 3; ++c)
      for (std::uint32_t h = 0; h < out.h(); ++h)
        for (std::uint32_t w = 0; w < out.w(); ++w)
          CHECK(got.at(n, c, h, w) == out.at(perm[n], c, h, w));
}

TEST_CASE("blocked gemm matches a plain product") {
  std::mt19937 rng(22);
  Matrix a(37, 81), b(81, 53);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  for (auto& v : a.data) v = dist(rng);
  for (auto& v : b.data) v = dist(rng);
  const Matrix c = gemm_blocked(a, b);
  for (std::uint32_t i = 0; i < a.rows; ++i)
    for (std::uint32_t j = 0; j < b.cols; ++j) {
      double want = 0.0;
      for (std::uint32_t k = 0; k < a.cols; ++k)
        want += double{a.at(i, k)} * double{b.at(k, j)};
      CHECK(c.at(i, j) == doctest::Approx(want).epsilon(1e-5));
    }
  CHECK_THROWS_AS((void)gemm_blocked(a, a), ShapeError);
}
