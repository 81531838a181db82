#include <cstdint>
#include <numeric>
#include <random>

#include "doctest.h"
#include "lcnn/layout.hpp"
#include "lcnn/pool.hpp"

using namespace lcnn;

namespace {

Tensor4D random_tensor(std::mt19937& rng, std::uint32_t n, std::uint32_t c,
                       std::uint32_t h, std::uint32_t w,
                       Layout layout = Layout::NCHW) {
  Tensor4D t(n, c, h, w, layout);
  std::uniform_real_distribution<float> dist(-10.0f, 10.0f);
  for (std::uint64_t i = 0; i < t.size(); ++i) t.data()[i] = dist(rng);
  return t;
}

// Load count the coarsened kernel must report: the receptive-field union per
// (channel, block, image) task, summed over the ceil-partitioned block grid.
std::uint64_t expected_coarsened_loads(std::uint32_t n, std::uint32_t c,
                                       std::uint32_t h_out, std::uint32_t w_out,
                                       const PoolParams& p,
                                       const CoarseningPlan& plan) {
  std::uint64_t total = 0;
  for (std::uint32_t oh0 = 0; oh0 < h_out; oh0 += plan.fh) {
    const std::uint32_t bh = std::min(plan.fh, h_out - oh0);
    for (std::uint32_t ow0 = 0; ow0 < w_out; ow0 += plan.fw) {
      const std::uint32_t bw = std::min(plan.fw, w_out - ow0);
      total += std::uint64_t{p.stride * (bh - 1) + p.win_h} *
               (p.stride * (bw - 1) + p.win_w);
    }
  }
  return total * n * c;
}

}  // namespace

TEST_CASE("sliding-average on a 12-element line") {
  std::vector<float> line(12);
  std::iota(line.begin(), line.end(), 1.0f);
  const Tensor4D in(1, 1, 1, 12, Layout::NCHW, std::move(line));
  const PoolParams p{1, 4, 2, PoolMode::Average};
  const Tensor4D out = pool_oracle(in, p);
  CHECK(out.w() == 5);
  const float want[5] = {2.5f, 4.5f, 6.5f, 8.5f, 10.5f};
  for (std::uint32_t i = 0; i < 5; ++i) CHECK(out.at(0, 0, 0, i) == want[i]);
}

TEST_CASE("1x1 window is the identity") {
  std::mt19937 rng(3);
  const Tensor4D in = random_tensor(rng, 2, 3, 4, 5);
  const Tensor4D out = pool_oracle(in, PoolParams{1, 1, 1, PoolMode::Max});
  CHECK(approx_equal(out, in, 0.0f));
}

TEST_CASE("2x2 max pooling on a 4x4 ramp") {
  std::vector<float> vals(16);
  std::iota(vals.begin(), vals.end(), 1.0f);
  const Tensor4D in(1, 1, 4, 4, Layout::NCHW, std::move(vals));
  const Tensor4D out = pool_oracle(in, PoolParams{2, 2, 2, PoolMode::Max});
  CHECK(out.at(0, 0, 0, 0) == 6.0f);
  CHECK(out.at(0, 0, 0, 1) == 8.0f);
  CHECK(out.at(0, 0, 1, 0) == 14.0f);
  CHECK(out.at(0, 0, 1, 1) == 16.0f);
}

TEST_CASE("window larger than the image is a shape error") {
  std::mt19937 rng(4);
  const Tensor4D in = random_tensor(rng, 1, 1, 3, 3);
  CHECK_THROWS_AS((void)pool_oracle(in, PoolParams{4, 4, 1, PoolMode::Max}),
                  ShapeError);
}

TEST_CASE("access accounting on the overlapped line") {
  std::vector<float> line(12);
  std::iota(line.begin(), line.end(), 1.0f);
  const PoolParams p{1, 4, 2, PoolMode::Average};

  SUBCASE("NCHW kernel") {
    const Tensor4D in(1, 1, 1, 12, Layout::NCHW, line);
    const auto [out, report] = pool_layout(in, p);
    CHECK(report.output_stores == 5);
    CHECK(report.input_loads == 20);
    CHECK(report.distinct_inputs == 12);
  }
  SUBCASE("CHWN kernel") {
    const Tensor4D in(1, 1, 1, 12, Layout::CHWN, line);
    const auto [out, report] = pool_layout(in, p);
    CHECK(report.output_stores == 5);
    CHECK(report.input_loads == 20);
    CHECK(report.distinct_inputs == 12);
  }
}

TEST_CASE("non-overlapped pooling touches each input exactly once") {
  std::mt19937 rng(5);
  const Tensor4D in = random_tensor(rng, 2, 3, 8, 8);
  const auto [out, report] =
      pool_layout(in, PoolParams{2, 2, 2, PoolMode::Max});
  CHECK(report.input_loads == in.size());
  CHECK(report.distinct_inputs == in.size());
  CHECK(report.output_stores == out.size());
}

TEST_CASE("layout kernels agree with the oracle") {
  std::mt19937 rng(6);
  std::uniform_int_distribution<std::uint32_t> dim(4, 16);
  for (int trial = 0; trial < 30; ++trial) {
    const std::uint32_t h = dim(rng);
    const std::uint32_t win = 2 + trial % 2;
    const std::uint32_t stride = 1 + trial % 3;
    const PoolMode mode = trial % 2 ? PoolMode::Average : PoolMode::Max;
    const PoolParams p{win, win, stride, mode};
    const Tensor4D base = random_tensor(rng, dim(rng), dim(rng), h, h);
    const Tensor4D want = pool_oracle(base, p);
    const float tol = mode == PoolMode::Max ? 0.0f : 1e-6f;

    CHECK(approx_equal(pool_layout(base, p).first, want, tol));
    const Tensor4D chwn = transform(base, Layout::CHWN);
    CHECK(approx_equal(pool_layout(chwn, p).first, want, tol));
    CHECK(approx_equal(pool_coarsened(chwn, p, CoarseningPlan{2, 2}).first,
                       want, tol));
  }
}

TEST_CASE("pool_layout rejects the unimplemented layouts") {
  std::mt19937 rng(7);
  const Tensor4D in = random_tensor(rng, 2, 2, 4, 4, Layout::NHWC);
  CHECK_THROWS_AS((void)pool_layout(in, PoolParams{2, 2, 2, PoolMode::Max}),
                  LayoutError);
}

TEST_CASE("coarsened task loads shrink against the plain kernel") {
  // Window 3, stride 2, a 1-D block of two outputs: the union spans
  // 2*1+3 = 5 columns where the plain kernel pays 2*3 = 6 per row pair.
  std::mt19937 rng(8);
  const Tensor4D in = random_tensor(rng, 1, 1, 3, 11, Layout::CHWN);
  const PoolParams p{3, 3, 2, PoolMode::Max};
  const auto [out, report] = pool_coarsened(in, p, CoarseningPlan{1, 2});
  CHECK(out.w() == 5);
  // Tasks along w: blocks {2,2,1}; rows span 3 fully. Loads:
  // 3*(2*1+3) + 3*(2*1+3) + 3*3 = 15 + 15 + 9.
  CHECK(report.input_loads == 39);
  const auto [out2, plain] = pool_layout(in, p);
  CHECK(plain.input_loads == 45);  // 5 outputs * 9 window taps
  CHECK(report.distinct_inputs == plain.distinct_inputs);
}

TEST_CASE("unit coarsening matches the plain kernel's accounting") {
  std::mt19937 rng(9);
  const Tensor4D in = random_tensor(rng, 3, 2, 9, 9, Layout::CHWN);
  const PoolParams p{3, 3, 2, PoolMode::Average};
  const auto [a, ra] = pool_layout(in, p);
  const auto [b, rb] = pool_coarsened(in, p, CoarseningPlan{1, 1});
  CHECK(ra.input_loads == rb.input_loads);
  CHECK(ra.output_stores == rb.output_stores);
  CHECK(ra.distinct_inputs == rb.distinct_inputs);
  CHECK(approx_equal(a, b, 1e-6f));
}

TEST_CASE("coarsening plan validation") {
  std::mt19937 rng(10);
  const Tensor4D in = random_tensor(rng, 2, 2, 8, 8, Layout::CHWN);
  const PoolParams p{2, 2, 2, PoolMode::Max};
  CHECK_THROWS_AS((void)pool_coarsened(in, p, CoarseningPlan{9, 8}),
                  PlanError);
  CHECK_THROWS_AS((void)pool_coarsened(in, p, CoarseningPlan{0, 1}),
                  PlanError);
  CHECK_THROWS_AS(
      (void)pool_coarsened(in.with_layout_tag(Layout::NCHW), p,
                           CoarseningPlan{2, 2}),
      LayoutError);
}

TEST_CASE("coarsened load counts follow the union formula") {
  std::mt19937 rng(11);
  std::uniform_int_distribution<std::uint32_t> win_dist(1, 4);
  std::uniform_int_distribution<std::uint32_t> stride_dist(1, 4);
  std::uniform_int_distribution<std::uint32_t> factor(1, 5);
  for (int trial = 0; trial < 50; ++trial) {
    const PoolParams p{win_dist(rng), win_dist(rng), stride_dist(rng),
                       PoolMode::Max};
    const std::uint32_t h = p.win_h + stride_dist(rng) * 3;
    const std::uint32_t w = p.win_w + stride_dist(rng) * 3;
    const Tensor4D in = random_tensor(rng, 2, 2, h, w, Layout::CHWN);
    const CoarseningPlan plan{factor(rng), factor(rng)};
    const auto [out, report] = pool_coarsened(in, p, plan);
    CHECK(report.input_loads ==
          expected_coarsened_loads(2, 2, out.h(), out.w(), p, plan));
    CHECK(report.output_stores == out.size());
  }
}

TEST_CASE("overlapped pooling always saves loads under coarsening") {
  std::mt19937 rng(12);
  const Tensor4D in = random_tensor(rng, 4, 8, 24, 24, Layout::CHWN);
  const PoolParams p{3, 3, 2, PoolMode::Max};  // stride < window
  const auto plain = pool_layout(in, p).second;
  const auto coarse = pool_coarsened(in, p, CoarseningPlan{2, 2}).second;
  CHECK(coarse.input_loads < plain.input_loads);
  CHECK(coarse.input_loads >= coarse.distinct_inputs);
}

TEST_CASE("hill climb follows the injected cost model") {
  const PoolParams p{3, 3, 2, PoolMode::Max};

  SUBCASE("unimodal model peaks at (4,4)") {
    auto cost = [](const CoarseningPlan& plan) {
      const auto leg = [](std::uint32_t f) {
        const double d = static_cast<double>(f) - 4.0;
        return d * d;
      };
      return leg(plan.fh) + leg(plan.fw);
    };
    const CoarseningPlan best = autotune_pool(4, 4, 24, 24, p, cost);
    CHECK(best.fh == 4);
    CHECK(best.fw == 4);
  }
  SUBCASE("flat model keeps the initial factor") {
    auto cost = [](const CoarseningPlan&) { return 1.0; };
    const CoarseningPlan best = autotune_pool(4, 4, 24, 24, p, cost);
    CHECK(best.fh == 2);
    CHECK(best.fw == 2);
  }
  SUBCASE("ever-improving model stops at the accumulator cap") {
    auto cost = [](const CoarseningPlan& plan) {
      return 1.0 / (static_cast<double>(plan.fh) * plan.fw);
    };
    const CoarseningPlan best = autotune_pool(4, 4, 24, 24, p, cost);
    CHECK(std::uint64_t{best.fh} * best.fw <= kCoarseningCap);
    CHECK(best.fh == 8);
    CHECK(best.fw == 8);
  }
  SUBCASE("tuned plan never loses to the initial factor") {
    auto cost = [](const CoarseningPlan& plan) {
      return plan.fh == 3 ? 0.5 : 1.0;  // single dip along fh
    };
    const CoarseningPlan best = autotune_pool(4, 4, 24, 24, p, cost);
    CHECK(cost(best) <= cost(CoarseningPlan{2, 2}));
    CHECK(best.fh == 3);
  }
}

TEST_CASE("real-measurement tuning still yields correct pooling") {
  std::mt19937 rng(13);
  const PoolParams p{2, 2, 2, PoolMode::Max};  // non-overlapped
  const CoarseningPlan plan = autotune_pool(4, 4, 16, 16, p);
  CHECK(std::uint64_t{plan.fh} * plan.fw <= kCoarseningCap);
  const Tensor4D in = random_tensor(rng, 4, 4, 16, 16, Layout::CHWN);
  CHECK(approx_equal(pool_coarsened(in, p, plan).first, pool_oracle(in, p),
                     0.0f));
}
