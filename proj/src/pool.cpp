#include "lcnn/pool.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace lcnn {

namespace {

// Identity of the running maximum; window loops then issue exactly one read
// per tap.
constexpr float kLowest = -std::numeric_limits<float>::infinity();

void check_window(const Tensor4D& in, const PoolParams& p) {
  if (p.win_h < 1 || p.win_w < 1 || p.stride < 1) {
    throw ShapeError("pool: window and stride must be >= 1");
  }
  if (p.win_h > in.h() || p.win_w > in.w()) {
    throw ShapeError("pool: window larger than image");
  }
}

// Count of input positions along one axis covered by at least one window.
std::uint64_t covered_extent(std::uint32_t out, std::uint32_t win,
                             std::uint32_t stride) {
  if (stride >= win) return std::uint64_t{out} * win;  // disjoint windows
  return std::uint64_t{stride} * (out - 1) + win;
}

std::uint64_t distinct_input_count(const Tensor4D& in, const PoolParams& p,
                                   std::uint32_t h_out, std::uint32_t w_out) {
  return std::uint64_t{in.n()} * in.c() *
         covered_extent(h_out, p.win_h, p.stride) *
         covered_extent(w_out, p.win_w, p.stride);
}

}  // namespace

std::pair<std::uint32_t, std::uint32_t> pool_output_extents(
    std::uint32_t h, std::uint32_t w, const PoolParams& p) {
  return {(h - p.win_h) / p.stride + 1, (w - p.win_w) / p.stride + 1};
}

Tensor4D pool_oracle(const Tensor4D& in, const PoolParams& p) {
  check_window(in, p);
  const auto [h_out, w_out] = pool_output_extents(in.h(), in.w(), p);
  Tensor4D out(in.n(), in.c(), h_out, w_out, Layout::NCHW);
  const Strides si = in.strides();
  const float* src = in.data();
  float* dst = out.data();

  std::uint64_t oi = 0;
  for (std::uint32_t n = 0; n < in.n(); ++n) {
    for (std::uint32_t c = 0; c < in.c(); ++c) {
      for (std::uint32_t oh = 0; oh < h_out; ++oh) {
        for (std::uint32_t ow = 0; ow < w_out; ++ow, ++oi) {
          double sum = 0.0;
          float best = src[std::uint64_t{n} * si.n + std::uint64_t{c} * si.c +
                           std::uint64_t{oh} * p.stride * si.h +
                           std::uint64_t{ow} * p.stride * si.w];
          for (std::uint32_t y = 0; y < p.win_h; ++y) {
            for (std::uint32_t x = 0; x < p.win_w; ++x) {
              const float v =
                  src[std::uint64_t{n} * si.n + std::uint64_t{c} * si.c +
                      (std::uint64_t{oh} * p.stride + y) * si.h +
                      (std::uint64_t{ow} * p.stride + x) * si.w];
              sum += v;
              best = std::max(best, v);
            }
          }
          dst[oi] = p.mode == PoolMode::Average
                        ? static_cast<float>(sum / p.win_h / p.win_w)
                        : best;
        }
      }
    }
  }
  return out;
}

namespace {

std::pair<Tensor4D, AccessReport> pool_plain(const Tensor4D& in,
                                             const PoolParams& p) {
  const auto [h_out, w_out] = pool_output_extents(in.h(), in.w(), p);
  Tensor4D out(in.n(), in.c(), h_out, w_out, in.layout());
  AccessReport report;
  report.distinct_inputs = distinct_input_count(in, p, h_out, w_out);
  const float* src = in.data();
  float* dst = out.data();
  const bool avg = p.mode == PoolMode::Average;

  if (in.layout() == Layout::CHWN) {
    // The batch dimension is contiguous, so every window tap is reduced
    // across all images with unit stride into a lane buffer.
    const std::uint32_t batch = in.n();
    const std::uint64_t in_row = std::uint64_t{in.w()} * batch;
    const std::uint64_t in_chan = std::uint64_t{in.h()} * in_row;
    const float inv_win = 1.0f / static_cast<float>(p.win_h * p.win_w);
    std::vector<float> lane(batch);
    for (std::uint32_t c = 0; c < in.c(); ++c) {
      for (std::uint32_t oh = 0; oh < h_out; ++oh) {
        for (std::uint32_t ow = 0; ow < w_out; ++ow) {
          std::fill(lane.begin(), lane.end(), avg ? 0.0f : kLowest);
          for (std::uint32_t y = 0; y < p.win_h; ++y) {
            const float* row = src + std::uint64_t{c} * in_chan +
                               (std::uint64_t{oh} * p.stride + y) * in_row +
                               std::uint64_t{ow} * p.stride * batch;
            for (std::uint32_t x = 0; x < p.win_w; ++x) {
              const float* tap = row + std::uint64_t{x} * batch;
              if (avg) {
                for (std::uint32_t n = 0; n < batch; ++n) lane[n] += tap[n];
              } else {
                for (std::uint32_t n = 0; n < batch; ++n) {
                  lane[n] = std::max(lane[n], tap[n]);
                }
              }
            }
          }
          report.input_loads += std::uint64_t{p.win_h} * p.win_w * batch;
          float* obase = dst + ((std::uint64_t{c} * h_out + oh) * w_out + ow) *
                                   batch;
          for (std::uint32_t n = 0; n < batch; ++n) {
            obase[n] = avg ? lane[n] * inv_win : lane[n];
          }
          report.output_stores += batch;
        }
      }
    }
  } else if (in.layout() == Layout::NCHW) {
    const std::uint64_t in_hw = std::uint64_t{in.h()} * in.w();
    std::uint64_t oi = 0;
    for (std::uint32_t n = 0; n < in.n(); ++n) {
      for (std::uint32_t c = 0; c < in.c(); ++c) {
        const float* chan = src + (std::uint64_t{n} * in.c() + c) * in_hw;
        for (std::uint32_t oh = 0; oh < h_out; ++oh) {
          for (std::uint32_t ow = 0; ow < w_out; ++ow, ++oi) {
            const float* win0 =
                chan + std::uint64_t{oh} * p.stride * in.w() +
                std::uint64_t{ow} * p.stride;
            float red = avg ? 0.0f : kLowest;
            for (std::uint32_t y = 0; y < p.win_h; ++y) {
              const float* row = win0 + std::uint64_t{y} * in.w();
              for (std::uint32_t x = 0; x < p.win_w; ++x) {
                if (avg) {
                  red += row[x];
                } else {
                  red = std::max(red, row[x]);
                }
              }
            }
            report.input_loads += std::uint64_t{p.win_h} * p.win_w;
            dst[oi] = avg ? red / static_cast<float>(p.win_h * p.win_w) : red;
            ++report.output_stores;
          }
        }
      }
    }
  } else {
    throw LayoutError("pool_layout: only CHWN and NCHW kernels exist");
  }
  return {std::move(out), report};
}

}  // namespace

std::pair<Tensor4D, AccessReport> pool_layout(const Tensor4D& in,
                                              const PoolParams& p) {
  check_window(in, p);
  return pool_plain(in, p);
}

std::pair<Tensor4D, AccessReport> pool_coarsened(const Tensor4D& in,
                                                 const PoolParams& p,
                                                 const CoarseningPlan& plan) {
  check_window(in, p);
  if (plan.fh < 1 || plan.fw < 1) {
    throw PlanError("pool_coarsened: factors must be >= 1");
  }
  if (std::uint64_t{plan.fh} * plan.fw > kCoarseningCap) {
    throw PlanError("pool_coarsened: fh*fw exceeds accumulator cap of " +
                    std::to_string(kCoarseningCap));
  }
  if (in.layout() != Layout::CHWN) {
    throw LayoutError("pool_coarsened: input must be CHWN");
  }

  const auto [h_out, w_out] = pool_output_extents(in.h(), in.w(), p);
  Tensor4D out(in.n(), in.c(), h_out, w_out, Layout::CHWN);
  AccessReport report;
  report.distinct_inputs = distinct_input_count(in, p, h_out, w_out);

  const std::uint32_t batch = in.n();
  const std::uint64_t in_row = std::uint64_t{in.w()} * batch;
  const std::uint64_t in_chan = std::uint64_t{in.h()} * in_row;
  const std::uint64_t out_row = std::uint64_t{w_out} * batch;
  const std::uint64_t out_chan = std::uint64_t{h_out} * out_row;
  const float* src = in.data();
  float* dst = out.data();
  const bool avg = p.mode == PoolMode::Average;
  const float inv_win = 1.0f / static_cast<float>(p.win_h * p.win_w);

  // Per-block staging for the receptive-field union of every image, sized
  // for the largest block; blocks at the edge shrink. Staged taps keep the
  // batch contiguous so both the loads and the reuse reads are unit-stride.
  const std::uint32_t max_uh = p.stride * (plan.fh - 1) + p.win_h;
  const std::uint32_t max_uw = p.stride * (plan.fw - 1) + p.win_w;
  std::vector<float> local(std::uint64_t{max_uh} * max_uw * batch);
  std::vector<float> lane(batch);

  for (std::uint32_t c = 0; c < in.c(); ++c) {
    for (std::uint32_t oh0 = 0; oh0 < h_out; oh0 += plan.fh) {
      const std::uint32_t bh = std::min(plan.fh, h_out - oh0);
      const std::uint32_t uh = p.stride * (bh - 1) + p.win_h;
      for (std::uint32_t ow0 = 0; ow0 < w_out; ow0 += plan.fw) {
        const std::uint32_t bw = std::min(plan.fw, w_out - ow0);
        const std::uint32_t uw = p.stride * (bw - 1) + p.win_w;

        // Each union element is loaded exactly once per image.
        const float* base = src + std::uint64_t{c} * in_chan +
                            std::uint64_t{oh0} * p.stride * in_row +
                            std::uint64_t{ow0} * p.stride * batch;
        for (std::uint32_t y = 0; y < uh; ++y) {
          for (std::uint32_t x = 0; x < uw; ++x) {
            const float* tap = base + std::uint64_t{y} * in_row +
                               std::uint64_t{x} * batch;
            std::copy(tap, tap + batch,
                      local.data() + (std::uint64_t{y} * uw + x) * batch);
          }
        }
        report.input_loads += std::uint64_t{uh} * uw * batch;

        for (std::uint32_t by = 0; by < bh; ++by) {
          for (std::uint32_t bx = 0; bx < bw; ++bx) {
            std::fill(lane.begin(), lane.end(), avg ? 0.0f : kLowest);
            for (std::uint32_t y = 0; y < p.win_h; ++y) {
              for (std::uint32_t x = 0; x < p.win_w; ++x) {
                const float* tap =
                    local.data() +
                    ((std::uint64_t{by} * p.stride + y) * uw +
                     std::uint64_t{bx} * p.stride + x) *
                        batch;
                if (avg) {
                  for (std::uint32_t n = 0; n < batch; ++n) lane[n] += tap[n];
                } else {
                  for (std::uint32_t n = 0; n < batch; ++n) {
                    lane[n] = std::max(lane[n], tap[n]);
                  }
                }
              }
            }
            float* obase = dst + std::uint64_t{c} * out_chan +
                           (std::uint64_t{oh0} + by) * out_row +
                           (std::uint64_t{ow0} + bx) * batch;
            for (std::uint32_t n = 0; n < batch; ++n) {
              obase[n] = avg ? lane[n] * inv_win : lane[n];
            }
            report.output_stores += batch;
          }
        }
      }
    }
  }
  return {std::move(out), report};
}

CoarseningPlan autotune_pool(std::uint32_t n, std::uint32_t c, std::uint32_t h,
                             std::uint32_t w, const PoolParams& p,
                             PoolCostFn measure) {
  if (!measure) {
    // Median-of-5 wall clock on a seeded input of the requested shape.
    auto input = std::make_shared<Tensor4D>(n, c, h, w, Layout::CHWN);
    std::mt19937 rng(42);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    for (std::uint64_t i = 0; i < input->size(); ++i) {
      input->data()[i] = dist(rng);
    }
    measure = [input, p](const CoarseningPlan& plan) {
      double samples[5];
      for (double& s : samples) {
        const auto t0 = std::chrono::steady_clock::now();
        (void)pool_coarsened(*input, p, plan);
        const auto t1 = std::chrono::steady_clock::now();
        s = std::chrono::duration<double>(t1 - t0).count();
      }
      std::sort(std::begin(samples), std::end(samples));
      return samples[2];
    };
  }

  CoarseningPlan best{2, 2};
  double best_cost = measure(best);
  bool grow_h = true;
  bool grow_w = true;
  while (grow_h || grow_w) {
    if (grow_h) {
      CoarseningPlan cand{best.fh + 1, best.fw};
      if (std::uint64_t{cand.fh} * cand.fw > kCoarseningCap) {
        grow_h = false;
      } else {
        const double cost = measure(cand);
        if (cost < best_cost) {
          best = cand;
          best_cost = cost;
        } else {
          grow_h = false;
        }
      }
    }
    if (grow_w) {
      CoarseningPlan cand{best.fh, best.fw + 1};
      if (std::uint64_t{cand.fh} * cand.fw > kCoarseningCap) {
        grow_w = false;
      } else {
        const double cost = measure(cand);
        if (cost < best_cost) {
          best = cand;
          best_cost = cost;
        } else {
          grow_w = false;
        }
      }
    }
  }
  return best;
}

}  // namespace lcnn
