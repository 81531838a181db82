#pragma once

#include <cstdint>
#include <functional>
#include <utility>

#include "lcnn/tensor.hpp"

namespace lcnn {

enum class PoolMode : std::uint8_t { Max, Average };

struct PoolParams {
  std::uint32_t win_h = 2;
  std::uint32_t win_w = 2;
  std::uint32_t stride = 2;
  PoolMode mode = PoolMode::Max;
};

// One task computes an fh x fw block of outputs, loading the union of their
// receptive fields into local storage exactly once.
struct CoarseningPlan {
  std::uint32_t fh = 1;
  std::uint32_t fw = 1;
};

// fh * fw may not exceed this (local accumulator pressure).
inline constexpr std::uint32_t kCoarseningCap = 64;

struct AccessReport {
  std::uint64_t input_loads = 0;
  std::uint64_t output_stores = 0;
  std::uint64_t distinct_inputs = 0;
};

std::pair<std::uint32_t, std::uint32_t> pool_output_extents(
    std::uint32_t h, std::uint32_t w, const PoolParams& p);

// Reference path: any input layout, NCHW output, 64-bit accumulation.
Tensor4D pool_oracle(const Tensor4D& in, const PoolParams& p);

// Layout-specialized kernel (CHWN or NCHW, output keeps the input layout).
// Issues win_h*win_w input loads per output element; the report counts every
// one of them.
std::pair<Tensor4D, AccessReport> pool_layout(const Tensor4D& in,
                                              const PoolParams& p);

// Working-set-coarsened CHWN kernel: per (channel, output block, image) task,
// the receptive-field union is loaded once, so overlapped windows stop paying
// for shared elements.
std::pair<Tensor4D, AccessReport> pool_coarsened(const Tensor4D& in,
                                                 const PoolParams& p,
                                                 const CoarseningPlan& plan);

// Cost of running pool_coarsened under a candidate plan; lower is better.
using PoolCostFn = std::function<double(const CoarseningPlan&)>;

// Hill climb over the coarsening factors: start at (2,2), alternately grow
// fh then fw by one while the measured cost improves, stop each direction on
// its first non-improvement, never exceed the accumulator cap. With no
// measure function supplied, a seeded tensor of the given dims is pooled and
// timed (median of 5).
CoarseningPlan autotune_pool(std::uint32_t n, std::uint32_t c, std::uint32_t h,
                             std::uint32_t w, const PoolParams& p,
                             PoolCostFn measure = {});

}  // namespace lcnn
