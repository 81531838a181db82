#include "lcnn/layout.hpp"

#include <cstring>
#include <string>
#include <vector>

namespace lcnn {

namespace {

bool power_of_two(std::uint32_t v) { return v != 0 && (v & (v - 1)) == 0; }

void validate_plan(const TransformPlan& plan, const Tensor4D& t) {
  if (plan.src != t.layout()) {
    throw PlanError("transform_tiled: plan source layout does not match tensor");
  }
  if (!flattenable_pair(plan.src, plan.dst)) {
    throw PlanError("transform_tiled: unsupported layout pair (only CHWN<->NCHW flattens)");
  }
  if (!power_of_two(plan.tile) || plan.tile < 8 || plan.tile > 128) {
    throw PlanError("transform_tiled: tile must be a power of two in [8, 128]");
  }
  if (plan.wide_copy && t.n() < 64) {
    throw PlanError("transform_tiled: wide copy requires N >= 64");
  }
}

// dst (cols x rows) = transpose of src (rows x cols), both row-major.
// Each tile is staged through `scratch` so the strided side of the transpose
// always lands in a hot, contiguous buffer.
void transpose2d_tiled(const float* src, float* dst, std::uint64_t rows,
                       std::uint64_t cols, std::uint32_t tile, bool wide,
                       std::vector<float>& scratch) {
  const std::uint64_t t = tile;
  scratch.resize(t * t);
  float* tb = scratch.data();

  for (std::uint64_t r0 = 0; r0 < rows; r0 += t) {
    const std::uint64_t rn = std::min(t, rows - r0);
    for (std::uint64_t c0 = 0; c0 < cols; c0 += t) {
      const std::uint64_t cn = std::min(t, cols - c0);

      for (std::uint64_t r = 0; r < rn; ++r) {
        const float* in = src + (r0 + r) * cols + c0;
        float* row = tb + r * t;
        std::uint64_t c = 0;
        if (wide) {
          for (; c + 2 <= cn; c += 2) {
            std::memcpy(row + c, in + c, 2 * sizeof(float));
          }
        }
        for (; c < cn; ++c) row[c] = in[c];
      }

      for (std::uint64_t c = 0; c < cn; ++c) {
        float* out = dst + (c0 + c) * rows + r0;
        std::uint64_t r = 0;
        if (wide) {
          for (; r + 2 <= rn; r += 2) {
            const float pair[2] = {tb[r * t + c], tb[(r + 1) * t + c]};
            std::memcpy(out + r, pair, 2 * sizeof(float));
          }
        }
        for (; r < rn; ++r) out[r] = tb[r * t + c];
      }
    }
  }
}

}  // namespace

bool flattenable_pair(Layout src, Layout dst) {
  return (src == Layout::CHWN && dst == Layout::NCHW) ||
         (src == Layout::NCHW && dst == Layout::CHWN);
}

Tensor4D transform_naive(const Tensor4D& t, Layout dst) {
  Tensor4D out(t.n(), t.c(), t.h(), t.w(), dst);
  const Strides si = t.strides();
  const Strides so = out.strides();
  const float* in = t.data();
  float* o = out.data();
  for (std::uint64_t n = 0; n < t.n(); ++n) {
    for (std::uint64_t c = 0; c < t.c(); ++c) {
      for (std::uint64_t h = 0; h < t.h(); ++h) {
        std::uint64_t oi = n * si.n + c * si.c + h * si.h;
        std::uint64_t oo = n * so.n + c * so.c + h * so.h;
        for (std::uint64_t w = 0; w < t.w(); ++w) {
          o[oo] = in[oi];
          oi += si.w;
          oo += so.w;
        }
      }
    }
  }
  return out;
}

Tensor4D transform_tiled(const Tensor4D& t, Layout dst,
                         const TransformPlan& plan) {
  if (plan.dst != dst) {
    throw PlanError("transform_tiled: plan destination layout does not match");
  }
  validate_plan(plan, t);

  const std::uint64_t batch = t.n();
  const std::uint64_t flat = std::uint64_t{t.c()} * t.h() * t.w();
  Tensor4D out(t.n(), t.c(), t.h(), t.w(), dst);
  std::vector<float> scratch;
  if (t.layout() == Layout::CHWN) {
    // [C*H*W][N] -> [N][C*H*W]
    transpose2d_tiled(t.data(), out.data(), flat, batch, plan.tile,
                      plan.wide_copy, scratch);
  } else {
    // [N][C*H*W] -> [C*H*W][N]
    transpose2d_tiled(t.data(), out.data(), batch, flat, plan.tile,
                      plan.wide_copy, scratch);
  }
  return out;
}

TransformPlan make_plan(Layout src, Layout dst, std::uint32_t n, std::uint32_t,
                        std::uint32_t, std::uint32_t) {
  TransformPlan plan;
  plan.src = src;
  plan.dst = dst;
  plan.tile = 32;
  if (flattenable_pair(src, dst)) {
    plan.kind = TransformKind::Tiled2D;
    plan.wide_copy = n >= 64;
  } else {
    plan.kind = TransformKind::NaivePermute;
    plan.wide_copy = false;
  }
  return plan;
}

Tensor4D transform(const Tensor4D& t, Layout dst) {
  const TransformPlan plan = make_plan(t.layout(), dst, t.n(), t.c(), t.h(), t.w());
  if (plan.kind == TransformKind::Tiled2D) {
    return transform_tiled(t, dst, plan);
  }
  return transform_naive(t, dst);
}

}  // namespace lcnn
