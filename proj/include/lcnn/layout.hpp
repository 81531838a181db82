#pragma once

#include <cstdint>

#include "lcnn/tensor.hpp"

namespace lcnn {

// CHWN<->NCHW keeps C, H, W in the same relative order, so the move flattens
// to a 2D transpose of an [N] x [C*H*W] view. Other pairs permute a middle
// dimension and fall back to the plain 4-loop permutation.
bool flattenable_pair(Layout src, Layout dst);

enum class TransformKind : std::uint8_t { Tiled2D, NaivePermute };

struct TransformPlan {
  Layout src = Layout::NCHW;
  Layout dst = Layout::NCHW;
  std::uint32_t tile = 32;     // square tile edge, power of two in [8, 128]
  bool wide_copy = false;      // paired 8-byte element moves
  TransformKind kind = TransformKind::Tiled2D;
};

// Reference path: direct index-permutation copy, one element at a time.
Tensor4D transform_naive(const Tensor4D& t, Layout dst);

// Cache-tiled path for the flattenable pair. Tiles stage through a
// contiguous scratch buffer so both the read and the write side stay
// unit-stride inside a tile; wide_copy moves two adjacent floats per step
// as a single 8-byte unit on both sides.
Tensor4D transform_tiled(const Tensor4D& t, Layout dst,
                         const TransformPlan& plan);

// Default plan: tile 32, wide copy iff the pair is flattenable and the
// batch extent is at least 64; non-flattenable pairs get the naive marker.
TransformPlan make_plan(Layout src, Layout dst, std::uint32_t n,
                        std::uint32_t c, std::uint32_t h, std::uint32_t w);

// make_plan + dispatch on the plan kind.
Tensor4D transform(const Tensor4D& t, Layout dst);

}  // namespace lcnn
