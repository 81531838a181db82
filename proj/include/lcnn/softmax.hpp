#pragma once

#include <cstdint>
#include <utility>

#include "lcnn/tensor.hpp"

namespace lcnn {

// Intermediates of the five-pass reference path, one entry per pass output.
struct SoftmaxScratch {
  std::vector<float> maxv;   // per-image maximum
  std::vector<float> midv1;  // shifted logits
  std::vector<float> midv2;  // exponentials
  std::vector<float> sumv;   // per-image sum
};

// Instrumentation for the memory traffic of a softmax run: how many
// intermediate arrays were written out, and how many complete N x C sweeps
// (reads or writes of a full matrix) the pass structure performs.
struct PassReport {
  std::uint32_t materializations = 0;
  std::uint32_t full_matrix_sweeps = 0;
};

// Literal five-pass algorithm, one pass per step, each materializing its
// intermediate in the scratch area. Throws DomainError on non-finite input.
Matrix softmax_reference(const Matrix& in, SoftmaxScratch* scratch = nullptr,
                         PassReport* report = nullptr);

// Single-pass version: each row is staged once into local storage, reduced
// blockwise for the max and the sum, and written back exactly once. Rows
// wider than local_buffer_limit fall back to a streaming two-phase schedule
// with identical results.
std::pair<Matrix, PassReport> softmax_fused(
    const Matrix& in, std::uint32_t local_buffer_limit = 16384);

// Fully-connected layer: plain blocked matrix product (N x K) * (K x C).
Matrix fc_forward(const Matrix& in, const Matrix& weights);

}  // namespace lcnn
