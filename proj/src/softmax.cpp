#include "lcnn/softmax.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "lcnn/conv.hpp"

namespace lcnn {

namespace {

constexpr std::uint32_t kReduceBlock = 256;

void check_finite(float v) {
  if (!std::isfinite(v)) {
    throw DomainError("softmax: non-finite input");
  }
}

// Deterministic blocked reduction: sequential within each fixed-size block,
// block results combined in order.
float blocked_sum(const float* v, std::uint32_t len) {
  float result = 0.0f;
  for (std::uint32_t b0 = 0; b0 < len; b0 += kReduceBlock) {
    const std::uint32_t bn = std::min(kReduceBlock, len - b0);
    float s = 0.0f;
    for (std::uint32_t i = 0; i < bn; ++i) s += v[b0 + i];
    result += s;
  }
  return result;
}

}  // namespace

Matrix softmax_reference(const Matrix& in, SoftmaxScratch* scratch,
                         PassReport* report) {
  if (in.rows < 1 || in.cols < 1) {
    throw ShapeError("softmax: empty matrix");
  }
  const std::uint32_t n = in.rows;
  const std::uint32_t c = in.cols;
  SoftmaxScratch local;
  SoftmaxScratch& s = scratch ? *scratch : local;
  s.maxv.assign(n, 0.0f);
  s.midv1.assign(std::uint64_t{n} * c, 0.0f);
  s.midv2.assign(std::uint64_t{n} * c, 0.0f);
  s.sumv.assign(n, 0.0f);
  PassReport r;

  // Step 1: per-image maximum.
  for (std::uint32_t i = 0; i < n; ++i) {
    const float* row = in.data.data() + std::uint64_t{i} * c;
    float m = row[0];
    for (std::uint32_t j = 0; j < c; ++j) {
      check_finite(row[j]);
      m = std::max(m, row[j]);
    }
    s.maxv[i] = m;
  }
  r.full_matrix_sweeps += 1;  // read in

  // Step 2: shift by the maximum.
  for (std::uint32_t i = 0; i < n; ++i) {
    const float* row = in.data.data() + std::uint64_t{i} * c;
    float* mid = s.midv1.data() + std::uint64_t{i} * c;
    for (std::uint32_t j = 0; j < c; ++j) mid[j] = row[j] - s.maxv[i];
  }
  r.full_matrix_sweeps += 2;  // read in, write midv1
  r.materializations += 1;    // midv1

  // Step 3: exponentiate.
  for (std::uint64_t i = 0; i < s.midv1.size(); ++i) {
    s.midv2[i] = std::exp(s.midv1[i]);
  }
  r.full_matrix_sweeps += 2;  // read midv1, write midv2
  r.materializations += 1;    // midv2

  // Step 4: per-image sum.
  for (std::uint32_t i = 0; i < n; ++i) {
    s.sumv[i] = blocked_sum(s.midv2.data() + std::uint64_t{i} * c, c);
  }
  r.full_matrix_sweeps += 1;  // read midv2
  r.materializations += 1;    // maxv/sumv vectors

  // Step 5: normalize.
  Matrix out(n, c);
  for (std::uint32_t i = 0; i < n; ++i) {
    const float inv = 1.0f / s.sumv[i];
    const float* mid = s.midv2.data() + std::uint64_t{i} * c;
    float* orow = out.data.data() + std::uint64_t{i} * c;
    for (std::uint32_t j = 0; j < c; ++j) orow[j] = mid[j] * inv;
  }
  r.full_matrix_sweeps += 2;  // read midv2, write out

  if (report) *report = r;
  return out;
}

std::pair<Matrix, PassReport> softmax_fused(const Matrix& in,
                                            std::uint32_t local_buffer_limit) {
  if (in.rows < 1 || in.cols < 1) {
    throw ShapeError("softmax: empty matrix");
  }
  const std::uint32_t n = in.rows;
  const std::uint32_t c = in.cols;
  Matrix out(n, c);
  PassReport r;
  r.materializations = 0;

  if (c <= local_buffer_limit) {
    std::vector<float> local(c);
    for (std::uint32_t i = 0; i < n; ++i) {
      const float* row = in.data.data() + std::uint64_t{i} * c;
      // Stage the row into local storage and reduce the max in the same
      // blocked pass.
      float m = row[0];
      for (std::uint32_t b0 = 0; b0 < c; b0 += kReduceBlock) {
        const std::uint32_t bn = std::min(kReduceBlock, c - b0);
        float bm = row[b0];
        for (std::uint32_t j = 0; j < bn; ++j) {
          const float v = row[b0 + j];
          check_finite(v);
          local[b0 + j] = v;
          bm = std::max(bm, v);
        }
        m = std::max(m, bm);
      }
      // Exponentiate in place and reduce the sum as the blocks complete.
      float sum = 0.0f;
      for (std::uint32_t b0 = 0; b0 < c; b0 += kReduceBlock) {
        const std::uint32_t bn = std::min(kReduceBlock, c - b0);
        float bs = 0.0f;
        for (std::uint32_t j = 0; j < bn; ++j) {
          const float e = std::exp(local[b0 + j] - m);
          local[b0 + j] = e;
          bs += e;
        }
        sum += bs;
      }
      const float inv = 1.0f / sum;
      float* orow = out.data.data() + std::uint64_t{i} * c;
      for (std::uint32_t j = 0; j < c; ++j) orow[j] = local[j] * inv;
    }
    r.full_matrix_sweeps = 2;  // one read of in, one write of out
  } else {
    // Streaming schedule for rows that exceed the local buffer: the row is
    // re-read instead of staged whole; the exponentials land in the output
    // and are normalized in place.
    for (std::uint32_t i = 0; i < n; ++i) {
      const float* row = in.data.data() + std::uint64_t{i} * c;
      float m = row[0];
      for (std::uint32_t b0 = 0; b0 < c; b0 += kReduceBlock) {
        const std::uint32_t bn = std::min(kReduceBlock, c - b0);
        float bm = row[b0];
        for (std::uint32_t j = 0; j < bn; ++j) {
          check_finite(row[b0 + j]);
          bm = std::max(bm, row[b0 + j]);
        }
        m = std::max(m, bm);
      }
      float* orow = out.data.data() + std::uint64_t{i} * c;
      float sum = 0.0f;
      for (std::uint32_t b0 = 0; b0 < c; b0 += kReduceBlock) {
        const std::uint32_t bn = std::min(kReduceBlock, c - b0);
        float bs = 0.0f;
        for (std::uint32_t j = 0; j < bn; ++j) {
          const float e = std::exp(row[b0 + j] - m);
          orow[b0 + j] = e;
          bs += e;
        }
        sum += bs;
      }
      const float inv = 1.0f / sum;
      for (std::uint32_t j = 0; j < c; ++j) orow[j] *= inv;
    }
    r.full_matrix_sweeps = 5;  // in read twice; out written twice, read once
  }
  return {std::move(out), r};
}

Matrix fc_forward(const Matrix& in, const Matrix& weights) {
  return gemm_blocked(in, weights);
}

}  // namespace lcnn
