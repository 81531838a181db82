#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lcnn/fixtures.hpp"
#include "lcnn/tensor.hpp"

namespace lcnn {

struct BenchOptions {
  std::uint32_t scale = 8;
  std::uint32_t repeats = 5;
  std::uint64_t seed = 42;
  bool tune_pooling = false;  // hill-climbed coarsening instead of (2,2)
  std::string layout = "all";     // chwn | nchw | all
  std::string algorithm = "all";  // direct|gemm|fft|plain|coarsened|
                                  // reference|fused | all
};

struct BenchRow {
  std::string fixture;
  std::string layout;
  std::string algorithm;
  std::uint64_t nanos = 0;
  double gbytes_per_s = 0.0;
  std::optional<std::uint64_t> input_loads;
  std::string verified;  // "ok" or "skip(<reason>)"
  bool skipped = false;
};

// Every combination a fixture supports, each correctness-checked against the
// reference path before its timing is taken; a wrong answer aborts the run
// with the fixture id. Incompatible combinations come back as skip rows.
std::vector<BenchRow> bench_layer(const Fixture& fx, const BenchOptions& opt);

struct TransformRow {
  std::string dims;
  std::string method;  // naive | tiled | tiled+wide
  std::optional<std::uint64_t> nanos;  // empty = not applicable
  std::optional<double> gbytes_per_s;
};

std::vector<TransformRow> bench_transform(std::uint32_t n, std::uint32_t c,
                                          std::uint32_t h, std::uint32_t w,
                                          std::uint32_t repeats,
                                          std::uint64_t seed = 42);

std::string bench_rows_csv(const std::vector<BenchRow>& rows);
std::string transform_rows_csv(const std::vector<TransformRow>& rows);

}  // namespace lcnn
