#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "lcnn/tensor.hpp"

namespace lcnn {

enum class LayerKind : std::uint8_t {
  Convolution,
  Pooling,
  Softmax,
  FullyConnected,
  Input,
};

const char* layer_kind_name(LayerKind kind);

// Channel and batch cutoffs steering the per-layer layout choice.
struct HeuristicThresholds {
  std::uint32_t c_t = 32;
  std::uint32_t n_t = 128;
};

// Threshold presets for two reference GPU generations; calibrate() derives
// host-specific values instead.
inline constexpr HeuristicThresholds kTitanBlack{32, 128};
inline constexpr HeuristicThresholds kTitanX{128, 64};
std::optional<HeuristicThresholds> preset_by_name(std::string_view name);

// Layout choice per layer: pooling always prefers CHWN; convolution prefers
// CHWN when c < c_t (strict) or n >= n_t (inclusive), otherwise NCHW; the 2D
// tail layers (softmax, fully-connected) and the input tag report NCHW for
// transform bookkeeping.
Layout choose_layout(LayerKind kind, std::uint32_t n, std::uint32_t c,
                     const HeuristicThresholds& th);

// Wall-clock seconds for one convolution run of the calibration fixture
// with the batch and channel extents overridden; the layout picks the
// implementation (CHWN -> direct kernel, NCHW -> matrix-product kernel).
using ConvBenchFn =
    std::function<double(Layout layout, std::uint32_t n, std::uint32_t c)>;

inline constexpr std::uint32_t kCalibrationBatchSweep[] = {16, 32, 64, 128};
inline constexpr std::uint32_t kCalibrationChannelSweep[] = {3,  16,  32,
                                                             64, 128, 256};

// One-time profiling sweep: batch sizes at fixed large channel count, then
// channel counts at fixed batch, both on a CONV7-shaped layer. c_t is the
// smallest swept C where the NCHW path first wins, n_t the smallest swept N
// where the CHWN path wins; no crossover clamps past the sweep end.
HeuristicThresholds calibrate(const ConvBenchFn& bench);

// Default bench: times conv_direct / conv_gemm on a seeded CONV7-shaped
// layer, dims divided by `scale`, median of `repeats` runs.
ConvBenchFn host_conv_bench(std::uint32_t scale = 4, std::uint32_t repeats = 3);

struct CalibrationRecord {
  HeuristicThresholds thresholds;
  std::string host;
  std::string timestamp;  // ISO 8601, UTC
};

// One text record: `c_t=<int> n_t=<int> host=<string> timestamp=<iso8601>`.
void write_calibration(const std::filesystem::path& path,
                       const CalibrationRecord& record);
CalibrationRecord read_calibration(const std::filesystem::path& path);
CalibrationRecord make_calibration_record(HeuristicThresholds th);

}  // namespace lcnn
