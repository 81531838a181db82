#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lcnn/conv.hpp"
#include "lcnn/pool.hpp"
#include "lcnn/select.hpp"
#include "lcnn/softmax.hpp"
#include "lcnn/tensor.hpp"

namespace lcnn {

struct ConvGeometry {
  std::uint32_t c_out = 1;
  std::uint32_t f = 1;
  std::uint32_t stride = 1;
  std::uint32_t pad = 0;
};

struct PoolGeometry {
  std::uint32_t win = 2;
  std::uint32_t stride = 2;
  PoolMode mode = PoolMode::Max;
};

struct FcGeometry {
  std::uint32_t out = 1;
};

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::Convolution;
  std::variant<std::monostate, ConvGeometry, PoolGeometry, FcGeometry>
      geometry;
  std::optional<Layout> layout_field;  // unset = decide by heuristic
  std::optional<std::uint32_t> declared_c_in;  // optional cross-check
};

struct NetworkSpec {
  std::uint32_t n = 1, c = 1, h = 1, w = 1;  // input dims
  std::vector<LayerSpec> layers;
};

// Shape of the value flowing between layers: 4D until the classifier tail
// flattens it, 2D afterwards.
struct StageShape {
  bool flat = false;
  std::uint32_t n = 0, c = 0, h = 0, w = 0;  // 2D stages use n x c
};

// Parse and validate the JSON network description; throws ValidationError
// with the offending layer named. Returns the spec with geometry filled in.
NetworkSpec parse_network(const std::string& json_text);

// Per-layer shapes after inference (index 0 = input, index i+1 = output of
// layer i). parse_network runs this as part of validation.
std::vector<StageShape> infer_shapes(const NetworkSpec& spec);

// Single forward scan setting every unset layout field: conv and pool via
// choose_layout, the 2D tail layers to NCHW. Explicit fields are kept, so
// the pass is idempotent.
NetworkSpec annotate_layouts(NetworkSpec spec, const HeuristicThresholds& th);

struct TransformStep {
  std::size_t position;  // index of the consuming layer
  Layout src;
  Layout dst;
};

// One transform per adjacent pair of 4D layers whose layouts differ; nothing
// where they match. The flatten into the classifier tail is the fc layer's
// own business and never appears here.
std::vector<TransformStep> plan_transforms(const NetworkSpec& spec);

struct LayerTiming {
  std::string name;
  std::string kind;
  std::string layout;
  std::string algorithm;
  std::uint64_t nanos = 0;
  std::optional<AccessReport> access;
};

struct TimingReport {
  std::vector<LayerTiming> entries;
  std::uint64_t total_nanos = 0;
};

std::string timing_report_csv(const TimingReport& report);

// Weight sources are injectable so tests can pin exact filters; the default
// draws uniform values scaled by fan-in from a seeded generator, the same
// values for a given (seed, layer index) regardless of layout choices.
using ConvWeightFn = std::function<FilterBank(
    std::size_t layer_index, const ConvGeometry& geometry, std::uint32_t c_in)>;
using FcWeightFn = std::function<Matrix(std::size_t layer_index,
                                        std::uint32_t k, std::uint32_t out)>;

struct RunOptions {
  bool use_fft = false;  // NCHW convolutions use the FFT path when they can
  std::uint64_t seed = 42;
  ConvWeightFn conv_weights;
  FcWeightFn fc_weights;
};

struct RunResult {
  std::variant<Tensor4D, Matrix> output;
  TimingReport report;
};

// Execute the network: transforms are inserted exactly where plan_transforms
// says, each 4D layer runs its layout's preferred kernel, the tail flattens
// to a matrix. Layer failures are rethrown with the layer name attached.
RunResult run_network(const NetworkSpec& spec, const Tensor4D& input,
                      const RunOptions& options = {});

// One-time profiling refinement: time each convolution layer under both
// layouts, charging the layout-boundary transforms each choice would incur,
// and flip the annotation where the alternative wins.
NetworkSpec profile_refine(const NetworkSpec& spec, const RunOptions& options = {});

FilterBank default_conv_weights(std::uint64_t seed, std::size_t layer_index,
                                const ConvGeometry& geometry,
                                std::uint32_t c_in);
Matrix default_fc_weights(std::uint64_t seed, std::size_t layer_index,
                          std::uint32_t k, std::uint32_t out);

}  // namespace lcnn
