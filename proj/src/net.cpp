#include "lcnn/net.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "lcnn/layout.hpp"

#include "json.hpp"

namespace lcnn {

namespace {

using nlohmann::json;

[[noreturn]] void fail_layer(const std::string& name, const std::string& why) {
  throw ValidationError("layer '" + name + "': " + why);
}

PoolMode parse_pool_mode(const std::string& name, const json& j) {
  const std::string mode = j.value("mode", "max");
  if (mode == "max") return PoolMode::Max;
  if (mode == "average" || mode == "avg") return PoolMode::Average;
  fail_layer(name, "unknown pool mode '" + mode + "'");
}

std::optional<Layout> parse_layout_field(const std::string& name,
                                         const json& j) {
  const std::string text = j.value("layout", "auto");
  if (text == "auto") return std::nullopt;
  const auto layout = layout_from_name(text);
  if (!layout) fail_layer(name, "unknown layout '" + text + "'");
  if (*layout != Layout::CHWN && *layout != Layout::NCHW) {
    fail_layer(name, "layer layouts are chwn or nchw");
  }
  return layout;
}

std::uint32_t require_u32(const std::string& name, const json& j,
                          const char* key) {
  if (!j.contains(key) || !j[key].is_number_unsigned() || j[key] == 0) {
    fail_layer(name, std::string("missing or invalid '") + key + "'");
  }
  return j[key].get<std::uint32_t>();
}

}  // namespace

NetworkSpec parse_network(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }

  NetworkSpec spec;
  if (!doc.contains("input") || !doc["input"].is_object()) {
    throw ValidationError("config: missing 'input' object");
  }
  const json& input = doc["input"];
  spec.n = require_u32("input", input, "n");
  spec.c = require_u32("input", input, "c");
  spec.h = require_u32("input", input, "h");
  spec.w = require_u32("input", input, "w");

  if (!doc.contains("layers") || !doc["layers"].is_array() ||
      doc["layers"].empty()) {
    throw ValidationError("config: 'layers' must be a non-empty array");
  }

  for (const json& j : doc["layers"]) {
    LayerSpec layer;
    layer.name = j.value("name", "");
    if (layer.name.empty()) {
      throw ValidationError("config: every layer needs a name");
    }
    const std::string kind = j.value("kind", "");
    if (kind == "conv") {
      layer.kind = LayerKind::Convolution;
      ConvGeometry g;
      g.c_out = require_u32(layer.name, j, "c_out");
      g.f = require_u32(layer.name, j, "f");
      g.stride = j.value("stride", 1u);
      g.pad = j.value("pad", 0u);
      if (g.stride < 1) fail_layer(layer.name, "stride must be >= 1");
      layer.geometry = g;
      layer.layout_field = parse_layout_field(layer.name, j);
      if (j.contains("c_in")) {
        layer.declared_c_in = require_u32(layer.name, j, "c_in");
      }
    } else if (kind == "pool") {
      layer.kind = LayerKind::Pooling;
      PoolGeometry g;
      g.win = require_u32(layer.name, j, "win");
      g.stride = j.value("stride", g.win);
      g.mode = parse_pool_mode(layer.name, j);
      layer.geometry = g;
      layer.layout_field = parse_layout_field(layer.name, j);
    } else if (kind == "fc") {
      layer.kind = LayerKind::FullyConnected;
      FcGeometry g;
      g.out = require_u32(layer.name, j, "out");
      layer.geometry = g;
    } else if (kind == "softmax") {
      layer.kind = LayerKind::Softmax;
    } else {
      fail_layer(layer.name, "unsupported layer kind '" + kind +
                                 "' (conv, pool, fc, softmax)");
    }
    spec.layers.push_back(std::move(layer));
  }

  infer_shapes(spec);  // full shape validation
  return spec;
}

std::vector<StageShape> infer_shapes(const NetworkSpec& spec) {
  if (spec.layers.empty()) {
    throw ValidationError("config: network has no layers");
  }
  std::vector<StageShape> shapes;
  StageShape cur{false, spec.n, spec.c, spec.h, spec.w};
  shapes.push_back(cur);
  std::string producer = "input";

  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    if (layer.kind == LayerKind::Softmax && i + 1 != spec.layers.size()) {
      fail_layer(layer.name, "softmax must be the last layer");
    }
    switch (layer.kind) {
      case LayerKind::Convolution: {
        if (cur.flat) fail_layer(layer.name, "conv after the classifier tail");
        const auto& g = std::get<ConvGeometry>(layer.geometry);
        if (layer.declared_c_in && *layer.declared_c_in != cur.c) {
          fail_layer(layer.name,
                     "expects c_in=" + std::to_string(*layer.declared_c_in) +
                         " but layer '" + producer + "' produces c=" +
                         std::to_string(cur.c));
        }
        try {
          const auto [ho, wo] = conv_output_extents(
              cur.h, cur.w, g.f, g.f, ConvParams{g.stride, g.pad});
          cur = {false, cur.n, g.c_out, ho, wo};
        } catch (const Error& e) {
          fail_layer(layer.name, e.what());
        }
        break;
      }
      case LayerKind::Pooling: {
        if (cur.flat) fail_layer(layer.name, "pool after the classifier tail");
        const auto& g = std::get<PoolGeometry>(layer.geometry);
        if (g.win > cur.h || g.win > cur.w) {
          fail_layer(layer.name, "window larger than its input map");
        }
        const auto [ho, wo] = pool_output_extents(
            cur.h, cur.w, PoolParams{g.win, g.win, g.stride, g.mode});
        cur = {false, cur.n, cur.c, ho, wo};
        break;
      }
      case LayerKind::FullyConnected: {
        const auto& g = std::get<FcGeometry>(layer.geometry);
        cur = {true, cur.n, g.out, 1, 1};
        break;
      }
      case LayerKind::Softmax: {
        if (!cur.flat && (cur.h != 1 || cur.w != 1)) {
          fail_layer(layer.name,
                     "needs a 2D input (flatten through fc, or h=w=1)");
        }
        cur = {true, cur.n, cur.c, 1, 1};
        break;
      }
      case LayerKind::Input:
        fail_layer(layer.name, "'input' is not a runnable layer");
    }
    shapes.push_back(cur);
    producer = layer.name;
  }
  return shapes;
}

NetworkSpec annotate_layouts(NetworkSpec spec, const HeuristicThresholds& th) {
  const std::vector<StageShape> shapes = infer_shapes(spec);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    LayerSpec& layer = spec.layers[i];
    if (layer.layout_field) continue;
    const StageShape& in = shapes[i];
    layer.layout_field = choose_layout(layer.kind, in.n, in.c, th);
  }
  return spec;
}

std::vector<TransformStep> plan_transforms(const NetworkSpec& spec) {
  std::vector<TransformStep> steps;
  std::optional<Layout> prev;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    if (layer.kind != LayerKind::Convolution &&
        layer.kind != LayerKind::Pooling) {
      continue;
    }
    if (!layer.layout_field) {
      fail_layer(layer.name, "no layout set; annotate the network first");
    }
    if (prev && *prev != *layer.layout_field) {
      steps.push_back({i, *prev, *layer.layout_field});
    }
    prev = *layer.layout_field;
  }
  return steps;
}

FilterBank default_conv_weights(std::uint64_t seed, std::size_t layer_index,
                                const ConvGeometry& geometry,
                                std::uint32_t c_in) {
  std::mt19937 rng(static_cast<std::uint32_t>(
      seed ^ (0x9E3779B9u * (static_cast<std::uint32_t>(layer_index) + 1))));
  const float scale =
      1.0f / std::sqrt(static_cast<float>(c_in) * geometry.f * geometry.f);
  std::uniform_real_distribution<float> dist(-scale, scale);
  FilterBank f(geometry.c_out, c_in, geometry.f, geometry.f);
  for (std::uint64_t i = 0; i < f.size(); ++i) f.data()[i] = dist(rng);
  return f;
}

Matrix default_fc_weights(std::uint64_t seed, std::size_t layer_index,
                          std::uint32_t k, std::uint32_t out) {
  std::mt19937 rng(static_cast<std::uint32_t>(
      seed ^ (0x85EBCA6Bu * (static_cast<std::uint32_t>(layer_index) + 1))));
  const float scale = 1.0f / std::sqrt(static_cast<float>(k));
  std::uniform_real_distribution<float> dist(-scale, scale);
  Matrix w(k, out);
  for (auto& v : w.data) v = dist(rng);
  return w;
}

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t elapsed_ns(Clock::time_point t0) {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0)
          .count());
}

const char* transform_algorithm(const TransformPlan& plan) {
  if (plan.kind == TransformKind::NaivePermute) return "naive";
  return plan.wide_copy ? "tiled+wide" : "tiled";
}

// Flatten an NCHW tensor to an N x (C*H*W) matrix; the row payload is already
// contiguous.
Matrix flatten_nchw(const Tensor4D& t) {
  Matrix m(t.n(), t.c() * t.h() * t.w());
  std::copy(t.data(), t.data() + t.size(), m.data.data());
  return m;
}

}  // namespace

RunResult run_network(const NetworkSpec& spec, const Tensor4D& input,
                      const RunOptions& options) {
  const std::vector<StageShape> shapes = infer_shapes(spec);
  if (input.n() != spec.n || input.c() != spec.c || input.h() != spec.h ||
      input.w() != spec.w) {
    throw ShapeError("run_network: input dims do not match the spec");
  }

  TimingReport report;
  auto add_entry = [&report](LayerTiming entry) {
    report.total_nanos += entry.nanos;
    report.entries.push_back(std::move(entry));
  };

  Tensor4D cur4 = input;
  Matrix cur2;
  bool flat = false;

  auto to_layout = [&](Layout target, const std::string& consumer) {
    if (cur4.layout() == target) return;
    const TransformPlan plan = make_plan(cur4.layout(), target, cur4.n(),
                                         cur4.c(), cur4.h(), cur4.w());
    const auto t0 = Clock::now();
    cur4 = plan.kind == TransformKind::Tiled2D
               ? transform_tiled(cur4, target, plan)
               : transform_naive(cur4, target);
    add_entry({"transform_before_" + consumer, "transform",
               std::string(layout_name(plan.src)) + ":" +
                   layout_name(plan.dst),
               transform_algorithm(plan), elapsed_ns(t0), std::nullopt});
  };

  // Flatten for the classifier tail; data must be NCHW first so each image's
  // features are contiguous. The repack is charged to the consuming layer.
  auto flatten_now = [&]() -> std::uint64_t {
    const auto t0 = Clock::now();
    if (cur4.layout() != Layout::NCHW) {
      cur4 = transform(cur4, Layout::NCHW);
    }
    cur2 = flatten_nchw(cur4);
    flat = true;
    return elapsed_ns(t0);
  };

  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    try {
      switch (layer.kind) {
        case LayerKind::Convolution: {
          const auto& g = std::get<ConvGeometry>(layer.geometry);
          if (!layer.layout_field) {
            fail_layer(layer.name, "no layout set; annotate the network");
          }
          to_layout(*layer.layout_field, layer.name);
          const FilterBank weights =
              options.conv_weights
                  ? options.conv_weights(i, g, cur4.c())
                  : default_conv_weights(options.seed, i, g, cur4.c());
          const ConvParams params{g.stride, g.pad};
          const bool fft = options.use_fft &&
                           *layer.layout_field == Layout::NCHW &&
                           g.stride == 1;
          const auto t0 = Clock::now();
          Tensor4D next = *layer.layout_field == Layout::CHWN
                              ? conv_direct(cur4, weights, params)
                          : fft ? conv_fft(cur4, weights, params)
                                : conv_gemm(cur4, weights, params);
          const std::uint64_t ns = elapsed_ns(t0);
          cur4 = std::move(next);
          add_entry({layer.name, "conv", layout_name(*layer.layout_field),
                     *layer.layout_field == Layout::CHWN ? "direct"
                     : fft                               ? "fft"
                                                         : "gemm",
                     ns, std::nullopt});
          break;
        }
        case LayerKind::Pooling: {
          const auto& g = std::get<PoolGeometry>(layer.geometry);
          if (!layer.layout_field) {
            fail_layer(layer.name, "no layout set; annotate the network");
          }
          to_layout(*layer.layout_field, layer.name);
          const PoolParams params{g.win, g.win, g.stride, g.mode};
          const auto t0 = Clock::now();
          std::pair<Tensor4D, AccessReport> result =
              *layer.layout_field == Layout::CHWN
                  ? pool_coarsened(cur4, params, CoarseningPlan{2, 2})
                  : pool_layout(cur4, params);
          const std::uint64_t ns = elapsed_ns(t0);
          cur4 = std::move(result.first);
          add_entry({layer.name, "pool", layout_name(*layer.layout_field),
                     *layer.layout_field == Layout::CHWN ? "coarsened"
                                                         : "plain",
                     ns, result.second});
          break;
        }
        case LayerKind::FullyConnected: {
          const auto& g = std::get<FcGeometry>(layer.geometry);
          std::uint64_t ns = flat ? 0 : flatten_now();
          const Matrix weights =
              options.fc_weights
                  ? options.fc_weights(i, cur2.cols, g.out)
                  : default_fc_weights(options.seed, i, cur2.cols, g.out);
          const auto t0 = Clock::now();
          cur2 = fc_forward(cur2, weights);
          ns += elapsed_ns(t0);
          add_entry({layer.name, "fc", "nchw", "gemm", ns, std::nullopt});
          break;
        }
        case LayerKind::Softmax: {
          std::uint64_t ns = flat ? 0 : flatten_now();
          const auto t0 = Clock::now();
          cur2 = softmax_fused(cur2).first;
          ns += elapsed_ns(t0);
          add_entry({layer.name, "softmax", "nchw", "fused", ns,
                     std::nullopt});
          break;
        }
        case LayerKind::Input:
          fail_layer(layer.name, "'input' is not runnable");
      }
    } catch (const ValidationError&) {
      throw;
    } catch (const Error& e) {
      fail_layer(layer.name, e.what());
    }
  }

  RunResult result{flat ? std::variant<Tensor4D, Matrix>(std::move(cur2))
                        : std::variant<Tensor4D, Matrix>(std::move(cur4)),
                   std::move(report)};
  return result;
}

NetworkSpec profile_refine(const NetworkSpec& spec, const RunOptions& options) {
  const std::vector<StageShape> shapes = infer_shapes(spec);
  NetworkSpec refined = spec;

  // Layout of the nearest 4D neighbors, for charging transform costs.
  auto prev_4d_layout = [&](std::size_t i) -> std::optional<Layout> {
    while (i > 0) {
      --i;
      const LayerSpec& l = refined.layers[i];
      if (l.kind == LayerKind::Convolution || l.kind == LayerKind::Pooling) {
        return l.layout_field;
      }
    }
    return std::nullopt;
  };
  auto next_4d_layout = [&](std::size_t i) -> std::optional<Layout> {
    for (++i; i < refined.layers.size(); ++i) {
      const LayerSpec& l = refined.layers[i];
      if (l.kind == LayerKind::Convolution || l.kind == LayerKind::Pooling) {
        return l.layout_field;
      }
    }
    return std::nullopt;
  };

  std::mt19937 rng(static_cast<std::uint32_t>(options.seed));
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);

  for (std::size_t i = 0; i < refined.layers.size(); ++i) {
    LayerSpec& layer = refined.layers[i];
    if (layer.kind != LayerKind::Convolution || !layer.layout_field) continue;
    const auto& g = std::get<ConvGeometry>(layer.geometry);
    const StageShape& in_shape = shapes[i];

    const FilterBank weights =
        options.conv_weights
            ? options.conv_weights(i, g, in_shape.c)
            : default_conv_weights(options.seed, i, g, in_shape.c);
    const ConvParams params{g.stride, g.pad};

    auto time_choice = [&](Layout candidate) -> double {
      Tensor4D in(in_shape.n, in_shape.c, in_shape.h, in_shape.w, candidate);
      for (std::uint64_t k = 0; k < in.size(); ++k) in.data()[k] = dist(rng);
      double seconds = 0.0;
      const auto prev = prev_4d_layout(i);
      if (prev && *prev != candidate) {
        const auto t0 = Clock::now();
        (void)transform(in.with_layout_tag(*prev), candidate);
        seconds += 1e-9 * static_cast<double>(elapsed_ns(t0));
      }
      const auto t0 = Clock::now();
      Tensor4D out = candidate == Layout::CHWN
                         ? conv_direct(in, weights, params)
                         : conv_gemm(in, weights, params);
      seconds += 1e-9 * static_cast<double>(elapsed_ns(t0));
      const auto next = next_4d_layout(i);
      const Layout tail_target = next ? *next : Layout::NCHW;
      if (tail_target != candidate) {
        const auto t1 = Clock::now();
        (void)transform(out, tail_target);
        seconds += 1e-9 * static_cast<double>(elapsed_ns(t1));
      }
      return seconds;
    };

    const Layout current = *layer.layout_field;
    const Layout alternative =
        current == Layout::CHWN ? Layout::NCHW : Layout::CHWN;
    if (time_choice(alternative) < time_choice(current)) {
      layer.layout_field = alternative;
    }
  }
  return refined;
}

std::string timing_report_csv(const TimingReport& report) {
  std::ostringstream out;
  out << "layer,kind,layout,algorithm,nanos,input_loads,output_stores\n";
  for (const LayerTiming& e : report.entries) {
    out << e.name << ',' << e.kind << ',' << e.layout << ',' << e.algorithm
        << ',' << e.nanos << ',';
    if (e.access) {
      out << e.access->input_loads << ',' << e.access->output_stores;
    } else {
      out << ',';
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace lcnn
