#include "lcnn/bench.hpp"

#include <algorithm>
#include <chrono>
#include <random>
#include <sstream>

#include "lcnn/conv.hpp"
#include "lcnn/layout.hpp"
#include "lcnn/pool.hpp"
#include "lcnn/softmax.hpp"

namespace lcnn {

namespace {

using Clock = std::chrono::steady_clock;

// Median wall clock with one discarded warm-up run.
template <typename Fn>
std::uint64_t median_nanos(std::uint32_t repeats, Fn&& fn) {
  repeats = std::max(1u, repeats);
  fn();  // warm-up
  std::vector<std::uint64_t> samples(repeats);
  for (std::uint64_t& s : samples) {
    const auto t0 = Clock::now();
    fn();
    s = static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0)
            .count());
  }
  std::sort(samples.begin(), samples.end());
  return samples[samples.size() / 2];
}

double to_gbps(std::uint64_t bytes, std::uint64_t nanos) {
  if (nanos == 0) return 0.0;
  return static_cast<double>(bytes) / static_cast<double>(nanos);
}

void fill_seeded(float* data, std::uint64_t count, std::uint64_t seed) {
  std::mt19937 rng(static_cast<std::uint32_t>(seed));
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  for (std::uint64_t i = 0; i < count; ++i) data[i] = dist(rng);
}

bool wants(const BenchOptions& opt, const char* layout,
           const std::string& algorithm) {
  if (opt.layout != "all" && opt.layout != layout) return false;
  if (opt.algorithm != "all" &&
      algorithm.rfind(opt.algorithm, 0) != 0) {
    return false;
  }
  return true;
}

[[noreturn]] void verification_failure(const std::string& id,
                                       const std::string& algorithm) {
  throw Error("bench: " + id + " " + algorithm +
              " failed its correctness check against the reference; "
              "not reporting timings");
}

std::vector<BenchRow> bench_conv(const Fixture& fx, const BenchOptions& opt) {
  Tensor4D base(fx.n, fx.c, fx.h, fx.w, Layout::NCHW);
  fill_seeded(base.data(), base.size(), opt.seed);
  FilterBank weights(fx.c_out, fx.c, fx.f, fx.f);
  fill_seeded(weights.data(), weights.size(), opt.seed + 1);
  const ConvParams params{fx.stride, fx.pad};
  const Tensor4D reference = conv_oracle(base, weights, params);
  const Tensor4D chwn = transform(base, Layout::CHWN);
  const std::uint64_t bytes =
      (base.size() + weights.size() + reference.size()) * 4;

  std::vector<BenchRow> rows;
  auto add = [&](const char* layout, const char* algorithm,
                 const Tensor4D& in, auto&& kernel, float tol) {
    if (!wants(opt, layout, algorithm)) return;
    const Tensor4D out = kernel(in);
    if (!approx_equal(out, reference, tol)) {
      verification_failure(fx.id, algorithm);
    }
    const std::uint64_t ns = median_nanos(opt.repeats, [&] { kernel(in); });
    rows.push_back({fx.id, layout, algorithm, ns, to_gbps(bytes, ns),
                    std::nullopt, "ok", false});
  };

  add("chwn", "direct", chwn,
      [&](const Tensor4D& in) { return conv_direct(in, weights, params); },
      1e-5f);
  add("nchw", "direct", base,
      [&](const Tensor4D& in) { return conv_direct(in, weights, params); },
      1e-5f);
  add("nchw", "gemm", base,
      [&](const Tensor4D& in) { return conv_gemm(in, weights, params); },
      1e-5f);
  if (fx.stride == 1) {
    add("nchw", "fft", base,
        [&](const Tensor4D& in) { return conv_fft(in, weights, params); },
        1e-3f);
  } else if (wants(opt, "nchw", "fft")) {
    rows.push_back({fx.id, "nchw", "fft", 0, 0.0, std::nullopt,
                    "skip(stride unsupported)", true});
  }
  return rows;
}

std::vector<BenchRow> bench_pool(const Fixture& fx, const BenchOptions& opt) {
  Tensor4D base(fx.n, fx.c, fx.h, fx.w, Layout::NCHW);
  fill_seeded(base.data(), base.size(), opt.seed);
  const PoolParams params{fx.win, fx.win, fx.pool_stride, fx.mode};
  const Tensor4D reference = pool_oracle(base, params);
  const Tensor4D chwn = transform(base, Layout::CHWN);
  const float tol = fx.mode == PoolMode::Max ? 0.0f : 1e-6f;
  const std::uint64_t bytes = (base.size() + reference.size()) * 4;

  std::vector<BenchRow> rows;
  auto add = [&](const char* layout, const std::string& algorithm,
                 const Tensor4D& in, auto&& kernel) {
    if (!wants(opt, layout, algorithm)) return;
    auto [out, access] = kernel(in);
    if (!approx_equal(out, reference, tol)) {
      verification_failure(fx.id, algorithm);
    }
    const std::uint64_t ns = median_nanos(opt.repeats, [&] { kernel(in); });
    rows.push_back({fx.id, layout, algorithm, ns, to_gbps(bytes, ns),
                    access.input_loads, "ok", false});
  };

  add("chwn", "plain", chwn,
      [&](const Tensor4D& in) { return pool_layout(in, params); });
  add("nchw", "plain", base,
      [&](const Tensor4D& in) { return pool_layout(in, params); });
  CoarseningPlan plan{2, 2};
  std::string name = "coarsened";
  if (opt.tune_pooling && wants(opt, "chwn", "coarsened")) {
    plan = autotune_pool(chwn.n(), chwn.c(), chwn.h(), chwn.w(), params);
    name = "coarsened(fh=" + std::to_string(plan.fh) +
           ";fw=" + std::to_string(plan.fw) + ")";
  }
  add("chwn", name, chwn,
      [&](const Tensor4D& in) { return pool_coarsened(in, params, plan); });
  return rows;
}

std::vector<BenchRow> bench_classifier(const Fixture& fx,
                                       const BenchOptions& opt) {
  Matrix in(fx.n, fx.c);
  fill_seeded(in.data.data(), in.data.size(), opt.seed);
  const Matrix reference = softmax_reference(in);
  const std::uint64_t bytes = std::uint64_t{2} * in.data.size() * 4;
  const std::uint64_t cells = in.data.size();

  std::vector<BenchRow> rows;
  if (wants(opt, "-", "reference")) {
    PassReport report;
    const Matrix out = softmax_reference(in, nullptr, &report);
    if (!approx_equal(out, reference, 1e-6f)) {
      verification_failure(fx.id, "reference");
    }
    const std::uint64_t ns =
        median_nanos(opt.repeats, [&] { softmax_reference(in); });
    rows.push_back({fx.id, "-", "reference", ns, to_gbps(bytes, ns),
                    std::uint64_t{report.full_matrix_sweeps} * cells, "ok",
                    false});
  }
  if (wants(opt, "-", "fused")) {
    auto [out, report] = softmax_fused(in);
    if (!approx_equal(out, reference, 1e-6f)) {
      verification_failure(fx.id, "fused");
    }
    const std::uint64_t ns =
        median_nanos(opt.repeats, [&] { softmax_fused(in); });
    rows.push_back({fx.id, "-", "fused", ns, to_gbps(bytes, ns),
                    std::uint64_t{report.full_matrix_sweeps} * cells, "ok",
                    false});
  }
  return rows;
}

}  // namespace

std::vector<BenchRow> bench_layer(const Fixture& base, const BenchOptions& opt) {
  const Fixture fx = scale_fixture(base, opt.scale);
  switch (fx.kind) {
    case FixtureKind::Conv:
      return bench_conv(fx, opt);
    case FixtureKind::Pool:
      return bench_pool(fx, opt);
    case FixtureKind::Classifier:
      return bench_classifier(fx, opt);
  }
  return {};
}

std::vector<TransformRow> bench_transform(std::uint32_t n, std::uint32_t c,
                                          std::uint32_t h, std::uint32_t w,
                                          std::uint32_t repeats,
                                          std::uint64_t seed) {
  Tensor4D src(n, c, h, w, Layout::CHWN);
  fill_seeded(src.data(), src.size(), seed);
  const std::uint64_t bytes = 2 * src.size() * 4;  // read + write
  const std::string dims = std::to_string(n) + "x" + std::to_string(c) + "x" +
                           std::to_string(h) + "x" + std::to_string(w);

  const Tensor4D reference = transform_naive(src, Layout::NCHW);
  std::vector<TransformRow> rows;

  const std::uint64_t naive_ns = median_nanos(
      repeats, [&] { transform_naive(src, Layout::NCHW); });
  rows.push_back({dims, "naive", naive_ns, to_gbps(bytes, naive_ns)});

  TransformPlan plan = make_plan(Layout::CHWN, Layout::NCHW, n, c, h, w);
  plan.wide_copy = false;
  if (!approx_equal(transform_tiled(src, Layout::NCHW, plan), reference,
                    0.0f)) {
    throw Error("bench: tiled transform disagrees with the naive path on " +
                dims);
  }
  const std::uint64_t tiled_ns = median_nanos(
      repeats, [&] { transform_tiled(src, Layout::NCHW, plan); });
  rows.push_back({dims, "tiled", tiled_ns, to_gbps(bytes, tiled_ns)});

  if (n >= 64) {
    TransformPlan wide = plan;
    wide.wide_copy = true;
    if (!approx_equal(transform_tiled(src, Layout::NCHW, wide), reference,
                      0.0f)) {
      throw Error("bench: wide-copy transform disagrees with the naive path on " +
                  dims);
    }
    const std::uint64_t wide_ns = median_nanos(
        repeats, [&] { transform_tiled(src, Layout::NCHW, wide); });
    rows.push_back({dims, "tiled+wide", wide_ns, to_gbps(bytes, wide_ns)});
  } else {
    rows.push_back({dims, "tiled+wide", std::nullopt, std::nullopt});
  }
  return rows;
}

std::string bench_rows_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << "fixture,layout,algorithm,nanos,gbytes_per_s,input_loads,verified\n";
  for (const BenchRow& r : rows) {
    out << r.fixture << ',' << r.layout << ',' << r.algorithm << ',';
    if (r.skipped) {
      out << ",,";
    } else {
      out << r.nanos << ',' << r.gbytes_per_s << ',';
      if (r.input_loads) out << *r.input_loads;
    }
    out << ',' << r.verified << '\n';
  }
  return out.str();
}

std::string transform_rows_csv(const std::vector<TransformRow>& rows) {
  std::ostringstream out;
  out << "dims,method,nanos,gbytes_per_s\n";
  for (const TransformRow& r : rows) {
    out << r.dims << ',' << r.method << ',';
    if (r.nanos) {
      out << *r.nanos << ',' << *r.gbytes_per_s;
    } else {
      out << "n/a,n/a";
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace lcnn
