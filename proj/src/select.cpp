#include "lcnn/select.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>

#include "lcnn/conv.hpp"

namespace lcnn {

const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Convolution:
      return "conv";
    case LayerKind::Pooling:
      return "pool";
    case LayerKind::Softmax:
      return "softmax";
    case LayerKind::FullyConnected:
      return "fc";
    case LayerKind::Input:
      return "input";
  }
  return "?";
}

std::optional<HeuristicThresholds> preset_by_name(std::string_view name) {
  if (name == "titan-black") return kTitanBlack;
  if (name == "titan-x") return kTitanX;
  return std::nullopt;
}

Layout choose_layout(LayerKind kind, std::uint32_t n, std::uint32_t c,
                     const HeuristicThresholds& th) {
  switch (kind) {
    case LayerKind::Pooling:
      return Layout::CHWN;
    case LayerKind::Convolution:
      return (c < th.c_t || n >= th.n_t) ? Layout::CHWN : Layout::NCHW;
    case LayerKind::Softmax:
    case LayerKind::FullyConnected:
    case LayerKind::Input:
      return Layout::NCHW;
  }
  return Layout::NCHW;
}

namespace {

// CONV7 geometry: batch 64, 256 input channels, 13x13 maps, 384 filters of
// 3x3, stride 1 (padded to keep the extent).
struct CalibrationFixture {
  std::uint32_t n = 64, c = 256, h = 13, w = 13;
  std::uint32_t c_o = 384, f = 3, stride = 1, pad = 1;
};

}  // namespace

HeuristicThresholds calibrate(const ConvBenchFn& bench) {
  const CalibrationFixture fx;
  std::ostringstream partial;
  HeuristicThresholds th{};

  try {
    // Batch sweep at the fixture's (large) channel count: the smallest batch
    // where the CHWN path wins.
    std::optional<std::uint32_t> n_t;
    for (std::uint32_t n : kCalibrationBatchSweep) {
      const double chwn = bench(Layout::CHWN, n, fx.c);
      const double nchw = bench(Layout::NCHW, n, fx.c);
      partial << "n=" << n << " chwn=" << chwn << " nchw=" << nchw << "; ";
      if (!n_t && chwn < nchw) n_t = n;
    }
    th.n_t = n_t.value_or(std::end(kCalibrationBatchSweep)[-1] + 1);

    // Channel sweep at the fixture's batch: the smallest channel count where
    // the NCHW path first wins.
    std::optional<std::uint32_t> c_t;
    for (std::uint32_t c : kCalibrationChannelSweep) {
      const double chwn = bench(Layout::CHWN, fx.n, c);
      const double nchw = bench(Layout::NCHW, fx.n, c);
      partial << "c=" << c << " chwn=" << chwn << " nchw=" << nchw << "; ";
      if (!c_t && nchw < chwn) c_t = c;
    }
    th.c_t = c_t.value_or(std::end(kCalibrationChannelSweep)[-1] + 1);
  } catch (const std::exception& e) {
    throw CalibrationError(std::string("calibrate: measurement failed (") +
                           e.what() + "); partial sweep: " + partial.str());
  }
  return th;
}

ConvBenchFn host_conv_bench(std::uint32_t scale, std::uint32_t repeats) {
  if (scale < 1) scale = 1;
  if (repeats < 1) repeats = 1;
  return [scale, repeats](Layout layout, std::uint32_t n,
                          std::uint32_t c) -> double {
    const CalibrationFixture fx;
    const std::uint32_t bn = std::max<std::uint32_t>(1, n / scale);
    Tensor4D in(bn, c, fx.h, fx.w, layout);
    std::mt19937 rng(42);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    for (std::uint64_t i = 0; i < in.size(); ++i) in.data()[i] = dist(rng);
    FilterBank filt(fx.c_o, c, fx.f, fx.f);
    for (std::uint64_t i = 0; i < filt.size(); ++i) {
      filt.data()[i] = dist(rng);
    }
    const ConvParams params{fx.stride, fx.pad};

    std::vector<double> samples;
    samples.reserve(repeats);
    (void)(layout == Layout::CHWN ? conv_direct(in, filt, params)
                                  : conv_gemm(in, filt, params));  // warm-up
    for (std::uint32_t r = 0; r < repeats; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      if (layout == Layout::CHWN) {
        (void)conv_direct(in, filt, params);
      } else {
        (void)conv_gemm(in, filt, params);
      }
      const auto t1 = std::chrono::steady_clock::now();
      samples.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    std::sort(samples.begin(), samples.end());
    return samples[samples.size() / 2];
  };
}

void write_calibration(const std::filesystem::path& path,
                       const CalibrationRecord& record) {
  std::ofstream out(path);
  if (!out) {
    throw CalibrationError("calibrate: cannot write " + path.string());
  }
  out << "c_t=" << record.thresholds.c_t << " n_t=" << record.thresholds.n_t
      << " host=" << record.host << " timestamp=" << record.timestamp << "\n";
}

CalibrationRecord read_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw CalibrationError("calibrate: cannot read " + path.string());
  }
  std::string line;
  std::getline(in, line);
  CalibrationRecord record;
  unsigned c_t = 0, n_t = 0;
  char host[256] = {0};
  char stamp[64] = {0};
  if (std::sscanf(line.c_str(), "c_t=%u n_t=%u host=%255s timestamp=%63s",
                  &c_t, &n_t, host, stamp) != 4 ||
      c_t < 1 || n_t < 1) {
    throw CalibrationError("calibrate: malformed record in " + path.string());
  }
  record.thresholds = {c_t, n_t};
  record.host = host;
  record.timestamp = stamp;
  return record;
}

CalibrationRecord make_calibration_record(HeuristicThresholds th) {
  CalibrationRecord record;
  record.thresholds = th;
  char host[256] = {0};
  record.host = gethostname(host, sizeof(host) - 1) == 0 ? host : "unknown";
  const std::time_t now = std::time(nullptr);
  char stamp[64];
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  record.timestamp = stamp;
  return record;
}

}  // namespace lcnn
