#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "lcnn/bench.hpp"
#include "lcnn/fixtures.hpp"
#include "lcnn/layout.hpp"
#include "lcnn/net.hpp"
#include "lcnn/select.hpp"

namespace {

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw lcnn::ValidationError("cannot open --out " + out_path);
  out << text;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw lcnn::ValidationError("cannot read " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

lcnn::Tensor4D seeded_input(const lcnn::NetworkSpec& spec, lcnn::Layout layout,
                            std::uint64_t seed) {
  lcnn::Tensor4D input(spec.n, spec.c, spec.h, spec.w, layout);
  std::mt19937 rng(static_cast<std::uint32_t>(seed));
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  for (std::uint64_t i = 0; i < input.size(); ++i) input.data()[i] = dist(rng);
  return input;
}

lcnn::Layout first_4d_layout(const lcnn::NetworkSpec& spec) {
  for (const lcnn::LayerSpec& layer : spec.layers) {
    if ((layer.kind == lcnn::LayerKind::Convolution ||
         layer.kind == lcnn::LayerKind::Pooling) &&
        layer.layout_field) {
      return *layer.layout_field;
    }
  }
  return lcnn::Layout::NCHW;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"layout-aware CNN layer engine: benchmarks, calibration and "
               "network runs (CSV output)"};
  app.require_subcommand(1);
  app.fallthrough();  // --out may follow the subcommand
  std::string out_path;
  app.add_option("--out", out_path, "write CSV to a file instead of stdout");

  // fixtures
  auto* fixtures_cmd = app.add_subcommand("fixtures", "benchmark layer table");
  bool list = false;
  std::uint32_t fixtures_scale = 1;
  fixtures_cmd->add_flag("--list", list, "print the table as CSV");
  fixtures_cmd->add_option("--scale", fixtures_scale,
                           "batch divisor applied to the listing");

  // bench-layer
  auto* bench_cmd =
      app.add_subcommand("bench-layer", "time one fixture (or all)");
  std::string bench_id = "all";
  lcnn::BenchOptions bench_opt;
  bool serial = false;
  bench_cmd->add_option("--id", bench_id, "fixture id (CV1..CLASS5) or 'all'");
  bench_cmd->add_option("--scale", bench_opt.scale,
                        "batch divisor; past 1 also caps maps at 64");
  bench_cmd->add_option("--repeats", bench_opt.repeats, "timed runs (median)");
  bench_cmd->add_option("--seed", bench_opt.seed, "input seed");
  bench_cmd->add_option("--layout", bench_opt.layout,
                        "restrict rows: chwn, nchw or all");
  bench_cmd->add_option("--algorithm", bench_opt.algorithm,
                        "restrict rows: direct, gemm, fft, plain, coarsened, "
                        "reference, fused or all");
  bench_cmd->add_flag("--tune", bench_opt.tune_pooling,
                      "hill-climb the pooling coarsening factors");
  bench_cmd->add_flag("--serial", serial,
                      "single-worker timing (kernels already run serially)");

  // bench-transform
  auto* transform_cmd =
      app.add_subcommand("bench-transform", "time the layout transforms");
  std::string transform_dims;
  std::string transform_id;
  std::uint32_t transform_repeats = 5;
  transform_cmd->add_option("--dims", transform_dims, "NxCxHxW");
  transform_cmd->add_option("--id", transform_id,
                            "take dims from a fixture instead");
  transform_cmd->add_option("--repeats", transform_repeats, "timed runs");

  // calibrate
  auto* calibrate_cmd = app.add_subcommand(
      "calibrate", "derive host (c_t, n_t) thresholds by one-time profiling");
  std::uint32_t calibrate_scale = 4;
  std::uint32_t calibrate_repeats = 3;
  std::string calibration_file = "calibration.txt";
  calibrate_cmd->add_option("--scale", calibrate_scale, "batch divisor");
  calibrate_cmd->add_option("--repeats", calibrate_repeats, "runs per point");
  calibrate_cmd->add_option("--file", calibration_file,
                            "where to store the record");

  // run-net
  auto* run_cmd = app.add_subcommand("run-net", "run a network config");
  std::string config_path;
  std::string preset = "titan-black";
  bool auto_layout = false;
  bool refine = false;
  bool use_fft = false;
  std::uint64_t run_seed = 42;
  std::string run_calibration = "calibration.txt";
  run_cmd->add_option("config", config_path, "network JSON")->required();
  run_cmd->add_option("--preset", preset,
                      "threshold preset: titan-black or titan-x");
  run_cmd->add_flag("--auto-layout", auto_layout,
                    "use thresholds from the calibration file");
  run_cmd->add_option("--calibration", run_calibration,
                      "calibration file for --auto-layout");
  run_cmd->add_flag("--profile-refine", refine,
                    "time each conv under both layouts and keep the winner");
  run_cmd->add_flag("--fft", use_fft,
                    "NCHW convolutions use the FFT path where supported");
  run_cmd->add_option("--seed", run_seed, "input and weight seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << app.help() << "\n";
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (*fixtures_cmd) {
      if (!list) {
        std::cerr << "fixtures: nothing to do (try --list)\n";
        return 1;
      }
      emit(lcnn::fixture_list_csv(fixtures_scale), out_path);
      return 0;
    }

    if (*bench_cmd) {
      std::vector<lcnn::BenchRow> rows;
      if (bench_id == "all") {
        for (const lcnn::Fixture& fx : lcnn::fixture_table()) {
          auto batch = lcnn::bench_layer(fx, bench_opt);
          rows.insert(rows.end(), batch.begin(), batch.end());
        }
      } else {
        const auto fx = lcnn::fixture_by_id(bench_id);
        if (!fx) {
          throw lcnn::ValidationError("unknown fixture id '" + bench_id + "'");
        }
        rows = lcnn::bench_layer(*fx, bench_opt);
      }
      emit(lcnn::bench_rows_csv(rows), out_path);
      return 0;
    }

    if (*transform_cmd) {
      std::uint32_t n = 0, c = 0, h = 0, w = 0;
      if (!transform_id.empty()) {
        const auto fx = lcnn::fixture_by_id(transform_id);
        if (!fx) {
          throw lcnn::ValidationError("unknown fixture id '" + transform_id +
                                      "'");
        }
        n = fx->n;
        c = fx->kind == lcnn::FixtureKind::Classifier ? 1 : fx->c;
        h = fx->h;
        w = fx->w;
      } else if (std::sscanf(transform_dims.c_str(), "%ux%ux%ux%u", &n, &c,
                             &h, &w) != 4) {
        throw lcnn::ValidationError("--dims must look like 64x96x55x55");
      }
      emit(lcnn::transform_rows_csv(
               lcnn::bench_transform(n, c, h, w, transform_repeats)),
           out_path);
      return 0;
    }

    if (*calibrate_cmd) {
      const lcnn::HeuristicThresholds th = lcnn::calibrate(
          lcnn::host_conv_bench(calibrate_scale, calibrate_repeats));
      const lcnn::CalibrationRecord record =
          lcnn::make_calibration_record(th);
      lcnn::write_calibration(calibration_file, record);
      std::ostringstream text;
      text << "c_t,n_t,host,timestamp\n"
           << record.thresholds.c_t << ',' << record.thresholds.n_t << ','
           << record.host << ',' << record.timestamp << '\n';
      emit(text.str(), out_path);
      return 0;
    }

    if (*run_cmd) {
      lcnn::NetworkSpec spec = lcnn::parse_network(read_file(config_path));
      lcnn::HeuristicThresholds th;
      if (auto_layout) {
        th = lcnn::read_calibration(run_calibration).thresholds;
      } else {
        const auto named = lcnn::preset_by_name(preset);
        if (!named) {
          throw lcnn::ValidationError("unknown preset '" + preset +
                                      "' (titan-black, titan-x)");
        }
        th = *named;
      }
      spec = lcnn::annotate_layouts(std::move(spec), th);
      lcnn::RunOptions options;
      options.use_fft = use_fft;
      options.seed = run_seed;
      if (refine) {
        spec = lcnn::profile_refine(spec, options);
      }
      const lcnn::Tensor4D input =
          seeded_input(spec, first_4d_layout(spec), run_seed);
      const lcnn::RunResult result = lcnn::run_network(spec, input, options);
      emit(lcnn::timing_report_csv(result.report), out_path);
      return 0;
    }
  } catch (const lcnn::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const lcnn::CalibrationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
