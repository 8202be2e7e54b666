#include "okcusum/cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "okcusum/bench.hpp"
#include "okcusum/csv.hpp"
#include "okcusum/mmd.hpp"
#include "okcusum/rng.hpp"
#include "okcusum/simd.hpp"
#include "okcusum/threading.hpp"

namespace okcusum {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitNoAlarm = 3;

double resolve_bandwidth(const std::string& opt, const Points& ref, std::int64_t subsample) {
  if (opt != "median") {
    const double bw = std::stod(opt);
    if (!(bw > 0.0)) throw std::invalid_argument("bandwidth must be positive");
    return bw;
  }
  const std::int64_t n = std::min<std::int64_t>(ref.size(), subsample);
  Points sub(ref.dim, n);
  for (std::int64_t i = 0; i < n; ++i) sub.set_row(i, ref.row(i));
  return median_heuristic(sub);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
}

nlohmann::json report_json(const StoppingReport& r) {
  nlohmann::json j;
  if (r.stopped_at)
    j["stopped_at"] = *r.stopped_at;
  else
    j["stopped_at"] = nullptr;
  if (std::isfinite(r.statistic_at_stop))
    j["statistic_at_stop"] = r.statistic_at_stop;
  else
    j["statistic_at_stop"] = nullptr;
  j["argmax_b"] = r.argmax_b;
  j["threshold"] = r.threshold;
  j["horizon"] = r.horizon;
  if (r.seed)
    j["seed"] = *r.seed;
  else
    j["seed"] = nullptr;
  return j;
}

struct MomentsArgs {
  std::string input, output = "moments.json", bandwidth = "median";
  int n_blocks = 15, window = 50;
  std::int64_t n_draws = 100000, median_subsample = 2000;
  std::uint64_t seed = 1;
};

int cmd_moments(const MomentsArgs& a) {
  const Points ref = read_points_csv_file(a.input);
  const std::int64_t need = static_cast<std::int64_t>(a.n_blocks) * a.window;
  if (ref.size() < need)
    throw std::runtime_error("insufficient reference data: have " + std::to_string(ref.size()) +
                             " rows, need N*w = " + std::to_string(need));
  const double bw = resolve_bandwidth(a.bandwidth, ref, a.median_subsample);
  const KernelSpec spec = gaussian_rbf(bw);
  const MomentEstimates m = estimate_moments(ref, spec, a.n_blocks, a.n_draws, a.seed);
  write_text_file(a.output, moments_to_json(m));
  std::cout << "bandwidth " << bw << "\n"
            << "C1 " << m.c1 << "\nC2 " << m.c2 << "\nrho " << m.rho << "\n"
            << "skewness(Z_B) at B=2: " << third_moment_h0(m, 2) << "\n"
            << "skewness(Z_B) at B=" << a.window << ": " << third_moment_h0(m, a.window) << "\n"
            << "wrote " << a.output << "\n";
  return kExitOk;
}

struct CalibrateArgs {
  std::string moments_path, output = "calibration.json", method = "skew", ref_path;
  double arl = 500.0;
  int window = 50, n_blocks = 15, b_min = 2;
  std::int64_t trials = 200;
  double horizon_factor = 5.0;
  std::string bandwidth = "median";
  std::int64_t median_subsample = 2000;
  std::uint64_t seed = 1;
};

// Monte Carlo calibration against file data: H0 streams are bootstrap
// resamples of the reference rows; threshold found by bisection on the
// empirical ARL over running-maximum records.
CalibrationResult calibrate_monte_carlo(const CalibrateArgs& a, const MomentEstimates& m) {
  if (a.ref_path.empty())
    throw std::invalid_argument("--method mc needs --ref (reference CSV for bootstrap streams)");
  const Points ref = read_points_csv_file(a.ref_path);
  const double bw = resolve_bandwidth(a.bandwidth, ref, a.median_subsample);
  DetectorConfig cfg;
  cfg.w = a.window;
  cfg.n_blocks = a.n_blocks;
  cfg.b_min = a.b_min;
  cfg.kernel = gaussian_rbf(bw);
  cfg.threshold = kInf;
  cfg.moments = m;
  cfg.validate();
  if (ref.size() < static_cast<std::int64_t>(cfg.n_blocks) * cfg.w)
    throw std::runtime_error("insufficient reference data for N*w blocks");

  const auto horizon = static_cast<std::int64_t>(std::ceil(a.horizon_factor * a.arl));
  struct Track {
    std::vector<std::pair<std::int64_t, double>> rec;
  };
  std::vector<Track> tracks(static_cast<std::size_t>(a.trials));
  const int n_chunks = static_cast<int>(std::min<std::int64_t>(a.trials, 8 * thread_count()));
  parallel_chunks(a.trials, n_chunks, [&](int, std::int64_t lo, std::int64_t hi) {
    std::vector<double> row(static_cast<std::size_t>(ref.dim));
    for (std::int64_t i = lo; i < hi; ++i) {
      const std::uint64_t ts = mix64(a.seed, 0x6d63ull, static_cast<std::uint64_t>(i));
      OnlineKernelCusum det(cfg, ref, mix64(ts, 1));
      Rng rng(mix64(ts, 2));
      Track tr;
      for (std::int64_t t = 0; t < horizon; ++t) {
        const auto r = ref.row(static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(ref.size()))));
        row.assign(r.begin(), r.end());
        const StepResult res = det.step(row);
        if (res.statistic > kNegInf && (tr.rec.empty() || res.statistic > tr.rec.back().second))
          tr.rec.emplace_back(res.t, res.statistic);
      }
      tracks[static_cast<std::size_t>(i)] = std::move(tr);
    }
  });

  auto arl_of = [&](double b) {
    double s = 0.0;
    for (const auto& tr : tracks) {
      std::int64_t stop = horizon;
      for (const auto& [t, v] : tr.rec)
        if (v >= b) {
          stop = t;
          break;
        }
      s += static_cast<double>(stop);
    }
    return s / static_cast<double>(a.trials);
  };
  double vmax = 0.0;
  for (const auto& tr : tracks)
    if (!tr.rec.empty()) vmax = std::max(vmax, tr.rec.back().second);
  if (arl_of(vmax + 1.0) < a.arl)
    throw std::runtime_error("calibration horizon too short for the requested ARL");
  double lo = -1.0, hi = vmax + 1.0;
  while (hi - lo > 1e-9 * std::max(1.0, std::abs(hi))) {
    const double mid = 0.5 * (lo + hi);
    (arl_of(mid) >= a.arl ? hi : lo) = mid;
  }
  CalibrationResult r;
  r.threshold = hi;
  r.target_arl = a.arl;
  r.method = ArlMethod::monte_carlo;
  r.predicted_arl = arl_of(hi);
  r.w = a.window;
  return r;
}

int cmd_calibrate(const CalibrateArgs& a) {
  std::ifstream in(a.moments_path);
  if (!in) throw std::runtime_error("cannot open " + a.moments_path);
  std::stringstream buf;
  buf << in.rdbuf();
  const MomentEstimates m = moments_from_json(buf.str());
  const ArlMethod method = arl_method_from_name(a.method);
  CalibrationResult r;
  if (method == ArlMethod::monte_carlo) {
    CalibrateArgs args = a;
    args.n_blocks = m.n_blocks;
    r = calibrate_monte_carlo(args, m);
  } else {
    r = threshold_for_arl(a.arl, a.window, m, method);
  }
  write_text_file(a.output, calibration_to_json(r));
  std::cout << "threshold " << r.threshold << " (method " << arl_method_name(r.method)
            << ", predicted ARL " << r.predicted_arl << ")\nwrote " << a.output << "\n";
  return kExitOk;
}

struct DetectArgs {
  std::string ref_path, stream_path = "-", calibration_path, moments_path;
  std::string report_path, emit_stats_path;
  std::string bandwidth = "median", method = "skew";
  double threshold = std::nan("");
  double arl = std::nan("");
  int window = 50, n_blocks = 15, b_min = 2;
  std::int64_t n_draws = 100000, horizon = 0, median_subsample = 2000;
  std::uint64_t seed = 1;
};

int cmd_detect(const DetectArgs& a) {
  const int given = (!std::isnan(a.threshold) ? 1 : 0) + (!std::isnan(a.arl) ? 1 : 0) +
                    (!a.calibration_path.empty() ? 1 : 0);
  if (given != 1)
    throw std::invalid_argument("detect needs exactly one of --threshold, --arl, --calibration");

  const Points ref = read_points_csv_file(a.ref_path);
  if (ref.size() < static_cast<std::int64_t>(a.n_blocks) * a.window)
    throw std::runtime_error("insufficient reference data: need N*w = " +
                             std::to_string(static_cast<std::int64_t>(a.n_blocks) * a.window) + " rows");
  const double bw = resolve_bandwidth(a.bandwidth, ref, a.median_subsample);
  const KernelSpec spec = gaussian_rbf(bw);

  MomentEstimates m;
  if (!a.moments_path.empty()) {
    std::ifstream in(a.moments_path);
    if (!in) throw std::runtime_error("cannot open " + a.moments_path);
    std::stringstream buf;
    buf << in.rdbuf();
    m = moments_from_json(buf.str());
    if (m.n_blocks != a.n_blocks) throw std::invalid_argument("moments file was estimated for a different N");
  } else {
    m = estimate_moments(ref, spec, a.n_blocks, a.n_draws, a.seed);
  }

  double threshold;
  if (!std::isnan(a.threshold)) {
    threshold = a.threshold;
  } else if (!a.calibration_path.empty()) {
    std::ifstream in(a.calibration_path);
    if (!in) throw std::runtime_error("cannot open " + a.calibration_path);
    std::stringstream buf;
    buf << in.rdbuf();
    const CalibrationResult c = calibration_from_json(buf.str());
    if (c.w != a.window)
      std::cerr << "warning: calibration was computed for w=" << c.w << ", detect runs w=" << a.window
                << "\n";
    threshold = c.threshold;
  } else {
    threshold = threshold_for_arl(a.arl, a.window, m, arl_method_from_name(a.method)).threshold;
  }

  DetectorConfig cfg;
  cfg.w = a.window;
  cfg.n_blocks = a.n_blocks;
  cfg.b_min = a.b_min;
  cfg.kernel = spec;
  cfg.threshold = threshold;
  cfg.moments = m;
  OnlineKernelCusum det(cfg, ref, a.seed);

  std::ifstream stream_file;
  std::istream* stream = &std::cin;
  const bool from_stdin = a.stream_path == "-";
  if (!from_stdin) {
    stream_file.open(a.stream_path);
    if (!stream_file) throw std::runtime_error("cannot open " + a.stream_path);
    stream = &stream_file;
  }

  std::ofstream stats;
  if (!a.emit_stats_path.empty()) {
    stats.open(a.emit_stats_path);
    if (!stats) throw std::runtime_error("cannot write " + a.emit_stats_path);
    stats << "t,statistic,argmax_b\n";
  }

  const std::int64_t horizon = a.horizon > 0 ? a.horizon : std::numeric_limits<std::int64_t>::max();
  StoppingReport report;
  report.threshold = threshold;
  report.seed = a.seed;
  std::string line;
  std::vector<double> row;
  std::int64_t lineno = 0;
  bool header_allowed = true;
  bool alarmed = false;
  while (det.t() < horizon && std::getline(*stream, line)) {
    ++lineno;
    try {
      if (!parse_csv_row(line, row, a.stream_path, lineno)) continue;
    } catch (const std::runtime_error&) {
      if (header_allowed) {  // tolerate one header row
        header_allowed = false;
        continue;
      }
      throw;
    }
    header_allowed = false;
    if (static_cast<int>(row.size()) != ref.dim)
      throw std::runtime_error(a.stream_path + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(ref.dim) + " columns");
    const StepResult res = det.step(row);
    if (stats.is_open())
      stats << res.t << ',' << (std::isfinite(res.statistic) ? res.statistic : std::nan("")) << ','
            << res.argmax_b << '\n';
    report.statistic_at_stop = res.statistic;
    report.argmax_b = res.argmax_b;
    if (res.alarm) {
      report.stopped_at = res.t;
      alarmed = true;
      if (from_stdin) {
        nlohmann::json ev{{"event", "alarm"},
                          {"t", res.t},
                          {"statistic", res.statistic},
                          {"argmax_b", res.argmax_b},
                          {"threshold", threshold}};
        std::cout << ev.dump() << std::endl;
      }
      break;
    }
  }
  report.horizon = a.horizon > 0 ? a.horizon : det.t();

  if (!a.report_path.empty()) write_text_file(a.report_path, report_json(report).dump(2));
  if (alarmed) {
    std::cout << "alarm at t=" << *report.stopped_at << " statistic=" << report.statistic_at_stop
              << " argmax_b=" << report.argmax_b << " threshold=" << threshold << "\n";
    return kExitOk;
  }
  std::cout << "no alarm after " << det.t() << " observations (threshold " << threshold << ")\n";
  return kExitNoAlarm;
}

struct BenchArgs {
  std::string config_path, output_dir = ".", procedures;
  std::int64_t trials = 0;
  std::uint64_t seed = 0;
  bool quiet = false;
};

int cmd_bench(const BenchArgs& a) {
  std::ifstream in(a.config_path);
  if (!in) throw std::runtime_error("cannot open " + a.config_path);
  ExperimentSpec spec = parse_experiment_config(in);
  if (!a.procedures.empty()) {
    std::vector<std::string> subset;
    std::istringstream ss(a.procedures);
    std::string tok;
    while (std::getline(ss, tok, ',')) subset.push_back(tok);
    spec.procedures = subset;
  }
  if (a.trials > 0) spec.trials_calibrate = spec.trials_edd = a.trials;
  if (a.seed != 0) spec.seed = a.seed;
  spec.validate();

  ProgressFn progress;
  if (!a.quiet) {
    progress = [](std::int64_t done, std::int64_t total) {
      if (done % 50 == 0 || done == total)
        std::cerr << "\r" << done << "/" << total << " trials" << std::flush;
    };
  }
  const ExperimentResult result = run_experiment_full(spec, progress);
  if (!a.quiet) std::cerr << "\n";

  const std::string base = a.output_dir + "/";
  write_text_file(base + "results.csv", emit_table(result.rows, TableFormat::csv));
  write_text_file(base + "results.json", emit_table(result.rows, TableFormat::json));
  write_text_file(base + "meta.json",
                  experiment_meta_json(spec, result.bandwidth, result.moments, result.horizon_calibrate));
  std::cout << emit_table(result.rows, TableFormat::markdown);
  std::cout << "wrote " << base << "results.csv, results.json, meta.json\n";
  return kExitOk;
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
  CLI::App app{"Online kernel change-point detection: moment estimation, ARL calibration, streaming "
               "detection and simulation benchmarks"};
  app.require_subcommand(1);

  MomentsArgs ma;
  auto* moments = app.add_subcommand("moments", "Estimate H0 moment constants from reference data");
  moments->add_option("-i,--input", ma.input, "reference CSV")->required();
  moments->add_option("-o,--output", ma.output, "output JSON path");
  moments->add_option("--n-blocks", ma.n_blocks, "number of reference blocks N");
  moments->add_option("--window", ma.window, "window length (for the skewness printout)");
  moments->add_option("--n-draws", ma.n_draws, "Monte Carlo draws");
  moments->add_option("--bandwidth", ma.bandwidth, "kernel bandwidth, or 'median'");
  moments->add_option("--median-subsample", ma.median_subsample, "rows used by the median heuristic");
  moments->add_option("--seed", ma.seed, "random seed");

  CalibrateArgs ca;
  auto* calibrate = app.add_subcommand("calibrate", "Turn a target ARL into a detection threshold");
  calibrate->add_option("-m,--moments", ca.moments_path, "moments JSON")->required();
  calibrate->add_option("--arl", ca.arl, "target average run length")->required();
  calibrate->add_option("-w,--window", ca.window, "window length");
  calibrate->add_option("--method", ca.method, "gaussian | skew | mc");
  calibrate->add_option("-o,--output", ca.output, "output JSON path");
  calibrate->add_option("--ref", ca.ref_path, "reference CSV (mc method)");
  calibrate->add_option("--trials", ca.trials, "Monte Carlo trials (mc method)");
  calibrate->add_option("--horizon-factor", ca.horizon_factor, "H0 horizon = factor * ARL (mc method)");
  calibrate->add_option("--b-min", ca.b_min, "smallest scanned block size (mc method)");
  calibrate->add_option("--bandwidth", ca.bandwidth, "kernel bandwidth, or 'median' (mc method)");
  calibrate->add_option("--seed", ca.seed, "random seed");

  DetectArgs da;
  auto* detect = app.add_subcommand("detect", "Stream observations and stop at the first alarm");
  detect->add_option("--ref", da.ref_path, "reference CSV")->required();
  detect->add_option("--stream", da.stream_path, "stream CSV, or '-' for stdin");
  detect->add_option("--threshold", da.threshold, "detection threshold b");
  detect->add_option("--arl", da.arl, "target ARL (threshold from analytic calibration)");
  detect->add_option("--method", da.method, "gaussian | skew (with --arl)");
  detect->add_option("--calibration", da.calibration_path, "calibration JSON");
  detect->add_option("--moments", da.moments_path, "moments JSON (skip re-estimation)");
  detect->add_option("-w,--window", da.window, "window length");
  detect->add_option("--n-blocks", da.n_blocks, "number of reference blocks N");
  detect->add_option("--b-min", da.b_min, "smallest scanned block size");
  detect->add_option("--n-draws", da.n_draws, "moment estimation draws");
  detect->add_option("--bandwidth", da.bandwidth, "kernel bandwidth, or 'median'");
  detect->add_option("--median-subsample", da.median_subsample, "rows used by the median heuristic");
  detect->add_option("--horizon", da.horizon, "stop after this many observations (0 = stream end)");
  detect->add_option("--report", da.report_path, "write a stopping report JSON");
  detect->add_option("--emit-stats", da.emit_stats_path, "write per-step t,statistic,argmax_b CSV");
  detect->add_option("--seed", da.seed, "random seed");

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Run a declarative EDD-vs-ARL experiment");
  bench->add_option("-c,--config", ba.config_path, "experiment config file")->required();
  bench->add_option("-o,--output-dir", ba.output_dir, "directory for results.csv/json and meta.json");
  bench->add_option("--procedures", ba.procedures, "comma-separated subset of the config's procedures");
  bench->add_option("--trials", ba.trials, "override both trial counts");
  bench->add_option("--seed", ba.seed, "override the config seed");
  bench->add_flag("--quiet", ba.quiet, "suppress progress output");

  std::vector<const char*> argv;
  argv.push_back("okcusum");
  for (const auto& s : args) argv.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (moments->parsed()) return cmd_moments(ma);
    if (calibrate->parsed()) return cmd_calibrate(ca);
    if (detect->parsed()) return cmd_detect(da);
    if (bench->parsed()) return cmd_bench(ba);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitConfig;
}

}  // namespace okcusum
