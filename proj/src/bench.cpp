#include "okcusum/bench.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "okcusum/rng.hpp"
#include "okcusum/threading.hpp"

namespace okcusum {

void ExperimentSpec::validate() const {
  pre.validate();
  post.validate();
  if (pre.dim != post.dim) throw std::invalid_argument("ExperimentSpec: pre/post dimension mismatch");
  if (procedures.empty()) throw std::invalid_argument("ExperimentSpec: no procedures");
  for (const auto& p : procedures)
    if (p != "proposed" && p != "scanb" && p != "kcusum" && p != "hotelling")
      throw std::invalid_argument("ExperimentSpec: unknown procedure " + p);
  if (arl_targets.empty()) throw std::invalid_argument("ExperimentSpec: no ARL targets");
  for (double g : arl_targets)
    if (!(g > 1.0)) throw std::invalid_argument("ExperimentSpec: ARL targets must exceed 1");
  if (trials_calibrate < 1 || trials_edd < 1 || horizon_edd < 1)
    throw std::invalid_argument("ExperimentSpec: trials and horizons must be >= 1");
  if (reference_size < static_cast<std::int64_t>(n_blocks) * w)
    throw std::invalid_argument("ExperimentSpec: reference_size must be >= N*w");
  if (b_min < 2 || b_min > w) throw std::invalid_argument("ExperimentSpec: need 2 <= b_min <= w");
  if (!(horizon_calibrate_factor >= 1.0))
    throw std::invalid_argument("ExperimentSpec: horizon_calibrate_factor must be >= 1");
  if (bandwidth && !(*bandwidth > 0.0))
    throw std::invalid_argument("ExperimentSpec: bandwidth must be positive");
}

namespace {

// Running-maximum records of one H0 trajectory: (t, value) with strictly
// increasing values. The stopping time for any threshold b follows by scan.
struct RecordTrack {
  std::vector<std::pair<std::int64_t, double>> records;

  void observe(std::int64_t t, double v) {
    if (records.empty() || v > records.back().second) records.emplace_back(t, v);
  }
  std::int64_t stop_time(double b, std::int64_t horizon) const {
    for (const auto& [t, v] : records) {
      if (t > horizon) break;
      if (v >= b) return t;
    }
    return horizon;  // censored
  }
  double max_value(std::int64_t horizon) const {
    double m = kNegInf;
    for (const auto& [t, v] : records) {
      if (t > horizon) break;
      m = v;
    }
    return m;
  }
};

struct ExperimentContext {
  const ExperimentSpec* spec;
  Points pool;
  KernelSpec kernel;
  MomentEstimates moments;
};

// Fixed per-procedure ids keep seed derivation platform-independent.
std::uint64_t procedure_id(const std::string& name) {
  if (name == "proposed") return 1;
  if (name == "scanb") return 2;
  if (name == "kcusum") return 3;
  if (name == "hotelling") return 4;
  return 99;
}

std::unique_ptr<Procedure> make_procedure(const std::string& name, const ExperimentContext& ctx,
                                          double threshold, std::uint64_t trial_seed) {
  const auto& s = *ctx.spec;
  if (name == "proposed" || name == "scanb") {
    DetectorConfig cfg;
    cfg.w = s.w;
    cfg.n_blocks = s.n_blocks;
    cfg.b_min = name == "scanb" ? s.w : s.b_min;
    cfg.kernel = ctx.kernel;
    cfg.threshold = threshold;
    cfg.moments = ctx.moments;
    return std::make_unique<OnlineKernelCusum>(cfg, ctx.pool, mix64(trial_seed, 0x696e6974));
  }
  if (name == "kcusum")
    return std::make_unique<KcusumDetector>(ctx.kernel, ctx.pool, s.kcusum_delta, threshold,
                                            mix64(trial_seed, 0x696e6974));
  if (name == "hotelling")
    return std::make_unique<HotellingDetector>(ctx.pool, threshold, s.hotelling_kappa_cap);
  throw std::invalid_argument("unknown procedure: " + name);
}

std::vector<RecordTrack> h0_tracks(const std::string& proc, const ExperimentContext& ctx,
                                   std::int64_t horizon, std::atomic<std::int64_t>& progress_done,
                                   const ProgressFn& progress, std::int64_t progress_total) {
  const auto& s = *ctx.spec;
  std::vector<RecordTrack> tracks(static_cast<std::size_t>(s.trials_calibrate));
  const int n_chunks = static_cast<int>(std::min<std::int64_t>(s.trials_calibrate, 8 * thread_count()));
  parallel_chunks(s.trials_calibrate, n_chunks, [&](int, std::int64_t lo, std::int64_t hi) {
    std::vector<double> row(static_cast<std::size_t>(s.pre.dim));
    for (std::int64_t i = lo; i < hi; ++i) {
      const std::uint64_t trial_seed =
          mix64(s.seed, 0x63616cull, procedure_id(proc), static_cast<std::uint64_t>(i));
      auto det = make_procedure(proc, ctx, kInf, trial_seed);
      Rng stream(mix64(trial_seed, 0x73747265));
      RecordTrack track;
      for (std::int64_t t = 0; t < horizon; ++t) {
        sample_into(s.pre, stream, row);
        const StepResult res = det->step(row);
        if (res.statistic > kNegInf) track.observe(res.t, res.statistic);
      }
      tracks[static_cast<std::size_t>(i)] = std::move(track);
      const auto d = progress_done.fetch_add(1) + 1;
      if (progress) progress(d, progress_total);
    }
  });
  return tracks;
}

double empirical_arl(const std::vector<RecordTrack>& tracks, double b, std::int64_t horizon) {
  double s = 0.0;
  for (const auto& tr : tracks) s += static_cast<double>(tr.stop_time(b, horizon));
  return s / static_cast<double>(tracks.size());
}

double calibrate_threshold(const std::vector<RecordTrack>& tracks, double gamma, std::int64_t horizon) {
  double vmax = kNegInf;
  for (const auto& tr : tracks) vmax = std::max(vmax, tr.max_value(horizon));
  if (!(vmax > kNegInf) || empirical_arl(tracks, vmax + 1.0, horizon) < gamma)
    throw std::runtime_error("calibrate_threshold: horizon too short for the requested ARL target");
  double lo = vmax, hi = vmax + 1.0;
  for (const auto& tr : tracks)
    if (!tr.records.empty()) lo = std::min(lo, tr.records.front().second);
  lo -= 1.0;
  // empirical ARL is a nondecreasing step function of b
  while (hi - lo > 1e-9 * std::max(1.0, std::abs(hi))) {
    const double mid = 0.5 * (lo + hi);
    (empirical_arl(tracks, mid, horizon) >= gamma ? hi : lo) = mid;
  }
  return hi;
}

struct EddOutcome {
  std::int64_t stop = 0;
  bool alarmed = false;
};

ResultRow edd_row(const std::string& proc, const ExperimentContext& ctx, std::size_t gamma_idx,
                  double gamma, double threshold, std::atomic<std::int64_t>& progress_done,
                  const ProgressFn& progress, std::int64_t progress_total) {
  const auto& s = *ctx.spec;
  std::vector<EddOutcome> outcomes(static_cast<std::size_t>(s.trials_edd));
  const int n_chunks = static_cast<int>(std::min<std::int64_t>(s.trials_edd, 8 * thread_count()));
  parallel_chunks(s.trials_edd, n_chunks, [&](int, std::int64_t lo, std::int64_t hi) {
    std::vector<double> row(static_cast<std::size_t>(s.post.dim));
    for (std::int64_t i = lo; i < hi; ++i) {
      const std::uint64_t trial_seed =
          mix64(s.seed, 0x656464ull, mix64(procedure_id(proc), gamma_idx),
                static_cast<std::uint64_t>(i));
      auto det = make_procedure(proc, ctx, threshold, trial_seed);
      Rng stream(mix64(trial_seed, 0x73747265));
      // steady-state change: the monitor has seen w pre-change observations
      // when the change hits; the delay counts post-change steps
      for (int t = 0; t < s.w; ++t) {
        sample_into(s.pre, stream, row);
        det->step(row);
      }
      EddOutcome o;
      for (std::int64_t t = 0; t < s.horizon_edd; ++t) {
        sample_into(s.post, stream, row);
        const StepResult res = det->step(row);
        if (res.alarm) {
          o.stop = t + 1;
          o.alarmed = true;
          break;
        }
      }
      outcomes[static_cast<std::size_t>(i)] = o;
      const auto d = progress_done.fetch_add(1) + 1;
      if (progress) progress(d, progress_total);
    }
  });

  ResultRow row;
  row.procedure = proc;
  row.arl_target = gamma;
  row.threshold = threshold;
  row.trials = s.trials_edd;
  double sum = 0.0, sum2 = 0.0;
  std::int64_t hits = 0;
  for (const auto& o : outcomes) {
    if (!o.alarmed) {
      ++row.miss_count;
      continue;
    }
    sum += static_cast<double>(o.stop);
    sum2 += static_cast<double>(o.stop) * o.stop;
    ++hits;
  }
  if (hits > 0) {
    row.edd_mean = sum / static_cast<double>(hits);
    row.edd_stderr = std::sqrt(std::max(0.0, sum2 / hits - row.edd_mean * row.edd_mean) /
                               static_cast<double>(hits));
  }
  return row;
}

}  // namespace

ExperimentResult run_experiment_full(const ExperimentSpec& spec, const ProgressFn& progress) {
  spec.validate();
  ExperimentContext ctx;
  ctx.spec = &spec;
  ctx.pool = sample(spec.pre, spec.reference_size, mix64(spec.seed, 0x706f6f6c));

  double bw;
  if (spec.bandwidth) {
    bw = *spec.bandwidth;
  } else {
    const std::int64_t n_med = std::min<std::int64_t>(spec.reference_size, spec.median_subsample);
    Points sub(ctx.pool.dim, n_med);
    for (std::int64_t i = 0; i < n_med; ++i) sub.set_row(i, ctx.pool.row(i));
    bw = median_heuristic(sub);
  }
  ctx.kernel = gaussian_rbf(bw);
  ctx.moments =
      estimate_moments(ctx.pool, ctx.kernel, spec.n_blocks, spec.moment_draws, mix64(spec.seed, 0x6d6f6d));

  double gamma_max = 0.0;
  for (double g : spec.arl_targets) gamma_max = std::max(gamma_max, g);
  const auto horizon_cal_base =
      static_cast<std::int64_t>(std::ceil(spec.horizon_calibrate_factor * gamma_max));

  const std::int64_t progress_total =
      static_cast<std::int64_t>(spec.procedures.size()) *
      (spec.trials_calibrate + static_cast<std::int64_t>(spec.arl_targets.size()) * spec.trials_edd);
  std::atomic<std::int64_t> done{0};

  ExperimentResult result;
  result.bandwidth = bw;
  result.moments = ctx.moments;
  result.horizon_calibrate = horizon_cal_base;
  for (const auto& proc : spec.procedures) {
    // KCUSUM consumes ~1 reference draw per step without replacement; keep the
    // calibration horizon within the drawn pool.
    std::int64_t horizon_cal = horizon_cal_base;
    if (proc == "kcusum") horizon_cal = std::min<std::int64_t>(horizon_cal, spec.reference_size - 2);
    const auto tracks = h0_tracks(proc, ctx, horizon_cal, done, progress, progress_total);
    for (std::size_t gi = 0; gi < spec.arl_targets.size(); ++gi) {
      const double gamma = spec.arl_targets[gi];
      const auto horizon_gamma = std::min<std::int64_t>(
          horizon_cal, static_cast<std::int64_t>(std::ceil(spec.horizon_calibrate_factor * gamma)));
      const double b = calibrate_threshold(tracks, gamma, horizon_gamma);
      result.rows.push_back(edd_row(proc, ctx, gi, gamma, b, done, progress, progress_total));
    }
  }
  return result;
}

std::vector<ResultRow> run_experiment(const ExperimentSpec& spec, const ProgressFn& progress) {
  return run_experiment_full(spec, progress).rows;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::string emit_table(std::span<const ResultRow> rows, TableFormat format) {
  std::ostringstream out;
  switch (format) {
    case TableFormat::csv: {
      out << "procedure,arl_target,threshold,edd_mean,edd_stderr,miss_count,trials\n";
      for (const auto& r : rows)
        out << r.procedure << ',' << fmt_double(r.arl_target) << ',' << fmt_double(r.threshold) << ','
            << fmt_double(r.edd_mean) << ',' << fmt_double(r.edd_stderr) << ',' << r.miss_count << ','
            << r.trials << '\n';
      break;
    }
    case TableFormat::json: {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& r : rows)
        arr.push_back({{"procedure", r.procedure},
                       {"arl_target", r.arl_target},
                       {"threshold", r.threshold},
                       {"edd_mean", r.edd_mean},
                       {"edd_stderr", r.edd_stderr},
                       {"miss_count", r.miss_count},
                       {"trials", r.trials}});
      out << arr.dump(2) << '\n';
      break;
    }
    case TableFormat::markdown: {
      out << "| procedure | arl_target | threshold | edd_mean | edd_stderr | miss_count | trials |\n";
      out << "|---|---|---|---|---|---|---|\n";
      for (const auto& r : rows)
        out << "| " << r.procedure << " | " << fmt_double(r.arl_target) << " | " << fmt_double(r.threshold)
            << " | " << fmt_double(r.edd_mean) << " | " << fmt_double(r.edd_stderr) << " | " << r.miss_count
            << " | " << r.trials << " |\n";
      break;
    }
  }
  return out.str();
}

std::vector<ResultRow> rows_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  std::vector<ResultRow> rows;
  for (const auto& e : j) {
    ResultRow r;
    r.procedure = e.at("procedure").get<std::string>();
    r.arl_target = e.at("arl_target").get<double>();
    r.threshold = e.at("threshold").get<double>();
    r.edd_mean = e.at("edd_mean").get<double>();
    r.edd_stderr = e.at("edd_stderr").get<double>();
    r.miss_count = e.at("miss_count").get<std::int64_t>();
    r.trials = e.at("trials").get<std::int64_t>();
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

nlohmann::json dist_json(const DistributionSpec& d) {
  nlohmann::json j;
  j["kind"] = distribution_kind_name(d.kind);
  j["dim"] = d.dim;
  if (!d.mean.empty()) j["mean"] = d.mean;
  if (!d.variance.empty()) j["variance"] = d.variance;
  if (!d.scale.empty()) j["scale"] = d.scale;
  if (!d.rate.empty()) j["rate"] = d.rate;
  if (!d.low.empty()) j["low"] = d.low;
  if (!d.high.empty()) j["high"] = d.high;
  if (!d.weights.empty()) {
    j["weights"] = d.weights;
    auto comps = nlohmann::json::array();
    for (const auto& c : d.components) comps.push_back(dist_json(c));
    j["components"] = comps;
  }
  return j;
}

}  // namespace

std::string distribution_to_json(const DistributionSpec& spec) { return dist_json(spec).dump(2); }

std::string experiment_meta_json(const ExperimentSpec& spec, double resolved_bandwidth,
                                 const MomentEstimates& moments, std::int64_t horizon_calibrate) {
  nlohmann::json j;
  j["name"] = spec.name;
  j["pre"] = dist_json(spec.pre);
  j["post"] = dist_json(spec.post);
  j["procedures"] = spec.procedures;
  j["arl_targets"] = spec.arl_targets;
  j["trials_calibrate"] = spec.trials_calibrate;
  j["trials_edd"] = spec.trials_edd;
  j["horizon_edd"] = spec.horizon_edd;
  j["horizon_calibrate_factor"] = spec.horizon_calibrate_factor;
  j["horizon_calibrate"] = horizon_calibrate;
  j["reference_size"] = spec.reference_size;
  j["N"] = spec.n_blocks;
  j["w"] = spec.w;
  j["b_min"] = spec.b_min;
  j["kcusum_delta"] = spec.kcusum_delta;
  j["hotelling_kappa_cap"] = spec.hotelling_kappa_cap;
  j["median_subsample"] = spec.median_subsample;
  j["moment_draws"] = spec.moment_draws;
  j["bandwidth"] = resolved_bandwidth;
  j["bandwidth_source"] = spec.bandwidth ? "fixed" : "median_heuristic";
  j["seed"] = spec.seed;
  j["moments"] = nlohmann::json::parse(moments_to_json(moments));
  return j.dump(2);
}

namespace {

using SectionMap = std::map<std::string, std::map<std::string, std::string>>;

SectionMap parse_ini(std::istream& in) {
  SectionMap sections;
  std::string line, section = "experiment";
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string{};
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::runtime_error("config line " + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(lineno) + ": expected key = value");
    sections[section][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return sections;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::string token;
  std::istringstream ss(s);
  while (std::getline(ss, token, ',')) {
    if (token.find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(std::stod(token));
  }
  if (out.empty()) throw std::runtime_error("config: empty numeric list");
  return out;
}

std::vector<std::string> parse_names(const std::string& s) {
  std::vector<std::string> out;
  std::string token;
  std::istringstream ss(s);
  while (std::getline(ss, token, ',')) {
    const auto b = token.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = token.find_last_not_of(" \t");
    out.push_back(token.substr(b, e - b + 1));
  }
  return out;
}

DistributionSpec parse_distribution(const SectionMap& sections, const std::string& name, int dim) {
  const auto it = sections.find(name);
  if (it == sections.end()) throw std::runtime_error("config: missing [" + name + "] section");
  const auto& kv = it->second;
  auto get = [&](const char* key) -> const std::string& {
    const auto k = kv.find(key);
    if (k == kv.end()) throw std::runtime_error("config [" + name + "]: missing " + key);
    return k->second;
  };
  DistributionSpec d;
  d.dim = dim;
  const std::string kind = get("kind");
  if (kind == "gaussian") {
    d.kind = DistributionSpec::Kind::gaussian;
    d.mean = parse_list(get("mean"));
    d.variance = parse_list(get("variance"));
  } else if (kind == "laplace") {
    d.kind = DistributionSpec::Kind::laplace;
    d.mean = parse_list(get("mean"));
    d.scale = parse_list(get("scale"));
  } else if (kind == "exponential") {
    d.kind = DistributionSpec::Kind::exponential;
    d.rate = parse_list(get("rate"));
  } else if (kind == "uniform") {
    d.kind = DistributionSpec::Kind::uniform;
    d.low = parse_list(get("low"));
    d.high = parse_list(get("high"));
  } else if (kind == "gaussian_mixture") {
    d.kind = DistributionSpec::Kind::gaussian_mixture;
    d.weights = parse_list(get("weights"));
    for (std::size_t c = 1; c <= d.weights.size(); ++c)
      d.components.push_back(parse_distribution(sections, name + "." + std::to_string(c), dim));
  } else {
    throw std::runtime_error("config [" + name + "]: unknown kind " + kind);
  }
  d.validate();
  return d;
}

}  // namespace

ExperimentSpec parse_experiment_config(std::istream& in) {
  const auto sections = parse_ini(in);
  const auto ex = sections.find("experiment");
  if (ex == sections.end()) throw std::runtime_error("config: missing [experiment] section");
  const auto& kv = ex->second;
  auto opt = [&](const char* key) -> const std::string* {
    const auto k = kv.find(key);
    return k == kv.end() ? nullptr : &k->second;
  };

  ExperimentSpec spec;
  if (const auto* v = opt("name")) spec.name = *v;
  int dim = 1;
  if (const auto* v = opt("dim")) dim = std::stoi(*v);
  if (const auto* v = opt("seed")) spec.seed = std::stoull(*v);
  if (const auto* v = opt("n_blocks")) spec.n_blocks = std::stoi(*v);
  if (const auto* v = opt("window")) spec.w = std::stoi(*v);
  if (const auto* v = opt("b_min")) spec.b_min = std::stoi(*v);
  if (const auto* v = opt("reference_size")) spec.reference_size = std::stoll(*v);
  if (const auto* v = opt("arl_targets")) spec.arl_targets = parse_list(*v);
  if (const auto* v = opt("trials_calibrate")) spec.trials_calibrate = std::stoll(*v);
  if (const auto* v = opt("trials_edd")) spec.trials_edd = std::stoll(*v);
  if (const auto* v = opt("horizon_edd")) spec.horizon_edd = std::stoll(*v);
  if (const auto* v = opt("horizon_calibrate_factor")) spec.horizon_calibrate_factor = std::stod(*v);
  if (const auto* v = opt("procedures")) spec.procedures = parse_names(*v);
  if (const auto* v = opt("kcusum_delta")) spec.kcusum_delta = std::stod(*v);
  if (const auto* v = opt("hotelling_kappa_cap")) spec.hotelling_kappa_cap = std::stoi(*v);
  if (const auto* v = opt("median_subsample")) spec.median_subsample = std::stoll(*v);
  if (const auto* v = opt("moment_draws")) spec.moment_draws = std::stoll(*v);
  if (const auto* v = opt("bandwidth"))
    if (*v != "median") spec.bandwidth = std::stod(*v);

  spec.pre = parse_distribution(sections, "pre", dim);
  spec.post = parse_distribution(sections, "post", dim);
  spec.validate();
  return spec;
}

ExperimentSpec parse_experiment_config_text(const std::string& text) {
  std::istringstream ss(text);
  return parse_experiment_config(ss);
}

}  // namespace okcusum
