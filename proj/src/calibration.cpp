#include "okcusum/calibration.hpp"

#include <atomic>
#include <cmath>

#include <json.hpp>

#include "okcusum/rng.hpp"
#include "okcusum/threading.hpp"

namespace okcusum {

namespace {

constexpr double kSqrt2Pi = 2.5066282746310005024;

// Phi via erfc keeps relative error ~1e-15; the exponential terms in the ARL
// sum amplify CDF errors near large theta.
double norm_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }
double norm_pdf(double x) { return std::exp(-0.5 * x * x) / kSqrt2Pi; }

struct ThetaPsi {
  double theta, psi;
};

ThetaPsi theta_psi(double b, double m3) {
  if (std::abs(m3) < 1e-12) return {b, 0.5 * b * b};
  const double disc = 1.0 + 2.0 * b * m3;
  if (disc < 0.0)
    throw std::runtime_error("arl_approx: skewness correction infeasible; fall back to gaussian_order");
  const double theta = (-1.0 + std::sqrt(disc)) / m3;
  const double psi = 0.5 * theta * theta + m3 * theta * theta * theta / 6.0;
  return {theta, psi};
}

}  // namespace

const char* arl_method_name(ArlMethod m) {
  switch (m) {
    case ArlMethod::gaussian_order: return "gaussian_order";
    case ArlMethod::skewness_corrected: return "skewness_corrected";
    case ArlMethod::monte_carlo: return "monte_carlo";
  }
  return "unknown";
}

ArlMethod arl_method_from_name(const std::string& name) {
  if (name == "gaussian_order" || name == "gaussian") return ArlMethod::gaussian_order;
  if (name == "skewness_corrected" || name == "skew") return ArlMethod::skewness_corrected;
  if (name == "monte_carlo" || name == "mc") return ArlMethod::monte_carlo;
  throw std::invalid_argument("unknown ARL method: " + name);
}

std::string calibration_to_json(const CalibrationResult& r) {
  nlohmann::json j;
  j["threshold"] = r.threshold;
  j["target_arl"] = r.target_arl;
  j["method"] = arl_method_name(r.method);
  j["predicted_arl"] = r.predicted_arl;
  j["w"] = r.w;
  if (!r.per_b_theta.empty()) j["per_b_theta"] = r.per_b_theta;
  return j.dump(2);
}

CalibrationResult calibration_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  CalibrationResult r;
  r.threshold = j.at("threshold").get<double>();
  r.target_arl = j.at("target_arl").get<double>();
  r.method = arl_method_from_name(j.at("method").get<std::string>());
  r.predicted_arl = j.at("predicted_arl").get<double>();
  r.w = j.at("w").get<int>();
  if (j.contains("per_b_theta")) r.per_b_theta = j.at("per_b_theta").get<std::vector<double>>();
  return r;
}

double nu(double mu) {
  if (!(mu > 0.0)) throw std::invalid_argument("nu: argument must be positive");
  const double half = 0.5 * mu;
  return (2.0 / mu) * (norm_cdf(half) - 0.5) / (half * norm_cdf(half) + norm_pdf(half));
}

double arl_approx(double b, int w, const MomentEstimates& m, ArlMethod method) {
  if (!(b > 0.0)) throw std::invalid_argument("arl_approx: threshold must be positive");
  if (w < 2) throw std::invalid_argument("arl_approx: window must be >= 2");
  if (method == ArlMethod::monte_carlo)
    throw std::invalid_argument("arl_approx: monte_carlo is not an analytic method");
  double sum = 0.0;
  for (int bb = 2; bb <= w; ++bb) {
    const double pair = static_cast<double>(bb) * (bb - 1);
    const double shape = (2.0 * bb - 1.0) / pair;
    ThetaPsi tp{b, 0.5 * b * b};
    if (method == ArlMethod::skewness_corrected) tp = theta_psi(b, third_moment_h0(m, bb));
    sum += std::exp(tp.psi - tp.theta * b) * shape * nu(tp.theta * std::sqrt(2.0 * shape));
  }
  return kSqrt2Pi / (b * sum);
}

double arl_gaussian_collapsed(double b, int w) {
  if (!(b > 0.0) || w < 2) throw std::invalid_argument("arl_gaussian_collapsed: bad arguments");
  return kSqrt2Pi * b * std::exp(0.5 * b * b) / w;
}

double skewness_corrected_theta(double b, double m3) { return theta_psi(b, m3).theta; }

namespace {

double bisect_threshold(double gamma, const std::function<double(double)>& arl_of_b) {
  if (!(gamma > 1.0)) throw std::invalid_argument("threshold_for_arl: target ARL must exceed 1");
  double lo = 0.1, hi = 50.0;
  int guard = 0;
  while (arl_of_b(lo) > gamma) {
    lo *= 0.5;
    if (++guard > 60) throw std::runtime_error("threshold_for_arl: target unreachable (lower bracket)");
  }
  guard = 0;
  while (arl_of_b(hi) < gamma) {
    hi *= 2.0;
    if (++guard > 60) throw std::runtime_error("threshold_for_arl: target unreachable (upper bracket)");
  }
  while (hi - lo > 1e-8 * hi) {
    const double mid = 0.5 * (lo + hi);
    (arl_of_b(mid) >= gamma ? hi : lo) = mid;
  }
  return hi;  // smallest b with predicted ARL >= gamma
}

}  // namespace

CalibrationResult threshold_for_arl(double gamma, int w, const MomentEstimates& m, ArlMethod method) {
  CalibrationResult r;
  r.target_arl = gamma;
  r.method = method;
  r.w = w;
  r.threshold = bisect_threshold(gamma, [&](double b) { return arl_approx(b, w, m, method); });
  r.predicted_arl = arl_approx(r.threshold, w, m, method);
  if (method == ArlMethod::skewness_corrected) {
    r.per_b_theta.reserve(static_cast<std::size_t>(w - 1));
    for (int bb = 2; bb <= w; ++bb)
      r.per_b_theta.push_back(theta_psi(r.threshold, third_moment_h0(m, bb)).theta);
  }
  return r;
}

double threshold_for_arl_collapsed(double gamma, int w) {
  return bisect_threshold(gamma, [&](double b) { return arl_gaussian_collapsed(b, w); });
}

namespace {

struct TrialOutcome {
  std::int64_t stop = 0;
  bool alarmed = false;
};

// warmup_steps > 0 feeds that many pre-change observations first (no alarm
// checks); the stopping time then counts stream steps after the warm-up.
template <typename MakeStream>
std::vector<TrialOutcome> run_trials(const DetectorConfig& config, const DistributionSpec& ref_dist,
                                     const MakeStream& make_stream, std::int64_t trials,
                                     std::int64_t horizon, std::uint64_t seed, const ProgressFn& progress,
                                     std::int64_t warmup_steps = 0) {
  if (trials < 1) throw std::invalid_argument("monte carlo: trials must be >= 1");
  config.validate();
  std::vector<TrialOutcome> out(static_cast<std::size_t>(trials));
  std::atomic<std::int64_t> done{0};
  const int n_chunks = static_cast<int>(std::min<std::int64_t>(trials, 8 * thread_count()));
  parallel_chunks(trials, n_chunks, [&](int, std::int64_t lo, std::int64_t hi) {
    std::vector<double> row(static_cast<std::size_t>(ref_dist.dim));
    for (std::int64_t i = lo; i < hi; ++i) {
      const std::uint64_t trial_seed = mix64(seed, 0x7472ull, static_cast<std::uint64_t>(i));
      const Points ref =
          sample(ref_dist, static_cast<std::int64_t>(config.n_blocks) * config.w, mix64(trial_seed, 1));
      OnlineKernelCusum det(config, ref, mix64(trial_seed, 2));
      Rng stream_rng(mix64(trial_seed, 3));
      for (std::int64_t step = 0; step < warmup_steps; ++step) {
        sample_into(ref_dist, stream_rng, row);
        det.step(row);
      }
      auto& spec = make_stream(i);
      TrialOutcome o;
      for (std::int64_t step = 0; step < horizon; ++step) {
        sample_into(spec, stream_rng, row);
        const StepResult res = det.step(row);
        if (res.alarm) {
          o.stop = step + 1;
          o.alarmed = true;
          break;
        }
      }
      if (!o.alarmed) o.stop = horizon;
      out[static_cast<std::size_t>(i)] = o;
      const auto d = done.fetch_add(1) + 1;
      if (progress) progress(d, trials);
    }
  });
  return out;
}

}  // namespace

ArlEstimate monte_carlo_arl(const DetectorConfig& config, const DistributionSpec& sampler,
                            std::int64_t trials, std::int64_t horizon, std::uint64_t seed,
                            const ProgressFn& progress) {
  sampler.validate();
  const auto outcomes =
      run_trials(config, sampler, [&](std::int64_t) -> const DistributionSpec& { return sampler; }, trials,
                 horizon, seed, progress);
  ArlEstimate est;
  est.trials = trials;
  double sum = 0.0, sum2 = 0.0;
  for (const auto& o : outcomes) {
    const double v = static_cast<double>(o.stop);
    sum += v;
    sum2 += v * v;
    if (!o.alarmed) ++est.censored;
  }
  est.mean = sum / static_cast<double>(trials);
  const double var = std::max(0.0, sum2 / trials - est.mean * est.mean);
  est.stderr_ = std::sqrt(var / static_cast<double>(trials));
  return est;
}

EddEstimate monte_carlo_edd(const DetectorConfig& config, const DistributionSpec& pre,
                            const DistributionSpec& post, std::int64_t trials, std::int64_t horizon,
                            std::uint64_t seed, const ProgressFn& progress) {
  pre.validate();
  post.validate();
  if (pre.dim != post.dim) throw std::invalid_argument("monte_carlo_edd: dimension mismatch");
  // Steady-state change: w pre-change observations fill the window before the
  // change hits, so every block size is live from the first post-change step.
  const auto outcomes =
      run_trials(config, pre, [&](std::int64_t) -> const DistributionSpec& { return post; }, trials, horizon,
                 seed, progress, config.w);
  EddEstimate est;
  est.trials = trials;
  double sum = 0.0, sum2 = 0.0;
  std::int64_t hits = 0;
  for (const auto& o : outcomes) {
    if (!o.alarmed) {
      ++est.miss_count;
      continue;
    }
    const double v = static_cast<double>(o.stop);
    sum += v;
    sum2 += v * v;
    ++hits;
  }
  if (hits > 0) {
    est.mean = sum / static_cast<double>(hits);
    const double var = std::max(0.0, sum2 / hits - est.mean * est.mean);
    est.stderr_ = std::sqrt(var / static_cast<double>(hits));
  }
  return est;
}

double edd_predict(double b, double rho, double d_hat) {
  if (!(b > 0.0) || !(rho > 0.0)) throw std::invalid_argument("edd_predict: b and rho must be positive");
  if (!(d_hat > 0.0)) throw std::invalid_argument("edd_predict: change undetectable with this kernel");
  return b / (rho * d_hat);
}

int recommend_window(double b, double rho, double d_hat, double kernel_bound, int n_blocks, double eps) {
  if (!(b > 0.0) || !(rho > 0.0) || !(kernel_bound > 0.0) || n_blocks < 1)
    throw std::invalid_argument("recommend_window: bad arguments");
  if (!(d_hat > 0.0)) throw std::invalid_argument("recommend_window: change undetectable with this kernel");
  if (!(eps > 0.0) || !(eps < 3.0)) throw std::invalid_argument("recommend_window: need 0 < eps < 3");
  const double drift = rho * d_hat;
  const double floor18 = 7.0 * b / drift;
  const double denom = b * b * std::min(static_cast<double>(n_blocks) / 4.0, b / drift);
  const double w19 = 6.0 * b / drift + 512.0 * kernel_bound * kernel_bound * std::log(3.0 / eps) / denom;
  return static_cast<int>(std::ceil(std::max(floor18, w19)));
}

}  // namespace okcusum
