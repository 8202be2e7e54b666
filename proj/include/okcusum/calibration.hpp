#pragma once

#include <functional>

#include "okcusum/detector.hpp"
#include "okcusum/distributions.hpp"

namespace okcusum {

enum class ArlMethod { gaussian_order, skewness_corrected, monte_carlo };

const char* arl_method_name(ArlMethod m);
ArlMethod arl_method_from_name(const std::string& name);

struct CalibrationResult {
  double threshold = 0.0;   // b
  double target_arl = 0.0;  // gamma
  ArlMethod method = ArlMethod::gaussian_order;
  double predicted_arl = 0.0;
  int w = 0;
  std::vector<double> per_b_theta;  // skewness-corrected theta_B, B = 2..w (empty otherwise)
};

std::string calibration_to_json(const CalibrationResult& r);
CalibrationResult calibration_from_json(const std::string& text);

/// Siegmund's overshoot correction:
/// nu(mu) = (2/mu)(Phi(mu/2) - 1/2) / ((mu/2) Phi(mu/2) + phi(mu/2)), in (0,1).
double nu(double mu);

/// Analytic ARL approximation, summed over B = 2..w:
///   sqrt(2 pi)/b * { sum_B e^{psi_B - theta_B b} (2B-1)/(B(B-1))
///                    nu(theta_B sqrt(2(2B-1)/(B(B-1)))) }^{-1}.
/// gaussian_order: theta_B = b, psi_B = b^2/2 for every B.
/// skewness_corrected: theta_B solves theta + m3 theta^2/2 = b with
/// m3 = E_H0[Z_B^3], psi_B = theta^2/2 + m3 theta^3/6; the corrected theta_B
/// enters both the exponent and the nu argument.
double arl_approx(double b, int w, const MomentEstimates& m, ArlMethod method);

/// Closed-form collapse of the gaussian-order sum under the large-mu tail of
/// nu: sqrt(2 pi) b e^{b^2/2} / w.
double arl_gaussian_collapsed(double b, int w);

/// Root of theta + m3 theta^2/2 = b, i.e. (-1 + sqrt(1 + 2 b m3)) / m3;
/// falls back to b as m3 -> 0. Throws when 1 + 2 b m3 < 0.
double skewness_corrected_theta(double b, double m3);

/// Smallest b with predicted ARL >= gamma; bisection over [0.1, 50] with
/// automatic widening, relative tolerance 1e-8 on b.
CalibrationResult threshold_for_arl(double gamma, int w, const MomentEstimates& m, ArlMethod method);
double threshold_for_arl_collapsed(double gamma, int w);

using ProgressFn = std::function<void(std::int64_t done, std::int64_t total)>;

struct ArlEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::int64_t censored = 0;  // runs contributing the horizon
  std::int64_t trials = 0;
  double censor_fraction() const { return trials ? static_cast<double>(censored) / trials : 0.0; }
};

/// Monte Carlo ARL: average stopping time under H0 data, censored runs
/// contribute the horizon. Each trial draws a fresh N*w reference block set
/// and stream from `sampler` with randomness derived from (seed, trial).
ArlEstimate monte_carlo_arl(const DetectorConfig& config, const DistributionSpec& sampler,
                            std::int64_t trials, std::int64_t horizon, std::uint64_t seed,
                            const ProgressFn& progress = {});

struct EddEstimate {
  double mean = 0.0;    // over trials that alarm before the horizon
  double stderr_ = 0.0;
  std::int64_t miss_count = 0;
  std::int64_t trials = 0;
};

/// Monte Carlo EDD with the change at t = 0 of a running stream: the monitor
/// is warmed with w pre-change observations (window full, no alarm checks),
/// then all sequential data comes from `post` and the delay counts post-change
/// steps. Misses (no alarm by the horizon) are counted separately and excluded
/// from the mean.
EddEstimate monte_carlo_edd(const DetectorConfig& config, const DistributionSpec& pre,
                            const DistributionSpec& post, std::int64_t trials, std::int64_t horizon,
                            std::uint64_t seed, const ProgressFn& progress = {});

/// First-order detection-delay prediction b / (rho * d_hat).
double edd_predict(double b, double rho, double d_hat);

/// ceil(max(7b/(rho d_hat),
///          6b/(rho d_hat) + 512 K^2 log(3/eps) / (b^2 min(N/4, b/(rho d_hat))))).
int recommend_window(double b, double rho, double d_hat, double kernel_bound, int n_blocks, double eps);

}  // namespace okcusum
