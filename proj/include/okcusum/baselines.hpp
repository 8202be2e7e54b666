#pragma once

#include "okcusum/detector.hpp"

namespace okcusum {

/// CUSUM recursion on the linear-time two-sample increment: on even steps
/// s <- max(0, s + h(x1, x2, y_{t-1}, y_t) - delta) with two fresh reference
/// draws, on odd steps the statistic is frozen. Reference rows are consumed
/// sequentially without replacement from a seeded shuffle of the pool.
class KcusumDetector : public Procedure {
 public:
  KcusumDetector(KernelSpec spec, const Points& reference_pool, double delta, double threshold,
                 std::uint64_t seed);

  StepResult step(std::span<const double> y) override;
  std::int64_t t() const override { return t_; }
  double statistic() const { return s_; }

 private:
  KernelSpec spec_;
  Points pool_;
  std::vector<std::int64_t> order_;
  std::int64_t cursor_ = 0;
  double delta_;
  double threshold_;
  double s_ = 0.0;
  std::int64_t t_ = 0;
  std::vector<double> y_prev_;
};

/// Parametric comparator: S_t = max over kappa in [1, t-1] of the two-sample
/// Hotelling T^2 with split U = (X_1..X_M, Y_1..Y_{kappa-1}), V = (Y_kappa..Y_t)
/// and the pooled covariance, scaled by (M+kappa-1)(t-kappa+1)/(M+t).
/// kappa_cap > 0 restricts the scan to the most recent kappa_cap split points
/// to bound cost on long runs; 0 scans everything.
class HotellingDetector : public Procedure {
 public:
  HotellingDetector(const Points& reference, double threshold, int kappa_cap = 0,
                    double ridge_rel = 1e-8);

  StepResult step(std::span<const double> y) override;
  std::int64_t t() const override { return t_; }

  /// max_kappa T^2 at the current t (t >= 2). Exposed for unit checks.
  double statistic() const { return last_stat_; }

 private:
  double t2_at(std::int64_t kappa) const;

  int dim_;
  std::int64_t m_;  // reference size M
  double threshold_;
  int kappa_cap_;
  double ridge_rel_;
  std::vector<double> s1x_;   // reference first-moment sum
  std::vector<double> s2x_;   // reference second-moment sum (d x d)
  std::vector<double> s1y_;   // prefix sums, (t+1) x d, index 0 = empty
  std::vector<double> s2y_;   // prefix sums, (t+1) x d x d
  std::int64_t t_ = 0;
  double last_stat_ = kNegInf;
};

}  // namespace okcusum
