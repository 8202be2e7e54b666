#include "okcusum/baselines.hpp"

#include <cmath>

#include "okcusum/mmd.hpp"
#include "okcusum/rng.hpp"

namespace okcusum {

KcusumDetector::KcusumDetector(KernelSpec spec, const Points& reference_pool, double delta, double threshold,
                               std::uint64_t seed)
    : spec_(spec), pool_(reference_pool), delta_(delta), threshold_(threshold) {
  spec_.validate();
  if (!(delta > 0.0)) throw std::invalid_argument("KcusumDetector: drift delta must be positive");
  if (pool_.size() < 2) throw std::invalid_argument("KcusumDetector: reference pool too small");
  Rng rng(mix64(seed, 0x6b637573));
  order_ = rng.permutation(pool_.size());
}

StepResult KcusumDetector::step(std::span<const double> y) {
  if (static_cast<int>(y.size()) != pool_.dim)
    throw std::invalid_argument("kcusum_step: dimension mismatch");
  t_ += 1;
  if (t_ % 2 == 0) {
    if (cursor_ + 2 > static_cast<std::int64_t>(order_.size()))
      throw std::runtime_error("kcusum_step: reference pool exhausted");
    const auto x1 = pool_.row(order_[static_cast<std::size_t>(cursor_)]);
    const auto x2 = pool_.row(order_[static_cast<std::size_t>(cursor_ + 1)]);
    cursor_ += 2;
    const double inc = h_statistic(spec_, x1, x2, y_prev_, y) - delta_;
    s_ = std::max(0.0, s_ + inc);
  }
  y_prev_.assign(y.begin(), y.end());

  StepResult res;
  res.t = t_;
  res.statistic = s_;
  res.argmax_b = 0;
  res.alarm = s_ >= threshold_;
  return res;
}

namespace {

// Cholesky solve of A x = b for symmetric positive definite A (d x d,
// row-major). Returns false when a pivot fails.
bool chol_solve(std::vector<double> a, int d, const double* b, double* x) {
  for (int j = 0; j < d; ++j) {
    double diag = a[static_cast<std::size_t>(j) * d + j];
    for (int k = 0; k < j; ++k) {
      const double v = a[static_cast<std::size_t>(j) * d + k];
      diag -= v * v;
    }
    if (!(diag > 0.0)) return false;
    diag = std::sqrt(diag);
    a[static_cast<std::size_t>(j) * d + j] = diag;
    for (int i = j + 1; i < d; ++i) {
      double v = a[static_cast<std::size_t>(i) * d + j];
      for (int k = 0; k < j; ++k)
        v -= a[static_cast<std::size_t>(i) * d + k] * a[static_cast<std::size_t>(j) * d + k];
      a[static_cast<std::size_t>(i) * d + j] = v / diag;
    }
  }
  // forward then backward substitution with the lower factor
  for (int i = 0; i < d; ++i) {
    double v = b[i];
    for (int k = 0; k < i; ++k) v -= a[static_cast<std::size_t>(i) * d + k] * x[k];
    x[i] = v / a[static_cast<std::size_t>(i) * d + i];
  }
  for (int i = d - 1; i >= 0; --i) {
    double v = x[i];
    for (int k = i + 1; k < d; ++k) v -= a[static_cast<std::size_t>(k) * d + i] * x[k];
    x[i] = v / a[static_cast<std::size_t>(i) * d + i];
  }
  return true;
}

}  // namespace

HotellingDetector::HotellingDetector(const Points& reference, double threshold, int kappa_cap,
                                     double ridge_rel)
    : dim_(reference.dim),
      m_(reference.size()),
      threshold_(threshold),
      kappa_cap_(kappa_cap),
      ridge_rel_(ridge_rel) {
  if (m_ < 2) throw std::invalid_argument("HotellingDetector: reference too small");
  const auto d = static_cast<std::size_t>(dim_);
  s1x_.assign(d, 0.0);
  s2x_.assign(d * d, 0.0);
  for (std::int64_t i = 0; i < m_; ++i) {
    const auto r = reference.row(i);
    for (int a = 0; a < dim_; ++a) {
      s1x_[static_cast<std::size_t>(a)] += r[static_cast<std::size_t>(a)];
      for (int b = 0; b < dim_; ++b)
        s2x_[static_cast<std::size_t>(a) * d + static_cast<std::size_t>(b)] +=
            r[static_cast<std::size_t>(a)] * r[static_cast<std::size_t>(b)];
    }
  }
  s1y_.assign(d, 0.0);      // prefix 0
  s2y_.assign(d * d, 0.0);  // prefix 0
}

double HotellingDetector::t2_at(std::int64_t kappa) const {
  const auto d = static_cast<std::size_t>(dim_);
  const std::int64_t nu_count = m_ + kappa - 1;
  const std::int64_t nv_count = t_ - kappa + 1;
  const double* y1_lo = s1y_.data() + static_cast<std::size_t>(kappa - 1) * d;
  const double* y2_lo = s2y_.data() + static_cast<std::size_t>(kappa - 1) * d * d;
  const double* y1_hi = s1y_.data() + static_cast<std::size_t>(t_) * d;
  const double* y2_hi = s2y_.data() + static_cast<std::size_t>(t_) * d * d;

  std::vector<double> u1(d), v1(d), diff(d), scat(d * d);
  for (std::size_t a = 0; a < d; ++a) {
    u1[a] = (s1x_[a] + y1_lo[a]) / static_cast<double>(nu_count);
    v1[a] = (y1_hi[a] - y1_lo[a]) / static_cast<double>(nv_count);
    diff[a] = u1[a] - v1[a];
  }
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b) {
      const double s2u = s2x_[a * d + b] + y2_lo[a * d + b];
      const double s2v = y2_hi[a * d + b] - y2_lo[a * d + b];
      scat[a * d + b] = (s2u - nu_count * u1[a] * u1[b]) + (s2v - nv_count * v1[a] * v1[b]);
    }
  const double denom = static_cast<double>(m_ + t_ - 2);
  for (auto& v : scat) v /= denom;

  std::vector<double> x(d);
  if (!chol_solve(scat, dim_, diff.data(), x.data())) {
    double tr = 0.0;
    for (std::size_t a = 0; a < d; ++a) tr += scat[a * d + a];
    const double ridge = ridge_rel_ * tr / static_cast<double>(dim_);
    for (std::size_t a = 0; a < d; ++a) scat[a * d + a] += ridge;
    if (!chol_solve(scat, dim_, diff.data(), x.data()))
      throw std::runtime_error("hotelling_statistic: singular pooled covariance");
  }
  double quad = 0.0;
  for (std::size_t a = 0; a < d; ++a) quad += diff[a] * x[a];
  const double scale =
      static_cast<double>(nu_count) * static_cast<double>(nv_count) / static_cast<double>(m_ + t_);
  return scale * quad;
}

StepResult HotellingDetector::step(std::span<const double> y) {
  if (static_cast<int>(y.size()) != dim_) throw std::invalid_argument("hotelling step: dimension mismatch");
  const auto d = static_cast<std::size_t>(dim_);
  t_ += 1;
  // extend prefix sums
  const std::size_t base1 = static_cast<std::size_t>(t_ - 1) * d;
  const std::size_t base2 = static_cast<std::size_t>(t_ - 1) * d * d;
  s1y_.resize(static_cast<std::size_t>(t_ + 1) * d);
  s2y_.resize(static_cast<std::size_t>(t_ + 1) * d * d);
  for (std::size_t a = 0; a < d; ++a) s1y_[base1 + d + a] = s1y_[base1 + a] + y[a];
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b)
      s2y_[base2 + d * d + a * d + b] = s2y_[base2 + a * d + b] + y[a] * y[b];

  StepResult res;
  res.t = t_;
  if (t_ < 2) {
    last_stat_ = kNegInf;
    return res;
  }
  std::int64_t kappa_lo = 1;
  if (kappa_cap_ > 0) kappa_lo = std::max<std::int64_t>(1, t_ - kappa_cap_);
  double best = kNegInf;
  for (std::int64_t kappa = kappa_lo; kappa <= t_ - 1; ++kappa) best = std::max(best, t2_at(kappa));
  last_stat_ = best;
  res.statistic = best;
  res.alarm = best >= threshold_;
  return res;
}

}  // namespace okcusum
