#include "okcusum/distributions.hpp"

#include <cmath>

namespace okcusum {

namespace {

std::vector<double> broadcast(std::vector<double> v, int dim, const char* what) {
  if (static_cast<int>(v.size()) == dim) return v;
  if (v.size() == 1) return std::vector<double>(static_cast<std::size_t>(dim), v[0]);
  throw std::invalid_argument(std::string("DistributionSpec: ") + what + " must have 1 or dim entries");
}

}  // namespace

void DistributionSpec::validate() const {
  if (dim < 1) throw std::invalid_argument("DistributionSpec: dim must be >= 1");
  using K = Kind;
  switch (kind) {
    case K::gaussian:
      broadcast(mean, dim, "mean");
      for (double v : broadcast(variance, dim, "variance"))
        if (!(v > 0.0)) throw std::invalid_argument("DistributionSpec: variance must be positive");
      break;
    case K::laplace:
      broadcast(mean, dim, "mean");
      for (double v : broadcast(scale, dim, "scale"))
        if (!(v > 0.0)) throw std::invalid_argument("DistributionSpec: scale must be positive");
      break;
    case K::exponential:
      for (double v : broadcast(rate, dim, "rate"))
        if (!(v > 0.0)) throw std::invalid_argument("DistributionSpec: rate must be positive");
      break;
    case K::uniform: {
      const auto lo = broadcast(low, dim, "low");
      const auto hi = broadcast(high, dim, "high");
      for (int i = 0; i < dim; ++i)
        if (!(lo[static_cast<std::size_t>(i)] < hi[static_cast<std::size_t>(i)]))
          throw std::invalid_argument("DistributionSpec: need low < high componentwise");
      break;
    }
    case K::gaussian_mixture: {
      if (weights.empty() || weights.size() != components.size())
        throw std::invalid_argument("DistributionSpec: mixture needs matching weights and components");
      double s = 0.0;
      for (double w : weights) {
        if (w < 0.0) throw std::invalid_argument("DistributionSpec: mixture weights must be nonnegative");
        s += w;
      }
      if (std::abs(s - 1.0) > 1e-9)
        throw std::invalid_argument("DistributionSpec: mixture weights must sum to 1");
      for (const auto& c : components) {
        if (c.dim != dim) throw std::invalid_argument("DistributionSpec: mixture component dim mismatch");
        c.validate();
      }
      break;
    }
  }
}

DistributionSpec gaussian_iso(int dim, double mean, double variance) {
  DistributionSpec s;
  s.kind = DistributionSpec::Kind::gaussian;
  s.dim = dim;
  s.mean = {mean};
  s.variance = {variance};
  return s;
}

DistributionSpec laplace_iso(int dim, double location, double scale) {
  DistributionSpec s;
  s.kind = DistributionSpec::Kind::laplace;
  s.dim = dim;
  s.mean = {location};
  s.scale = {scale};
  return s;
}

DistributionSpec uniform_box(int dim, double low, double high) {
  DistributionSpec s;
  s.kind = DistributionSpec::Kind::uniform;
  s.dim = dim;
  s.low = {low};
  s.high = {high};
  return s;
}

DistributionSpec exponential_iso(int dim, double rate) {
  DistributionSpec s;
  s.kind = DistributionSpec::Kind::exponential;
  s.dim = dim;
  s.rate = {rate};
  return s;
}

DistributionSpec mixture(std::vector<double> weights, std::vector<DistributionSpec> components) {
  DistributionSpec s;
  s.kind = DistributionSpec::Kind::gaussian_mixture;
  s.dim = components.empty() ? 1 : components.front().dim;
  s.weights = std::move(weights);
  s.components = std::move(components);
  return s;
}

void sample_into(const DistributionSpec& spec, Rng& rng, std::span<double> out) {
  using K = DistributionSpec::Kind;
  const int d = spec.dim;
  switch (spec.kind) {
    case K::gaussian: {
      const double m0 = spec.mean.size() == 1 ? spec.mean[0] : 0.0;
      const double v0 = spec.variance.size() == 1 ? spec.variance[0] : 0.0;
      for (int i = 0; i < d; ++i) {
        const double m = spec.mean.size() == 1 ? m0 : spec.mean[static_cast<std::size_t>(i)];
        const double v = spec.variance.size() == 1 ? v0 : spec.variance[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(i)] = m + std::sqrt(v) * rng.normal();
      }
      break;
    }
    case K::laplace:
      for (int i = 0; i < d; ++i) {
        const double m = spec.mean.size() == 1 ? spec.mean[0] : spec.mean[static_cast<std::size_t>(i)];
        const double s = spec.scale.size() == 1 ? spec.scale[0] : spec.scale[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(i)] = m + rng.laplace(s);
      }
      break;
    case K::exponential:
      for (int i = 0; i < d; ++i) {
        const double r = spec.rate.size() == 1 ? spec.rate[0] : spec.rate[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(i)] = rng.exponential(r);
      }
      break;
    case K::uniform:
      for (int i = 0; i < d; ++i) {
        const double lo = spec.low.size() == 1 ? spec.low[0] : spec.low[static_cast<std::size_t>(i)];
        const double hi = spec.high.size() == 1 ? spec.high[0] : spec.high[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(i)] = lo + (hi - lo) * rng.uniform();
      }
      break;
    case K::gaussian_mixture: {
      const double u = rng.uniform();
      double acc = 0.0;
      std::size_t pick = spec.components.size() - 1;
      for (std::size_t c = 0; c < spec.weights.size(); ++c) {
        acc += spec.weights[c];
        if (u < acc) {
          pick = c;
          break;
        }
      }
      sample_into(spec.components[pick], rng, out);
      break;
    }
  }
}

Points sample(const DistributionSpec& spec, std::int64_t n, std::uint64_t seed) {
  spec.validate();
  if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
  Points out(spec.dim, n);
  Rng rng(mix64(seed, 0x73616d70));
  for (std::int64_t i = 0; i < n; ++i) sample_into(spec, rng, out.row(i));
  return out;
}

std::string distribution_kind_name(DistributionSpec::Kind k) {
  switch (k) {
    case DistributionSpec::Kind::gaussian: return "gaussian";
    case DistributionSpec::Kind::gaussian_mixture: return "gaussian_mixture";
    case DistributionSpec::Kind::laplace: return "laplace";
    case DistributionSpec::Kind::uniform: return "uniform";
    case DistributionSpec::Kind::exponential: return "exponential";
  }
  return "unknown";
}

}  // namespace okcusum
