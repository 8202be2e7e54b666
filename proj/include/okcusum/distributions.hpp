#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "okcusum/rng.hpp"
#include "okcusum/types.hpp"

namespace okcusum {

/// Declarative sampler for the simulation experiments. Parameters are stored
/// per coordinate; scalars broadcast to the dimension.
struct DistributionSpec {
  enum class Kind { gaussian, gaussian_mixture, laplace, uniform, exponential };

  Kind kind = Kind::gaussian;
  int dim = 1;
  std::vector<double> mean;      // gaussian / laplace location
  std::vector<double> variance;  // gaussian
  std::vector<double> scale;     // laplace
  std::vector<double> rate;      // exponential
  std::vector<double> low, high; // uniform
  std::vector<double> weights;               // mixture
  std::vector<DistributionSpec> components;  // mixture

  void validate() const;
};

DistributionSpec gaussian_iso(int dim, double mean, double variance);
DistributionSpec laplace_iso(int dim, double location, double scale);
DistributionSpec uniform_box(int dim, double low, double high);
DistributionSpec exponential_iso(int dim, double rate);
DistributionSpec mixture(std::vector<double> weights, std::vector<DistributionSpec> components);

/// One draw appended to `out` (dim values).
void sample_into(const DistributionSpec& spec, Rng& rng, std::span<double> out);

/// n i.i.d. draws; reproducible given the seed.
Points sample(const DistributionSpec& spec, std::int64_t n, std::uint64_t seed);

std::string distribution_kind_name(DistributionSpec::Kind k);

}  // namespace okcusum
