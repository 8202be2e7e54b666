#include "okcusum/moments.hpp"

#include <cmath>
#include <limits>

#include <json.hpp>

#include "okcusum/rng.hpp"
#include "okcusum/simd.hpp"
#include "okcusum/threading.hpp"

namespace okcusum {

namespace {

double choose2(std::int64_t n) { return n < 2 ? 0.0 : 0.5 * static_cast<double>(n) * static_cast<double>(n - 1); }

struct Accum {
  double c1 = 0, c2 = 0;
  std::array<double, 6> t{};
  void operator+=(const Accum& o) {
    c1 += o.c1;
    c2 += o.c2;
    for (int i = 0; i < 6; ++i) t[i] += o.t[i];
  }
};

}  // namespace

MomentEstimates estimate_moments(const Points& reference, const KernelSpec& spec, int n_blocks,
                                 std::int64_t n_draws, std::uint64_t seed) {
  spec.validate();
  const std::int64_t m = reference.size();
  // The widest tuple (three h factors with disjoint X pairs) uses 9 distinct samples.
  if (m < 9) throw std::invalid_argument("estimate_moments: insufficient reference data (need at least 9 samples)");
  if (n_blocks < 1) throw std::invalid_argument("estimate_moments: N must be >= 1");
  if (n_draws < 1) throw std::invalid_argument("estimate_moments: n_draws must be >= 1");

  const double inv_r2 = 1.0 / (spec.bandwidth * spec.bandwidth);
  const int d = reference.dim;
  auto k = [&](std::int64_t i, std::int64_t j) {
    return std::exp(-simd::squared_distance(reference.row(i).data(), reference.row(j).data(),
                                            static_cast<std::size_t>(d)) *
                    inv_r2);
  };
  // Index layout per draw: x1..x6 = idx[0..5], y1..y3 = idx[6..8].
  auto h = [&](std::int64_t x1, std::int64_t x2, std::int64_t y1, std::int64_t y2) {
    return k(x1, x2) + k(y1, y2) - k(x1, y2) - k(x2, y1);
  };

  const int n_chunks = static_cast<int>(std::min<std::int64_t>(64, n_draws));
  std::vector<Accum> partial(static_cast<std::size_t>(n_chunks));

  parallel_chunks(n_draws, n_chunks, [&](int chunk, std::int64_t lo, std::int64_t hi) {
    Accum acc;
    std::int64_t idx[9];
    for (std::int64_t i = lo; i < hi; ++i) {
      Rng rng(mix64(seed, 0x6d6f6d, static_cast<std::uint64_t>(i)));
      rng.distinct_indices(m, 9, idx);
      const auto x1 = idx[0], x2 = idx[1], x3 = idx[2], x4 = idx[3], x5 = idx[4], x6 = idx[5];
      const auto y1 = idx[6], y2 = idx[7], y3 = idx[8];

      const double hA = h(x1, x2, y1, y2);
      const double hB = h(x2, x3, y2, y3);
      const double hCyc = h(x3, x1, y3, y1);
      const double hFreshCyc = h(x4, x5, y3, y1);
      const double hPairB = h(x3, x4, y2, y3);
      const double hPairC = h(x5, x6, y3, y1);
      const double hSameY = h(x3, x4, y1, y2);
      const double hSameY2 = h(x5, x6, y1, y2);

      acc.c1 += hA * hA;
      acc.c2 += hA * hSameY;
      acc.t[0] += hA * hB * hCyc;
      acc.t[1] += hA * hB * hFreshCyc;
      acc.t[2] += hA * hPairB * hPairC;
      acc.t[3] += hA * hA * hA;
      acc.t[4] += hA * hA * hSameY;
      acc.t[5] += hA * hSameY * hSameY2;
    }
    partial[static_cast<std::size_t>(chunk)] = acc;
  });

  Accum total;
  for (const auto& p : partial) total += p;

  MomentEstimates out;
  const double inv = 1.0 / static_cast<double>(n_draws);
  out.c1 = total.c1 * inv;
  out.c2 = total.c2 * inv;
  for (int i = 0; i < 6; ++i) out.third_terms[static_cast<std::size_t>(i)] = total.t[static_cast<std::size_t>(i)] * inv;
  out.n_blocks = n_blocks;
  out.n_samples_used = m;
  out.seed = seed;

  if (!(out.c1 > 0.0))
    throw std::runtime_error("estimate_moments: uninformative kernel/data (E[h^2] vanishes)");
  // Small-sample estimates can violate the analytic ordering C1 >= C2 >= 0.
  if (out.c2 < 0.0) out.c2 = 0.0;
  out.c1 = std::max({out.c1, out.c2, std::numeric_limits<double>::epsilon()});

  const double n = static_cast<double>(n_blocks);
  out.rho = std::sqrt(2.0 * n / (out.c1 + (n - 1.0) * out.c2));
  return out;
}

double var_h0(const MomentEstimates& m, int b) {
  if (b < 2) throw std::invalid_argument("var_h0: block size must be >= 2");
  const double n = static_cast<double>(m.n_blocks);
  return (m.c1 / n + (n - 1.0) / n * m.c2) / choose2(b);
}

double cov_h0(const MomentEstimates& m, int b1, int b2, int s) {
  if (b1 < 2 || b2 < 2) throw std::invalid_argument("cov_h0: block sizes must be >= 2");
  if (s < 0) throw std::invalid_argument("cov_h0: lag must be >= 0");
  std::int64_t overlap;
  if (b2 - s < 0)
    overlap = 0;
  else if (b2 - s < b1)
    overlap = b2 - s;
  else
    overlap = b1;
  return m.c2 * choose2(overlap) / (choose2(b1) * choose2(b2));
}

double third_raw_h0(const MomentEstimates& m, int b) {
  if (b < 2) throw std::invalid_argument("third_raw_h0: block size must be >= 2");
  const double n = static_cast<double>(m.n_blocks);
  const double bb = static_cast<double>(b);
  const double denom = bb * bb * (bb - 1.0) * (bb - 1.0);
  const auto& t = m.third_terms;
  const double cyc = (t[0] + 3.0 * (n - 1.0) * t[1] + (n - 1.0) * (n - 2.0) * t[2]) / (n * n);
  const double same = (t[3] + 3.0 * (n - 1.0) * t[4] + (n - 1.0) * (n - 2.0) * t[5]) / (n * n);
  return 8.0 * (bb - 2.0) / denom * cyc + 4.0 / denom * same;
}

double third_moment_h0(const MomentEstimates& m, int b) {
  const double v = var_h0(m, b);
  if (!(v > 0.0)) throw std::runtime_error("third_moment_h0: zero variance, statistic is degenerate");
  return third_raw_h0(m, b) / (v * std::sqrt(v));
}

std::string moments_to_json(const MomentEstimates& m) {
  nlohmann::json j;
  j["C1"] = m.c1;
  j["C2"] = m.c2;
  j["third_terms"] = m.third_terms;
  j["N"] = m.n_blocks;
  j["rho"] = m.rho;
  j["n_samples_used"] = m.n_samples_used;
  j["seed"] = m.seed;
  return j.dump(2);
}

MomentEstimates moments_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  MomentEstimates m;
  m.c1 = j.at("C1").get<double>();
  m.c2 = j.at("C2").get<double>();
  const auto arr = j.at("third_terms");
  if (!arr.is_array() || arr.size() != 6)
    throw std::runtime_error("moments_from_json: third_terms must hold 6 values");
  for (std::size_t i = 0; i < 6; ++i) m.third_terms[i] = arr[i].get<double>();
  m.n_blocks = j.at("N").get<int>();
  m.rho = j.at("rho").get<double>();
  m.n_samples_used = j.at("n_samples_used").get<std::int64_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  return m;
}

}  // namespace okcusum
