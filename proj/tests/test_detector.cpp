#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "okcusum/detector.hpp"
#include "support.hpp"

using namespace okcusum;
using okcusum::test::close;
using okcusum::test::random_points;

namespace {

MomentEstimates gaussian_moments(int n_blocks, int dim, std::uint64_t seed = 4242) {
  const Points ref = random_points(dim, 600, seed);
  Points sub(dim, 200);
  for (int i = 0; i < 200; ++i) sub.set_row(i, ref.row(i));
  const KernelSpec spec = gaussian_rbf(median_heuristic(sub));
  return estimate_moments(ref, spec, n_blocks, 20000, seed);
}

DetectorConfig make_config(int w, int n_blocks, int dim, double threshold = kInf, int b_min = 2) {
  DetectorConfig cfg;
  cfg.w = w;
  cfg.n_blocks = n_blocks;
  cfg.b_min = b_min;
  cfg.moments = gaussian_moments(n_blocks, dim);
  cfg.kernel = gaussian_rbf(1.3);
  cfg.threshold = threshold;
  return cfg;
}

ObservationSource points_source(const Points& pts) {
  auto index = std::make_shared<std::int64_t>(0);
  return [&pts, index](std::vector<double>& row) {
    if (*index >= pts.size()) return false;
    const auto r = pts.row(*index);
    row.assign(r.begin(), r.end());
    ++*index;
    return true;
  };
}

}  // namespace

TEST_CASE("init rejects a short reference and consumes exactly N*w rows when tight") {
  auto cfg = make_config(6, 3, 2);
  CHECK_THROWS_AS(OnlineKernelCusum(cfg, random_points(2, 17, 1), 7), std::invalid_argument);

  const Points ref = random_points(2, 18, 2);  // M = N*w exactly
  OnlineKernelCusum det(cfg, ref, 7);
  std::vector<double> used;
  for (int n = 0; n < 3; ++n) {
    const Points blk = det.reference_block(n);
    used.insert(used.end(), blk.data.begin(), blk.data.end());
  }
  std::vector<double> all = ref.data;
  std::sort(used.begin(), used.end());
  std::sort(all.begin(), all.end());
  CHECK(used == all);  // every reference point used once
}

TEST_CASE("block draw is seed-deterministic") {
  auto cfg = make_config(5, 2, 2);
  const Points ref = random_points(2, 40, 3);
  OnlineKernelCusum a(cfg, ref, 11), b(cfg, ref, 11), c(cfg, ref, 12);
  CHECK(a.reference_block(0).data == b.reference_block(0).data);
  CHECK(a.reference_block(1).data == b.reference_block(1).data);
  CHECK(a.reference_block(0).data != c.reference_block(0).data);
}

TEST_CASE("warm-up: no statistic before two observations, none below b_min") {
  auto cfg = make_config(6, 2, 2);
  OnlineKernelCusum det(cfg, random_points(2, 30, 4), 1);
  const std::vector<double> y{0.1, -0.2};
  const StepResult r1 = det.step(y);
  CHECK(r1.t == 1);
  CHECK(r1.statistic == kNegInf);
  CHECK(r1.argmax_b == 0);
  CHECK_FALSE(r1.alarm);

  // Shewhart-chart comparator: degenerate scan region {w}
  auto cfg_fixed = scan_b_fixed_config(make_config(6, 2, 2));
  OnlineKernelCusum fixed(cfg_fixed, random_points(2, 30, 4), 1);
  for (int t = 1; t < 6; ++t) {
    const auto r = fixed.step(random_points(2, 1, 100 + static_cast<std::uint64_t>(t)).row(0));
    CHECK(r.statistic == kNegInf);
  }
  const auto r6 = fixed.step(random_points(2, 1, 200).row(0));
  CHECK(r6.statistic > kNegInf);
  CHECK(r6.argmax_b == 6);
}

TEST_CASE("step rejects a dimension mismatch") {
  auto cfg = make_config(4, 2, 3);
  OnlineKernelCusum det(cfg, random_points(3, 20, 5), 1);
  const std::vector<double> bad{1.0, 2.0};
  CHECK_THROWS_AS((void)det.step(bad), std::invalid_argument);
}

TEST_CASE("every cached per-B statistic equals a from-scratch recomputation") {
  auto cfg = make_config(8, 3, 3);
  cfg.kernel = gaussian_rbf(1.1);
  const Points ref = random_points(3, 60, 6);
  OnlineKernelCusum det(cfg, ref, 13);
  det.set_collect_per_b(true);

  std::vector<Points> blocks;
  for (int n = 0; n < 3; ++n) blocks.push_back(det.reference_block(n));

  Rng rng(77);
  std::vector<double> y(3);
  for (int t = 1; t <= 200; ++t) {
    for (auto& v : y) v = rng.normal() + (t > 120 ? 1.5 : 0.0);
    const StepResult res = det.step(y);
    const auto oracle = scan_stats_from_raw(cfg.kernel, cfg.moments, blocks, det.window(),
                                            static_cast<int>(std::min<std::int64_t>(t, 8)));
    REQUIRE(res.per_b.size() == oracle.size());
    for (std::size_t i = 0; i < oracle.size(); ++i) {
      CHECK(res.per_b[i].first == static_cast<int>(i) + 2);
      CHECK(std::abs(res.per_b[i].second - oracle[i]) <= 1e-10);
    }
  }
}

TEST_CASE("normalization equals the rho-based fast path") {
  const MomentEstimates m = gaussian_moments(5, 2);
  for (int b = 2; b <= 40; ++b) {
    const double exact = 2.0 / (static_cast<double>(b) * (b - 1) * 5 * std::sqrt(var_h0(m, b)));
    const double fast = m.rho / (5.0 * std::sqrt(static_cast<double>(b) * (b - 1)));
    CHECK(close(exact, fast, 1e-12 * fast));
  }
}

TEST_CASE("per-B statistics respect the h-bound envelope") {
  auto cfg = make_config(7, 2, 2);
  OnlineKernelCusum det(cfg, random_points(2, 30, 8), 3);
  det.set_collect_per_b(true);
  Rng rng(5);
  std::vector<double> y(2);
  for (int t = 0; t < 60; ++t) {
    for (auto& v : y) v = 2.0 * rng.normal();
    const auto res = det.step(y);
    for (const auto& [b, zb] : res.per_b) {
      const double bound = 2.0 * cfg.kernel.bound / std::sqrt(var_h0(cfg.moments, b));
      CHECK(std::abs(zb) <= bound + 1e-9);
    }
  }
}

TEST_CASE("exact ties in the block-size scan resolve to the smallest B") {
  auto cfg = make_config(5, 2, 2, kInf, 2);
  Points flat_ref = random_points(2, 30, 9);
  OnlineKernelCusum det(cfg, flat_ref, 2);
  det.set_collect_per_b(true);
  // a constant stream makes the window degenerate; per-B values then tie
  const std::vector<double> c{0.4, -0.7};
  StepResult last;
  for (int t = 0; t < 12; ++t) last = det.step(c);
  bool all_equal = true;
  for (const auto& [b, zb] : last.per_b) all_equal = all_equal && close(zb, last.per_b[0].second, 1e-9);
  if (all_equal) CHECK(last.argmax_b == 2);
}

TEST_CASE("run_to_alarm trivial thresholds") {
  const Points ref = random_points(2, 30, 10);
  {
    auto cfg = make_config(5, 2, 2, kNegInf);
    OnlineKernelCusum det(cfg, ref, 1);
    const Points stream = random_points(2, 20, 11);
    auto src = points_source(stream);
    const auto report = run_to_alarm(det, src, 20, kNegInf);
    REQUIRE(report.stopped_at.has_value());
    CHECK(*report.stopped_at == 2);  // first computable statistic
  }
  {
    auto cfg_inf = make_config(5, 2, 2, kInf);
    OnlineKernelCusum det(cfg_inf, ref, 1);
    const Points stream = random_points(2, 20, 12);
    auto src = points_source(stream);
    const auto report = run_to_alarm(det, src, 15, kInf);
    CHECK_FALSE(report.stopped_at.has_value());
    CHECK(report.horizon == 15);
  }
  {
    // stream exhausted before horizon and before alarm
    auto cfg_inf = make_config(5, 2, 2, kInf);
    OnlineKernelCusum det(cfg_inf, ref, 1);
    const Points stream = random_points(2, 6, 13);
    auto src = points_source(stream);
    const auto report = run_to_alarm(det, src, 100, kInf);
    CHECK_FALSE(report.stopped_at.has_value());
    CHECK(det.t() == 6);
  }
}

TEST_CASE("unbounded-window variant agrees below w and dominates above") {
  const int w = 6, n_blocks = 2, dim = 2;
  auto cfg = make_config(w, n_blocks, dim);
  cfg.kernel = gaussian_rbf(1.0);
  const Points ref = random_points(dim, 100, 14);
  OnlineKernelCusum windowed(cfg, ref, 21);
  windowed.set_collect_per_b(true);
  OracleScanDetector oracle(cfg.kernel, cfg.moments, n_blocks, cfg.b_min, cfg.threshold, ref, 21, 30);
  oracle.set_collect_per_b(true);

  Rng rng(33);
  std::vector<double> y(dim);
  for (int t = 1; t <= 25; ++t) {
    for (auto& v : y) v = rng.normal();
    const auto rw = windowed.step(y);
    const auto ro = oracle.step(y);
    if (t < 2) continue;
    if (t <= w) {
      CHECK(close(rw.statistic, ro.statistic, 1e-10));
      CHECK(rw.argmax_b == ro.argmax_b);
    } else {
      CHECK(ro.statistic >= rw.statistic - 1e-10);
      // shared scan region: identical per-B values
      for (std::size_t i = 0; i < rw.per_b.size(); ++i)
        CHECK(close(rw.per_b[i].second, ro.per_b[i].second, 1e-10));
    }
  }
}

TEST_CASE("snapshot and restore resume the identical statistic stream") {
  auto cfg = make_config(6, 3, 2);
  const Points ref = random_points(2, 40, 15);
  OnlineKernelCusum det(cfg, ref, 31);
  Rng rng(55);
  std::vector<double> y(2);
  for (int t = 0; t < 17; ++t) {  // deliberately not a multiple of w
    for (auto& v : y) v = rng.normal();
    det.step(y);
  }
  const std::string blob = det.snapshot();
  OnlineKernelCusum back = OnlineKernelCusum::restore(blob);
  CHECK(back.t() == det.t());
  det.set_collect_per_b(true);
  back.set_collect_per_b(true);
  for (int t = 0; t < 20; ++t) {
    for (auto& v : y) v = rng.normal();
    const auto a = det.step(y);
    const auto b = back.step(std::span<const double>(y));
    CHECK(close(a.statistic, b.statistic, 1e-12));
    CHECK(a.argmax_b == b.argmax_b);
  }
}

TEST_CASE("scan-b fixed comparator equals the detector's per_b entry at B = w") {
  const int w = 5, n_blocks = 2, dim = 2;
  auto cfg = make_config(w, n_blocks, dim);
  const Points ref = random_points(dim, 40, 16);
  OnlineKernelCusum full(cfg, ref, 99);
  full.set_collect_per_b(true);
  OnlineKernelCusum fixed(scan_b_fixed_config(cfg), ref, 99);

  Rng rng(66);
  std::vector<double> y(dim);
  for (int t = 1; t <= 20; ++t) {
    for (auto& v : y) v = rng.normal();
    const auto rf = full.step(y);
    const auto rx = fixed.step(y);
    if (t < w) {
      CHECK(rx.statistic == kNegInf);
    } else {
      CHECK(close(rx.statistic, rf.per_b.back().second, 1e-12));
      CHECK(rf.per_b.back().first == w);
    }
  }
}
