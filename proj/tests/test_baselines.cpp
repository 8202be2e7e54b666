#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "okcusum/baselines.hpp"
#include "okcusum/mmd.hpp"
#include "support.hpp"

using namespace okcusum;
using okcusum::test::close;
using okcusum::test::random_points;

namespace {

Points constant_pool(int dim, std::int64_t n, double value) {
  Points p(dim, n);
  for (auto& v : p.data) v = value;
  return p;
}

}  // namespace

// With an all-identical reference pool the KCUSUM increment depends only on
// the observation pair, so the whole recursion can be traced independently:
//   h = 1 + k(y1,y2) - k(c,y2) - k(c,y1),  s <- max(0, s + h - delta) on even t.
TEST_CASE("kcusum hand-traced six-step sequence with freezes and clamp") {
  const KernelSpec spec = gaussian_rbf(1.0);
  const double delta = 0.02;
  KcusumDetector det(spec, constant_pool(1, 12, 0.0), delta, kInf, 7);

  const std::vector<double> ys{2.0, 0.5, -1.0, 0.3, -0.5, 0.5};
  auto k = [&](double a, double b) { return std::exp(-(a - b) * (a - b)); };
  auto h_of = [&](double y1, double y2) { return 1.0 + k(y1, y2) - k(0.0, y2) - k(0.0, y1); };

  double expected = 0.0;
  std::vector<double> got, want;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const std::vector<double> y{ys[i]};
    const StepResult res = det.step(y);
    if ((i + 1) % 2 == 0) expected = std::max(0.0, expected + h_of(ys[i - 1], ys[i]) - delta);
    got.push_back(res.statistic);
    want.push_back(expected);
  }
  for (std::size_t i = 0; i < ys.size(); ++i) CHECK(close(got[i], want[i], 1e-12));
  CHECK(got[2] == got[1]);  // odd-step freeze
  CHECK(got[4] == got[3]);
  CHECK(got[5] == 0.0);  // the last increment drives s negative; clamp holds at 0
  CHECK(want[5] == 0.0);
}

TEST_CASE("kcusum zero increment stays at zero under the clamp") {
  const KernelSpec spec = gaussian_rbf(1.0);
  KcusumDetector det(spec, constant_pool(2, 20, 1.0), 0.05, kInf, 3);
  const std::vector<double> y{1.0, 1.0};  // y pair equals the x pair: h = 0
  for (int t = 0; t < 10; ++t) CHECK(det.step(y).statistic == 0.0);
}

TEST_CASE("kcusum is nonnegative and frozen on odd steps under random data") {
  const KernelSpec spec = gaussian_rbf(1.2);
  KcusumDetector det(spec, random_points(3, 200, 5), 0.02, kInf, 9);
  Rng rng(31);
  std::vector<double> y(3);
  double prev = 0.0;
  for (int t = 1; t <= 150; ++t) {
    for (auto& v : y) v = rng.normal();
    const auto res = det.step(y);
    CHECK(res.statistic >= 0.0);
    if (t % 2 == 1 && t > 1) CHECK(res.statistic == prev);
    prev = res.statistic;
  }
}

TEST_CASE("kcusum errors when the reference pool is exhausted") {
  const KernelSpec spec = gaussian_rbf(1.0);
  KcusumDetector det(spec, constant_pool(1, 4, 0.0), 0.02, kInf, 1);
  const std::vector<double> y{0.5};
  det.step(y);
  det.step(y);  // consumes 2
  det.step(y);
  det.step(y);  // consumes 2 more
  det.step(y);
  CHECK_THROWS_AS((void)det.step(y), std::runtime_error);  // t=6 needs draws 5,6
}

TEST_CASE("hotelling hand example: T^2 = 9/2") {
  Points ref(1, 2);
  ref.data = {0.0, 2.0};
  HotellingDetector det(ref, kInf);
  const std::vector<double> y1{3.0}, y2{5.0};
  CHECK(det.step(y1).statistic == kNegInf);  // t = 1: no split yet
  const auto res = det.step(y2);
  CHECK(close(res.statistic, 4.5, 1e-12));
}

TEST_CASE("hotelling is zero when the split means coincide") {
  Points ref(1, 2);
  ref.data = {0.0, 2.0};
  HotellingDetector det(ref, kInf);
  const std::vector<double> one{1.0};
  det.step(one);
  const auto res = det.step(one);  // U mean = V mean = 1 at kappa = 1
  CHECK(close(res.statistic, 0.0, 1e-12));
}

TEST_CASE("hotelling statistic is invariant under invertible affine maps") {
  const int d = 3;
  const Points ref = random_points(d, 60, 11);
  const Points stream = random_points(d, 12, 12);

  // A = R + 3I for a random R keeps the map comfortably invertible
  Rng rng(13);
  std::vector<double> a(static_cast<std::size_t>(d) * d);
  for (auto& v : a) v = 0.4 * rng.normal();
  for (int i = 0; i < d; ++i) a[static_cast<std::size_t>(i) * d + i] += 3.0;
  const std::vector<double> shift{0.7, -1.1, 2.5};
  auto apply = [&](const Points& pts) {
    Points out(pts.dim, pts.size());
    for (std::int64_t i = 0; i < pts.size(); ++i) {
      const auto r = pts.row(i);
      for (int p = 0; p < d; ++p) {
        double acc = shift[static_cast<std::size_t>(p)];
        for (int q = 0; q < d; ++q) acc += a[static_cast<std::size_t>(p) * d + q] * r[static_cast<std::size_t>(q)];
        out.row(i)[static_cast<std::size_t>(p)] = acc;
      }
    }
    return out;
  };

  HotellingDetector plain(ref, kInf);
  HotellingDetector mapped(apply(ref), kInf);
  const Points mapped_stream = apply(stream);
  for (std::int64_t t = 0; t < stream.size(); ++t) {
    const auto r1 = plain.step(stream.row(t));
    const auto r2 = mapped.step(mapped_stream.row(t));
    if (t == 0) continue;
    CHECK(close(r1.statistic, r2.statistic, 1e-8 * std::max(1.0, std::abs(r1.statistic))));
    CHECK(r1.statistic >= 0.0);
  }
}

TEST_CASE("hotelling kappa cap bounds the scan") {
  const Points ref = random_points(2, 40, 21);
  const Points stream = random_points(2, 15, 22);
  HotellingDetector full(ref, kInf, 0);
  HotellingDetector capped(ref, kInf, 3);
  for (std::int64_t t = 0; t < stream.size(); ++t) {
    const auto rf = full.step(stream.row(t));
    const auto rc = capped.step(stream.row(t));
    if (t == 0) continue;
    CHECK(rc.statistic <= rf.statistic + 1e-12);  // capped max over a subset
  }
}
