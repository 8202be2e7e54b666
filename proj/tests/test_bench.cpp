#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "okcusum/bench.hpp"
#include "support.hpp"

using namespace okcusum;
using okcusum::test::close;

namespace {

ExperimentSpec tiny_spec() {
  ExperimentSpec s;
  s.name = "tiny";
  s.pre = gaussian_iso(2, 0.0, 1.0);
  s.post = gaussian_iso(2, 4.0, 1.0);
  s.procedures = {"proposed", "scanb", "kcusum"};
  s.arl_targets = {20.0, 60.0};
  s.trials_calibrate = 12;
  s.trials_edd = 12;
  s.horizon_edd = 30;
  s.horizon_calibrate_factor = 3.0;
  s.reference_size = 300;
  s.n_blocks = 3;
  s.w = 6;
  s.b_min = 2;
  s.median_subsample = 150;
  s.moment_draws = 4000;
  s.seed = 77;
  return s;
}

}  // namespace

TEST_CASE("samplers: law-of-large-numbers and support checks") {
  const auto g = gaussian_iso(3, 0.0, 1.0);
  const Points gs = sample(g, 4000, 1);
  for (int c = 0; c < 3; ++c) {
    double m = 0;
    for (std::int64_t i = 0; i < gs.size(); ++i) m += gs.row(i)[static_cast<std::size_t>(c)];
    m /= static_cast<double>(gs.size());
    CHECK(std::abs(m) < 4.0 / std::sqrt(4000.0));
  }

  const auto u = uniform_box(2, -1.5, 2.5);
  const Points us = sample(u, 2000, 2);
  for (double v : us.data) {
    CHECK(v >= -1.5);
    CHECK(v < 2.5);
  }

  const auto e = exponential_iso(1, 2.0);
  const Points es = sample(e, 4000, 3);
  double em = 0;
  for (double v : es.data) {
    CHECK(v >= 0.0);
    em += v;
  }
  CHECK(close(em / 4000.0, 0.5, 0.05));

  const auto l = laplace_iso(1, 1.0, 0.7);
  const Points ls = sample(l, 6000, 4);
  double lm = 0, lv = 0;
  for (double v : ls.data) lm += v;
  lm /= 6000.0;
  for (double v : ls.data) lv += (v - lm) * (v - lm);
  lv /= 6000.0;
  CHECK(close(lm, 1.0, 0.06));
  CHECK(close(lv, 2.0 * 0.7 * 0.7, 0.12));  // Var = 2 b^2
}

TEST_CASE("degenerate mixture weight matches its component in law") {
  const auto comp = gaussian_iso(1, 0.5, 2.0);
  const auto mix = mixture({1.0, 0.0}, {comp, gaussian_iso(1, 50.0, 1.0)});
  const Points ms = sample(mix, 5000, 5);
  double m = 0, v = 0;
  for (double x : ms.data) m += x;
  m /= 5000.0;
  for (double x : ms.data) v += (x - m) * (x - m);
  v /= 5000.0;
  CHECK(close(m, 0.5, 0.1));  // never touches the mean-50 component
  CHECK(close(v, 2.0, 0.2));
}

TEST_CASE("distribution validation") {
  auto bad = mixture({0.5, 0.2}, {gaussian_iso(1, 0, 1), gaussian_iso(1, 1, 1)});
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  auto neg = gaussian_iso(2, 0.0, -1.0);
  CHECK_THROWS_AS(neg.validate(), std::invalid_argument);
  auto flipped = uniform_box(2, 1.0, -1.0);
  CHECK_THROWS_AS(flipped.validate(), std::invalid_argument);
}

TEST_CASE("emit_table formats") {
  CHECK(emit_table({}, TableFormat::csv) ==
        "procedure,arl_target,threshold,edd_mean,edd_stderr,miss_count,trials\n");

  std::vector<ResultRow> rows(2);
  rows[0] = {"proposed", 500.0, 3.25, 3.4, 0.1, 0, 200};
  rows[1] = {"scanb", 500.0, 3.5, 8.75, 0.2, 3, 200};
  const auto back = rows_from_json(emit_table(rows, TableFormat::json));
  REQUIRE(back.size() == 2);
  CHECK(back[0].procedure == rows[0].procedure);
  CHECK(back[0].threshold == rows[0].threshold);
  CHECK(back[1].miss_count == rows[1].miss_count);
  CHECK(back[1].edd_mean == rows[1].edd_mean);

  const auto md = emit_table(rows, TableFormat::markdown);
  CHECK(md.find("| procedure | arl_target | threshold | edd_mean | edd_stderr | miss_count | trials |") !=
        std::string::npos);
  CHECK(md.find("| proposed | 500 | 3.25 | 3.4 | 0.1 | 0 | 200 |") != std::string::npos);
}

TEST_CASE("config parsing round trip") {
  const std::string text = R"(
# comment
[experiment]
name = demo
dim = 2
seed = 9
n_blocks = 3
window = 6
reference_size = 250
arl_targets = 20, 60
trials_calibrate = 10
trials_edd = 11
horizon_edd = 25
procedures = proposed, kcusum
kcusum_delta = 0.04

[pre]
kind = gaussian
mean = 0
variance = 1

[post]
kind = gaussian_mixture
weights = 0.3, 0.7
[post.1]
kind = gaussian
mean = 0
variance = 1
[post.2]
kind = gaussian
mean = 2
variance = 9
)";
  const auto spec = parse_experiment_config_text(text);
  CHECK(spec.name == "demo");
  CHECK(spec.pre.dim == 2);
  CHECK(spec.post.kind == DistributionSpec::Kind::gaussian_mixture);
  CHECK(spec.post.components.size() == 2);
  CHECK(spec.post.components[1].mean[0] == 2.0);
  CHECK(spec.arl_targets == std::vector<double>{20.0, 60.0});
  CHECK(spec.procedures == std::vector<std::string>{"proposed", "kcusum"});
  CHECK(spec.kcusum_delta == 0.04);

  CHECK_THROWS(parse_experiment_config_text("[experiment]\nname = x\n"));  // missing distributions
  CHECK_THROWS(parse_experiment_config_text("[experiment]\nbroken line\n"));
}

TEST_CASE("run_experiment: deterministic, ordered, threshold-monotone") {
  const auto spec = tiny_spec();
  const auto rows = run_experiment(spec);
  REQUIRE(rows.size() == 6);  // 3 procedures x 2 targets, input order
  CHECK(rows[0].procedure == "proposed");
  CHECK(rows[1].procedure == "proposed");
  CHECK(rows[2].procedure == "scanb");
  CHECK(rows[4].procedure == "kcusum");
  for (std::size_t i = 0; i < rows.size(); i += 2) {
    CHECK(rows[i].arl_target == 20.0);
    CHECK(rows[i + 1].arl_target == 60.0);
    CHECK(rows[i].threshold < rows[i + 1].threshold);  // larger target, larger threshold
    CHECK(rows[i].miss_count <= rows[i].trials);
    // tighter false-alarm budget cannot detect faster (within Monte Carlo slack)
    const double se2 = 2.0 * std::sqrt(rows[i].edd_stderr * rows[i].edd_stderr +
                                       rows[i + 1].edd_stderr * rows[i + 1].edd_stderr);
    CHECK(rows[i + 1].edd_mean >= rows[i].edd_mean - se2);
  }
  // byte-identical rerun
  const auto rows2 = run_experiment(spec);
  CHECK(emit_table(rows, TableFormat::csv) == emit_table(rows2, TableFormat::csv));

  // the change here is gross: the proposed detector should catch it fast
  CHECK(rows[0].miss_count == 0);
  CHECK(rows[0].edd_mean < 10.0);
}

TEST_CASE("run_experiment null sanity: post = pre behaves like an ARL run") {
  auto spec = tiny_spec();
  spec.post = spec.pre;
  spec.procedures = {"proposed"};
  spec.arl_targets = {25.0};
  spec.horizon_edd = 120;
  const auto rows = run_experiment(spec);
  REQUIRE(rows.size() == 1);
  // delays concentrate near the ARL target instead of immediate alarms
  const double effective =
      (rows[0].edd_mean * static_cast<double>(rows[0].trials - rows[0].miss_count) +
       120.0 * static_cast<double>(rows[0].miss_count)) /
      static_cast<double>(rows[0].trials);
  CHECK(effective > 10.0);
}
