#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "okcusum/bench.hpp"
#include "okcusum/cli.hpp"
#include "okcusum/csv.hpp"
#include "support.hpp"

using namespace okcusum;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("okcusum_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_csv(const std::string& path, const Points& pts, bool header = false) {
  std::ofstream out(path);
  if (header) out << "c0,c1\n";
  write_points_csv(out, pts);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("cli end to end: moments, calibrate, detect") {
  TempDir tmp;
  const auto pre = gaussian_iso(2, 0.0, 1.0);
  write_csv(tmp.file("ref.csv"), sample(pre, 400, 21), true);

  // moments is deterministic under a fixed seed
  CHECK(cli_main({"moments", "-i", tmp.file("ref.csv"), "-o", tmp.file("m1.json"), "--n-blocks", "3",
                  "--window", "6", "--n-draws", "4000", "--seed", "5"}) == 0);
  CHECK(cli_main({"moments", "-i", tmp.file("ref.csv"), "-o", tmp.file("m2.json"), "--n-blocks", "3",
                  "--window", "6", "--n-draws", "4000", "--seed", "5"}) == 0);
  CHECK(slurp(tmp.file("m1.json")) == slurp(tmp.file("m2.json")));
  const auto m = moments_from_json(slurp(tmp.file("m1.json")));
  CHECK(m.rho > 0.0);

  // Monte Carlo calibration: bisection on the empirical ARL over bootstrap streams
  CHECK(cli_main({"calibrate", "-m", tmp.file("m1.json"), "--arl", "25", "-w", "6", "--method", "mc",
                  "--ref", tmp.file("ref.csv"), "--trials", "24", "--horizon-factor", "4", "--seed",
                  "5", "-o", tmp.file("cal_mc.json")}) == 0);
  const auto cmc = calibration_from_json(slurp(tmp.file("cal_mc.json")));
  CHECK(cmc.method == ArlMethod::monte_carlo);
  CHECK(cmc.threshold > 0.0);
  CHECK(cmc.predicted_arl >= 25.0);  // smallest b with empirical ARL >= target
  CHECK(cmc.predicted_arl <= 100.0);

  // analytic calibration: skew >= gaussian for positive skewness, monotone in the target
  CHECK(cli_main({"calibrate", "-m", tmp.file("m1.json"), "--arl", "500", "-w", "6", "--method",
                  "gaussian", "-o", tmp.file("cal_g.json")}) == 0);
  CHECK(cli_main({"calibrate", "-m", tmp.file("m1.json"), "--arl", "500", "-w", "6", "--method", "skew",
                  "-o", tmp.file("cal_s.json")}) == 0);
  CHECK(cli_main({"calibrate", "-m", tmp.file("m1.json"), "--arl", "2000", "-w", "6", "--method", "skew",
                  "-o", tmp.file("cal_s2.json")}) == 0);
  const auto cg = calibration_from_json(slurp(tmp.file("cal_g.json")));
  const auto cs = calibration_from_json(slurp(tmp.file("cal_s.json")));
  const auto cs2 = calibration_from_json(slurp(tmp.file("cal_s2.json")));
  if (third_moment_h0(m, 6) > 0.0) CHECK(cs.threshold >= cg.threshold);
  CHECK(cs2.threshold > cs.threshold);

  // H0 stream with a high threshold: exit 3, no alarm
  write_csv(tmp.file("h0.csv"), sample(pre, 80, 22));
  CHECK(cli_main({"detect", "--ref", tmp.file("ref.csv"), "--stream", tmp.file("h0.csv"), "--threshold",
                  "100", "-w", "6", "--n-blocks", "3", "--moments", tmp.file("m1.json"), "--report",
                  tmp.file("r0.json"), "--seed", "3"}) == 3);
  CHECK(slurp(tmp.file("r0.json")).find("\"stopped_at\": null") != std::string::npos);

  // gross change injected at a known row: alarm shortly after it
  Points mixed(2, 0);
  const Points calm = sample(pre, 30, 23);
  const Points shifted = sample(gaussian_iso(2, 8.0, 1.0), 40, 24);
  for (std::int64_t i = 0; i < calm.size(); ++i) mixed.push_row(calm.row(i));
  for (std::int64_t i = 0; i < shifted.size(); ++i) mixed.push_row(shifted.row(i));
  write_csv(tmp.file("h1.csv"), mixed);
  CHECK(cli_main({"detect", "--ref", tmp.file("ref.csv"), "--stream", tmp.file("h1.csv"), "--threshold",
                  "6", "-w", "6", "--n-blocks", "3", "--moments", tmp.file("m1.json"), "--report",
                  tmp.file("r1.json"), "--emit-stats", tmp.file("steps.csv"), "--seed", "3"}) == 0);
  std::istringstream rep(slurp(tmp.file("r1.json")));
  std::string content = rep.str();
  const auto pos = content.find("\"stopped_at\": ");
  REQUIRE(pos != std::string::npos);
  const long stopped = std::strtol(content.c_str() + pos + 14, nullptr, 10);
  CHECK(stopped > 30);
  CHECK(stopped <= 40);

  const auto stats = slurp(tmp.file("steps.csv"));
  CHECK(stats.rfind("t,statistic,argmax_b", 0) == 0);
  CHECK(std::count(stats.begin(), stats.end(), '\n') == stopped + 1);  // header + one line per step
}

TEST_CASE("cli error paths and exit codes") {
  TempDir tmp;
  write_csv(tmp.file("small.csv"), sample(gaussian_iso(2, 0.0, 1.0), 10, 31));

  // insufficient rows -> data error
  CHECK(cli_main({"moments", "-i", tmp.file("small.csv"), "-o", tmp.file("m.json"), "--n-blocks", "4",
                  "--window", "5"}) == 2);

  // both --threshold and --arl -> config error
  CHECK(cli_main({"detect", "--ref", tmp.file("small.csv"), "--stream", "-", "--threshold", "3", "--arl",
                  "500"}) == 1);
  // neither -> config error
  CHECK(cli_main({"detect", "--ref", tmp.file("small.csv"), "--stream", "-"}) == 1);

  // missing file -> data error
  CHECK(cli_main({"moments", "-i", tmp.file("absent.csv")}) == 2);

  // unknown option -> config error
  CHECK(cli_main({"moments", "--nope", "x"}) == 1);

  // malformed CSV reports the line number
  {
    std::ofstream bad(tmp.file("bad.csv"));
    bad << "1.0,2.0\n1.0,oops\n";
  }
  CHECK(cli_main({"moments", "-i", tmp.file("bad.csv")}) == 2);
}

TEST_CASE("results are independent of the thread count (separate processes)") {
  TempDir tmp;
  write_csv(tmp.file("ref.csv"), sample(gaussian_iso(2, 0.0, 1.0), 300, 77));
  auto run = [&](const char* threads, const std::string& out) {
    const std::string cmd = std::string("KCPD_THREADS=") + threads + " " + OKCUSUM_BIN + " moments -i " +
                            tmp.file("ref.csv") + " -o " + out +
                            " --n-blocks 3 --window 5 --n-draws 6000 --seed 12 > /dev/null";
    return std::system(cmd.c_str());
  };
  REQUIRE(run("1", tmp.file("t1.json")) == 0);
  REQUIRE(run("2", tmp.file("t2.json")) == 0);
  REQUIRE(run("7", tmp.file("t7.json")) == 0);
  const auto ref = slurp(tmp.file("t1.json"));
  CHECK(ref == slurp(tmp.file("t2.json")));
  CHECK(ref == slurp(tmp.file("t7.json")));
}

TEST_CASE("cli bench smoke run is deterministic") {
  TempDir tmp;
  {
    std::ofstream cfg(tmp.file("exp.ini"));
    cfg << "[experiment]\n"
           "name = smoke\n"
           "dim = 2\n"
           "seed = 4\n"
           "n_blocks = 3\n"
           "window = 5\n"
           "reference_size = 200\n"
           "arl_targets = 15\n"
           "trials_calibrate = 8\n"
           "trials_edd = 8\n"
           "horizon_edd = 25\n"
           "horizon_calibrate_factor = 3\n"
           "moment_draws = 3000\n"
           "median_subsample = 100\n"
           "procedures = proposed, kcusum\n"
           "[pre]\n"
           "kind = gaussian\n"
           "mean = 0\n"
           "variance = 1\n"
           "[post]\n"
           "kind = gaussian\n"
           "mean = 5\n"
           "variance = 1\n";
  }
  fs::create_directories(tmp.file("out1"));
  fs::create_directories(tmp.file("out2"));
  CHECK(cli_main({"bench", "-c", tmp.file("exp.ini"), "-o", tmp.file("out1"), "--quiet"}) == 0);
  CHECK(cli_main({"bench", "-c", tmp.file("exp.ini"), "-o", tmp.file("out2"), "--quiet"}) == 0);
  const auto csv1 = slurp(tmp.file("out1") + "/results.csv");
  CHECK(csv1 == slurp(tmp.file("out2") + "/results.csv"));
  CHECK(csv1.rfind("procedure,arl_target,threshold,edd_mean,edd_stderr,miss_count,trials", 0) == 0);
  CHECK(!slurp(tmp.file("out1") + "/meta.json").empty());
  CHECK(!slurp(tmp.file("out1") + "/results.json").empty());

  // procedure subset filter
  fs::create_directories(tmp.file("out3"));
  CHECK(cli_main({"bench", "-c", tmp.file("exp.ini"), "-o", tmp.file("out3"), "--procedures", "proposed",
                  "--quiet"}) == 0);
  const auto rows = rows_from_json(slurp(tmp.file("out3") + "/results.json"));
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].procedure == "proposed");
}
