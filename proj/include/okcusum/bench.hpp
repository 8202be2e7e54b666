#pragma once

#include <iosfwd>
#include <optional>

#include "okcusum/baselines.hpp"
#include "okcusum/calibration.hpp"

namespace okcusum {

/// Declarative EDD-vs-ARL experiment: calibrate each procedure's threshold by
/// Monte Carlo under H0, then measure detection delay with the change at t=0.
struct ExperimentSpec {
  std::string name = "experiment";
  DistributionSpec pre;
  DistributionSpec post;
  std::vector<std::string> procedures{"proposed", "scanb", "kcusum", "hotelling"};
  std::vector<double> arl_targets{500.0};
  std::int64_t trials_calibrate = 200;
  std::int64_t trials_edd = 200;
  std::int64_t horizon_edd = 50;          // post-change samples per EDD trial
  double horizon_calibrate_factor = 5.0;  // H0 horizon = factor * max target
  std::int64_t reference_size = 10000;    // M
  int n_blocks = 15;                      // N
  int w = 50;
  int b_min = 2;
  double kcusum_delta = 0.02;
  int hotelling_kappa_cap = 0;  // 0 = unrestricted
  std::int64_t median_subsample = 2000;
  std::int64_t moment_draws = 100000;
  std::optional<double> bandwidth;  // fixed value; unset = median heuristic
  std::uint64_t seed = 1;

  void validate() const;
};

struct ResultRow {
  std::string procedure;
  double arl_target = 0.0;
  double threshold = 0.0;
  double edd_mean = 0.0;
  double edd_stderr = 0.0;
  std::int64_t miss_count = 0;
  std::int64_t trials = 0;
};

enum class TableFormat { csv, json, markdown };

/// Rows plus the resolved context (for provenance output).
struct ExperimentResult {
  std::vector<ResultRow> rows;
  double bandwidth = 0.0;
  MomentEstimates moments;
  std::int64_t horizon_calibrate = 0;
};

ExperimentResult run_experiment_full(const ExperimentSpec& spec, const ProgressFn& progress = {});
std::vector<ResultRow> run_experiment(const ExperimentSpec& spec, const ProgressFn& progress = {});

std::string emit_table(std::span<const ResultRow> rows, TableFormat format);
std::vector<ResultRow> rows_from_json(const std::string& text);

/// Resolved provenance record (meta.json): the full spec plus derived values.
std::string experiment_meta_json(const ExperimentSpec& spec, double resolved_bandwidth,
                                 const MomentEstimates& moments, std::int64_t horizon_calibrate);

/// Line-oriented key = value config with [section] headers; sections
/// [experiment], [pre], [post] and, for mixtures, [pre.1] / [post.1] ...
ExperimentSpec parse_experiment_config(std::istream& in);
ExperimentSpec parse_experiment_config_text(const std::string& text);

std::string distribution_to_json(const DistributionSpec& spec);

}  // namespace okcusum
