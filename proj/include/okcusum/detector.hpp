#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "okcusum/moments.hpp"

namespace okcusum {

struct StepResult {
  std::int64_t t = 0;
  double statistic = kNegInf;
  int argmax_b = 0;  // 0 while no block size is computable
  bool alarm = false;
  std::vector<std::pair<int, double>> per_b;  // filled only when collection is enabled
};

struct StoppingReport {
  std::optional<std::int64_t> stopped_at;
  double statistic_at_stop = kNegInf;
  int argmax_b = 0;
  double threshold = 0.0;
  std::int64_t horizon = 0;
  std::optional<std::uint64_t> seed;
};

/// Streaming detector interface shared by the kernel procedures and the
/// comparison baselines, so harness code treats them uniformly.
class Procedure {
 public:
  virtual ~Procedure() = default;
  virtual StepResult step(std::span<const double> y) = 0;
  virtual std::int64_t t() const = 0;
};

/// Pulls the next observation into `out`; returns false when exhausted.
using ObservationSource = std::function<bool(std::vector<double>&)>;

/// Consumes observations until the first alarm or the horizon.
StoppingReport run_to_alarm(Procedure& proc, const ObservationSource& source, std::int64_t horizon,
                            double threshold);

struct DetectorConfig {
  int w = 50;        // window length (largest scanned block size)
  int n_blocks = 15; // N
  int b_min = 2;     // lower end of the block-size scan
  KernelSpec kernel;
  double threshold = kInf;  // b
  MomentEstimates moments;

  void validate() const;
};

/// The streaming detector: N fixed reference blocks, a ring of the w most
/// recent observations, and N+1 rolling Gram matrices giving constant
/// per-step cost. Each step refreshes one Gram row/column (O(N w) kernel
/// evaluations) and rebuilds the per-block-size statistics by suffix
/// accumulation (O(N w^2) arithmetic, no extra memory and no cross-step
/// accumulation, so nothing drifts).
class OnlineKernelCusum : public Procedure {
 public:
  /// Draws N*w reference rows without replacement (seeded) and precomputes
  /// the static within-block Gram matrices.
  OnlineKernelCusum(DetectorConfig config, const Points& reference, std::uint64_t seed);

  StepResult step(std::span<const double> y) override;
  std::int64_t t() const override { return t_; }

  const DetectorConfig& config() const { return cfg_; }
  void set_collect_per_b(bool on) { collect_per_b_ = on; }

  /// Reference block n as a Points view copy (w rows). For tests and snapshots.
  Points reference_block(int n) const;
  /// The current window, oldest first (min(t, w) rows).
  Points window() const;

  /// Serializes reference blocks, ring contents and t; Gram caches are
  /// rebuilt on restore.
  std::string snapshot() const;
  static OnlineKernelCusum restore(const std::string& blob);

 private:
  OnlineKernelCusum() = default;
  void init_static(const Points& blocks_flat);
  void rebuild_gram_caches();
  double ring_sum(const Mat& mat, int row, int start, int len) const;

  DetectorConfig cfg_;
  int dim_ = 0;
  Points blocks_;              // N*w rows; block n row r lives at n*w + r
  std::vector<Mat> gxx_;       // N static w x w within-block Grams
  Mat gyy_;                    // w x w, indexed by ring slot
  std::vector<Mat> gxy_;       // N of w x w: row = block row, col = ring slot
  std::vector<Mat> gyx_;       // transposed copies: row = ring slot, col = block row
  Points ring_;                // w rows, physical slots
  std::int64_t t_ = 0;
  std::vector<double> zscale_; // per-B: 2 / (B (B-1) N sqrt(var_h0(B)))
  bool collect_per_b_ = false;
};

inline DetectorConfig scan_b_fixed_config(DetectorConfig cfg) {
  cfg.b_min = cfg.w;  // degenerate scan region {w}: the Shewhart-chart comparator
  return cfg;
}

/// Per-block-size statistics recomputed from raw vectors, no caching; the
/// independent route used to check the recursive detector and to drive the
/// unbounded-window variant. blocks[n] must have >= Bmax rows, ywin is the
/// current window oldest-first. Returns Z_B for B = 2..Bmax, index B-2.
std::vector<double> scan_stats_from_raw(const KernelSpec& spec, const MomentEstimates& moments,
                                        const std::vector<Points>& blocks, const Points& ywin, int b_max);

/// Unbounded-window variant: scans B in [b_min, t] with O(t) memory growth,
/// recomputing from raw data each step. Test and window-study use only.
class OracleScanDetector : public Procedure {
 public:
  OracleScanDetector(KernelSpec spec, MomentEstimates moments, int n_blocks, int b_min, double threshold,
                     const Points& reference, std::uint64_t seed, std::int64_t max_horizon);

  StepResult step(std::span<const double> y) override;
  std::int64_t t() const override { return t_; }
  void set_collect_per_b(bool on) { collect_per_b_ = on; }

 private:
  KernelSpec spec_;
  MomentEstimates moments_;
  int n_blocks_;
  int b_min_;
  double threshold_;
  std::vector<Points> blocks_;  // grow one row per step
  Points history_;
  Points pool_;
  std::vector<std::int64_t> perm_;
  std::int64_t t_ = 0;
  bool collect_per_b_ = false;
};

}  // namespace okcusum
