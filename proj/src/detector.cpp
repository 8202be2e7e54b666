#include "okcusum/detector.hpp"

#include <cmath>

#include <json.hpp>

#include "okcusum/rng.hpp"
#include "okcusum/simd.hpp"

namespace okcusum {

void DetectorConfig::validate() const {
  kernel.validate();
  if (w < 2) throw std::invalid_argument("DetectorConfig: window length must be >= 2");
  if (n_blocks < 1) throw std::invalid_argument("DetectorConfig: N must be >= 1");
  if (b_min < 2 || b_min > w) throw std::invalid_argument("DetectorConfig: need 2 <= b_min <= w");
  if (moments.n_blocks != n_blocks)
    throw std::invalid_argument("DetectorConfig: moments were estimated for a different N");
}

StoppingReport run_to_alarm(Procedure& proc, const ObservationSource& source, std::int64_t horizon,
                            double threshold) {
  if (horizon < 1) throw std::invalid_argument("run_to_alarm: horizon must be >= 1");
  StoppingReport report;
  report.threshold = threshold;
  report.horizon = horizon;
  std::vector<double> row;
  for (std::int64_t i = 0; i < horizon; ++i) {
    if (!source(row)) break;  // stream exhausted: stopped_at stays empty
    const StepResult res = proc.step(row);
    report.statistic_at_stop = res.statistic;
    report.argmax_b = res.argmax_b;
    // a -inf statistic means "not yet computable", never an alarm
    if (res.statistic > kNegInf && res.statistic >= threshold) {
      report.stopped_at = res.t;
      return report;
    }
  }
  return report;
}

OnlineKernelCusum::OnlineKernelCusum(DetectorConfig config, const Points& reference, std::uint64_t seed)
    : cfg_(std::move(config)) {
  cfg_.validate();
  dim_ = reference.dim;
  const std::int64_t need = static_cast<std::int64_t>(cfg_.n_blocks) * cfg_.w;
  if (reference.size() < need)
    throw std::invalid_argument("init_detector: reference too small, need at least N*w samples");

  // Interleaved prefix of a seeded permutation: block n, row j <- perm[j*N + n].
  // The unbounded-window variant uses the same protocol, so for matching seeds
  // its first w rows per block coincide with ours.
  Rng rng(mix64(seed, 0x626c6f636b));
  const auto perm = rng.permutation(reference.size());
  Points flat(dim_, need);
  for (int n = 0; n < cfg_.n_blocks; ++n)
    for (int j = 0; j < cfg_.w; ++j)
      flat.set_row(static_cast<std::int64_t>(n) * cfg_.w + j,
                   reference.row(perm[static_cast<std::size_t>(j) * cfg_.n_blocks + static_cast<std::size_t>(n)]));
  init_static(flat);
}

void OnlineKernelCusum::init_static(const Points& blocks_flat) {
  const int w = cfg_.w, n_blocks = cfg_.n_blocks;
  blocks_ = blocks_flat;
  ring_ = Points(dim_, w);
  gyy_ = Mat(w, w);
  gxx_.clear();
  gxy_.assign(static_cast<std::size_t>(n_blocks), Mat(w, w));
  gyx_.assign(static_cast<std::size_t>(n_blocks), Mat(w, w));
  gxx_.reserve(static_cast<std::size_t>(n_blocks));
  for (int n = 0; n < n_blocks; ++n) gxx_.push_back(gram(cfg_.kernel, reference_block(n), reference_block(n)));

  zscale_.assign(static_cast<std::size_t>(w) + 1, 0.0);
  for (int b = 2; b <= w; ++b) {
    const double v = var_h0(cfg_.moments, b);
    if (!(v > 0.0)) throw std::runtime_error("init_detector: H0 variance is not positive");
    zscale_[static_cast<std::size_t>(b)] =
        2.0 / (static_cast<double>(b) * (b - 1) * n_blocks * std::sqrt(v));
  }
  t_ = 0;
}

Points OnlineKernelCusum::reference_block(int n) const {
  Points out(dim_, cfg_.w);
  for (int j = 0; j < cfg_.w; ++j)
    out.set_row(j, blocks_.row(static_cast<std::int64_t>(n) * cfg_.w + j));
  return out;
}

Points OnlineKernelCusum::window() const {
  const int filled = static_cast<int>(std::min<std::int64_t>(t_, cfg_.w));
  Points out(dim_, filled);
  for (int i = 0; i < filled; ++i) {
    const std::int64_t logical = t_ - filled + i;
    out.set_row(i, ring_.row(logical % cfg_.w));
  }
  return out;
}

double OnlineKernelCusum::ring_sum(const Mat& mat, int row, int start, int len) const {
  const double* p = mat.row_ptr(row);
  const int w = cfg_.w;
  if (start + len <= w) return simd::sum(p + start, static_cast<std::size_t>(len));
  const int first = w - start;
  return simd::sum(p + start, static_cast<std::size_t>(first)) +
         simd::sum(p, static_cast<std::size_t>(len - first));
}

StepResult OnlineKernelCusum::step(std::span<const double> y) {
  if (static_cast<int>(y.size()) != dim_) throw std::invalid_argument("step: dimension mismatch");
  const int w = cfg_.w, n_blocks = cfg_.n_blocks;
  t_ += 1;
  const int slot = static_cast<int>((t_ - 1) % w);
  const int filled = static_cast<int>(std::min<std::int64_t>(t_, w));
  ring_.set_row(slot, y);

  const double inv_r2 = 1.0 / (cfg_.kernel.bandwidth * cfg_.kernel.bandwidth);
  for (int p = 0; p < filled; ++p) {
    const double v = (p == slot) ? cfg_.kernel.bound
                                 : std::exp(-simd::squared_distance(ring_.row(p).data(), y.data(),
                                                                    static_cast<std::size_t>(dim_)) *
                                            inv_r2);
    gyy_.at(slot, p) = v;
    gyy_.at(p, slot) = v;
  }
  for (int n = 0; n < n_blocks; ++n) {
    Mat& xy = gxy_[static_cast<std::size_t>(n)];
    Mat& yx = gyx_[static_cast<std::size_t>(n)];
    double* yx_row = yx.row_ptr(slot);
    for (int r = 0; r < w; ++r) {
      const double v =
          std::exp(-simd::squared_distance(blocks_.row(static_cast<std::int64_t>(n) * w + r).data(), y.data(),
                                           static_cast<std::size_t>(dim_)) *
                   inv_r2);
      xy.at(r, slot) = v;
      yx_row[r] = v;
    }
  }

  StepResult res;
  res.t = t_;
  if (collect_per_b_) res.per_b.clear();
  if (t_ < 2) return res;

  // Suffix accumulation over B: extending the block by one older observation
  // adds that observation's kernel row against everything newer. The new
  // (oldest) y at logical t-B pairs block row B-1.
  const int b_max = filled;
  double z = 0.0;
  double best = kNegInf;
  int best_b = 0;
  for (int b = 2; b <= b_max; ++b) {
    const std::int64_t l0 = t_ - b;
    const int s0 = static_cast<int>(l0 % w);
    const int s_new = (s0 + 1) % w;
    const int rnew = b - 1;
    const int len = b - 1;
    for (int n = 0; n < n_blocks; ++n) {
      z += simd::sum(gxx_[static_cast<std::size_t>(n)].row_ptr(rnew), static_cast<std::size_t>(len));
      z -= ring_sum(gxy_[static_cast<std::size_t>(n)], rnew, s_new, len);
      z -= simd::sum(gyx_[static_cast<std::size_t>(n)].row_ptr(s0), static_cast<std::size_t>(len));
    }
    z += static_cast<double>(n_blocks) * ring_sum(gyy_, s0, s_new, len);
    const double zb = z * zscale_[static_cast<std::size_t>(b)];
    if (b >= cfg_.b_min) {
      if (collect_per_b_) res.per_b.emplace_back(b, zb);
      if (zb > best) {
        best = zb;
        best_b = b;
      }
    }
  }
  res.statistic = best;
  res.argmax_b = best_b;
  res.alarm = best > kNegInf && best >= cfg_.threshold;
  return res;
}

std::string OnlineKernelCusum::snapshot() const {
  nlohmann::json j;
  j["format"] = "okcusum-detector-state";
  j["version"] = 1;
  j["dim"] = dim_;
  j["t"] = t_;
  // JSON has no infinities; encode an uncalibrated threshold as a string
  nlohmann::json jthresh;
  if (std::isfinite(cfg_.threshold))
    jthresh = cfg_.threshold;
  else
    jthresh = cfg_.threshold > 0 ? "inf" : "-inf";
  j["config"] = {{"w", cfg_.w},
                 {"N", cfg_.n_blocks},
                 {"b_min", cfg_.b_min},
                 {"threshold", jthresh},
                 {"kernel", {{"family", "gaussian_rbf"}, {"bandwidth", cfg_.kernel.bandwidth}, {"bound", cfg_.kernel.bound}}},
                 {"moments", nlohmann::json::parse(moments_to_json(cfg_.moments))}};
  j["ref_blocks"] = blocks_.data;
  const Points win = window();
  j["ring"] = win.data;
  return j.dump();
}

OnlineKernelCusum OnlineKernelCusum::restore(const std::string& blob) {
  const auto j = nlohmann::json::parse(blob);
  if (j.at("format").get<std::string>() != "okcusum-detector-state")
    throw std::runtime_error("restore: not a detector state blob");
  OnlineKernelCusum det;
  det.dim_ = j.at("dim").get<int>();
  const auto& jc = j.at("config");
  det.cfg_.w = jc.at("w").get<int>();
  det.cfg_.n_blocks = jc.at("N").get<int>();
  det.cfg_.b_min = jc.at("b_min").get<int>();
  if (jc.at("threshold").is_string())
    det.cfg_.threshold = jc.at("threshold").get<std::string>() == "-inf" ? kNegInf : kInf;
  else
    det.cfg_.threshold = jc.at("threshold").get<double>();
  det.cfg_.kernel.bandwidth = jc.at("kernel").at("bandwidth").get<double>();
  det.cfg_.kernel.bound = jc.at("kernel").at("bound").get<double>();
  det.cfg_.moments = moments_from_json(jc.at("moments").dump());
  det.cfg_.validate();

  Points flat;
  flat.dim = det.dim_;
  flat.data = j.at("ref_blocks").get<std::vector<double>>();
  if (flat.size() != static_cast<std::int64_t>(det.cfg_.n_blocks) * det.cfg_.w)
    throw std::runtime_error("restore: reference block payload has the wrong size");
  det.init_static(flat);

  // Place the window rows back into their physical slots, then rebuild caches.
  Points win;
  win.dim = det.dim_;
  win.data = j.at("ring").get<std::vector<double>>();
  det.t_ = j.at("t").get<std::int64_t>();
  const std::int64_t filled = win.size();
  if (filled != std::min<std::int64_t>(det.t_, det.cfg_.w))
    throw std::runtime_error("restore: ring payload inconsistent with t");
  for (std::int64_t i = 0; i < filled; ++i) {
    const std::int64_t logical = det.t_ - filled + i;
    det.ring_.set_row(logical % det.cfg_.w, win.row(i));
  }
  det.rebuild_gram_caches();
  return det;
}

void OnlineKernelCusum::rebuild_gram_caches() {
  const int w = cfg_.w, n_blocks = cfg_.n_blocks;
  const int filled = static_cast<int>(std::min<std::int64_t>(t_, w));
  const double inv_r2 = 1.0 / (cfg_.kernel.bandwidth * cfg_.kernel.bandwidth);
  for (std::int64_t i = 0; i < filled; ++i) {
    const std::int64_t logical = t_ - filled + i;
    const int p = static_cast<int>(logical % w);
    for (std::int64_t jj = 0; jj <= i; ++jj) {
      const std::int64_t logical_j = t_ - filled + jj;
      const int q = static_cast<int>(logical_j % w);
      const double v = (p == q) ? cfg_.kernel.bound
                                : std::exp(-simd::squared_distance(ring_.row(p).data(), ring_.row(q).data(),
                                                                   static_cast<std::size_t>(dim_)) *
                                           inv_r2);
      gyy_.at(p, q) = v;
      gyy_.at(q, p) = v;
    }
    for (int n = 0; n < n_blocks; ++n) {
      for (int r = 0; r < w; ++r) {
        const double v = std::exp(
            -simd::squared_distance(blocks_.row(static_cast<std::int64_t>(n) * w + r).data(),
                                    ring_.row(p).data(), static_cast<std::size_t>(dim_)) *
            inv_r2);
        gxy_[static_cast<std::size_t>(n)].at(r, p) = v;
        gyx_[static_cast<std::size_t>(n)].at(p, r) = v;
      }
    }
  }
}

std::vector<double> scan_stats_from_raw(const KernelSpec& spec, const MomentEstimates& moments,
                                        const std::vector<Points>& blocks, const Points& ywin, int b_max) {
  spec.validate();
  const int n_blocks = static_cast<int>(blocks.size());
  if (n_blocks < 1) throw std::invalid_argument("scan_stats_from_raw: need at least one block");
  const std::int64_t ly = ywin.size();
  b_max = static_cast<int>(std::min<std::int64_t>(b_max, ly));
  for (const auto& blk : blocks)
    if (blk.size() < b_max) throw std::invalid_argument("scan_stats_from_raw: block shorter than b_max");
  std::vector<double> out;
  if (b_max < 2) return out;

  const double inv_r2 = 1.0 / (spec.bandwidth * spec.bandwidth);
  const auto dim = static_cast<std::size_t>(ywin.dim);
  auto k = [&](std::span<const double> a, std::span<const double> c) {
    return std::exp(-simd::squared_distance(a.data(), c.data(), dim) * inv_r2);
  };

  double z = 0.0;
  out.reserve(static_cast<std::size_t>(b_max - 1));
  for (int b = 2; b <= b_max; ++b) {
    const std::int64_t y_old = ly - b;  // index of the newly included (oldest) window row
    const int rnew = b - 1;
    for (int n = 0; n < n_blocks; ++n) {
      const Points& blk = blocks[static_cast<std::size_t>(n)];
      const auto xnew = blk.row(rnew);
      for (int u = 0; u < b - 1; ++u) z += k(xnew, blk.row(u));
      for (int u = 0; u < b - 1; ++u) z -= k(xnew, ywin.row(y_old + 1 + u));
      const auto yold = ywin.row(y_old);
      for (int u = 0; u < b - 1; ++u) z -= k(blk.row(u), yold);
    }
    {
      const auto yold = ywin.row(y_old);
      double gy = 0.0;
      for (int u = 0; u < b - 1; ++u) gy += k(yold, ywin.row(y_old + 1 + u));
      z += static_cast<double>(n_blocks) * gy;
    }
    const double v = var_h0(moments, b);
    const double zscale = 2.0 / (static_cast<double>(b) * (b - 1) * n_blocks * std::sqrt(v));
    out.push_back(z * zscale);
  }
  return out;
}

OracleScanDetector::OracleScanDetector(KernelSpec spec, MomentEstimates moments, int n_blocks, int b_min,
                                       double threshold, const Points& reference, std::uint64_t seed,
                                       std::int64_t max_horizon)
    : spec_(spec),
      moments_(std::move(moments)),
      n_blocks_(n_blocks),
      b_min_(b_min),
      threshold_(threshold),
      pool_(reference) {
  spec_.validate();
  if (n_blocks_ < 1 || b_min_ < 2) throw std::invalid_argument("OracleScanDetector: bad configuration");
  if (pool_.size() < static_cast<std::int64_t>(n_blocks_) * max_horizon)
    throw std::invalid_argument("OracleScanDetector: reference too small for the requested horizon");
  Rng rng(mix64(seed, 0x626c6f636b));
  perm_ = rng.permutation(pool_.size());
  blocks_.assign(static_cast<std::size_t>(n_blocks_), Points{});
  for (auto& blk : blocks_) blk.dim = pool_.dim;
  history_.dim = pool_.dim;
}

StepResult OracleScanDetector::step(std::span<const double> y) {
  if (static_cast<int>(y.size()) != pool_.dim)
    throw std::invalid_argument("oracle_step: dimension mismatch");
  t_ += 1;
  history_.push_row(y);
  const std::int64_t j = t_ - 1;
  if ((j + 1) * n_blocks_ > static_cast<std::int64_t>(perm_.size()))
    throw std::runtime_error("oracle_step: reference exhausted");
  for (int n = 0; n < n_blocks_; ++n)
    blocks_[static_cast<std::size_t>(n)].push_row(
        pool_.row(perm_[static_cast<std::size_t>(j) * n_blocks_ + static_cast<std::size_t>(n)]));

  StepResult res;
  res.t = t_;
  if (t_ < 2) return res;
  const auto stats = scan_stats_from_raw(spec_, moments_, blocks_, history_, static_cast<int>(t_));
  double best = kNegInf;
  int best_b = 0;
  for (int b = 2; b <= static_cast<int>(t_); ++b) {
    const double zb = stats[static_cast<std::size_t>(b - 2)];
    if (b >= b_min_) {
      if (collect_per_b_) res.per_b.emplace_back(b, zb);
      if (zb > best) {
        best = zb;
        best_b = b;
      }
    }
  }
  res.statistic = best;
  res.argmax_b = best_b;
  res.alarm = best > kNegInf && best >= threshold_;
  return res;
}

}  // namespace okcusum
