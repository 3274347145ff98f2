#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "phonon_herald/shot_io.hpp"

namespace herald {

/// Time window (t - tau/2, t + tau/2], realized as the half-open interval
/// [lo, hi) so that adjacent windows partition the axis with no double
/// counting.
struct WindowSpec {
  double center_us = 0.0;
  double tau_us = 0.0;
  double lo() const { return center_us - 0.5 * tau_us; }
  double hi() const { return center_us + 0.5 * tau_us; }
};

class InsufficientCountsError : public std::runtime_error {
 public:
  InsufficientCountsError(const std::string& msg, WindowSpec w1, WindowSpec w2)
      : std::runtime_error(msg), w1(w1), w2(w2) {}
  WindowSpec w1, w2;
};

/// Flat, time-sorted view of a campaign's detections for fast window
/// counting.
class EventIndex {
 public:
  EventIndex() = default;
  explicit EventIndex(const std::vector<ShotRecord>& shots);

  long n_shots() const { return n_shots_; }
  std::size_t n_events() const { return times_us_.size(); }

  /// Events with timestamp in [lo, hi), as (first, last) positions.
  std::pair<std::size_t, std::size_t> range(double lo_us, double hi_us) const;
  double time_at(std::size_t i) const { return times_us_[i]; }
  std::int32_t shot_at(std::size_t i) const { return shots_[i]; }

 private:
  std::vector<double> times_us_;
  std::vector<std::int32_t> shots_;
  long n_shots_ = 0;
};

/// Per-shot counts for a window pair, split into the w1-only (a),
/// overlapping (o) and w2-only (b) segments, compressed to distinct tuples
/// with multiplicities. Shots with no counts in either window are kept as
/// a single implicit class.
struct PairCounts {
  struct Type {
    std::int32_t a = 0, o = 0, b = 0;
    long count = 0;
  };
  std::vector<Type> types;  // sorted by (a, o, b)
  long n_shots = 0;
  long zero_shots = 0;

  static PairCounts from_index(const EventIndex& index, WindowSpec w1, WindowSpec w2);
  /// Synthetic data entry point for disjoint windows: per-shot (n1, n2).
  static PairCounts from_joint_counts(const std::vector<std::pair<int, int>>& counts,
                                      long n_shots);
};

/// Point estimates from one (possibly resampled) set of tuple statistics.
///
/// The cross moment uses the overlap decomposition
///   <n1 n2> -> <o(o-1)> + <o b> + <a o> + <a b>
/// which removes the overlap's same-photon self-pairs exactly once: it
/// reduces to <n1 n2> for disjoint windows and to the factorial moment
/// <n(n-1)> at full overlap, and is continuous in between.
struct PairMoments {
  double mean1 = 0.0, mean2 = 0.0;
  double cross = 0.0;   // overlap-corrected <n1 n2>
  double auto1 = 0.0;   // <n1 (n1 - 1)>
  double auto2 = 0.0;   // <n2 (n2 - 1)>
  double coincidence_sum = 0.0;  // cross * n_shots

  bool cross_defined() const { return mean1 > 0.0 && mean2 > 0.0; }
  double g2_cross() const { return cross / (mean1 * mean2); }
  double g2_auto1() const { return auto1 / (mean1 * mean1); }
  double g2_auto2() const { return auto2 / (mean2 * mean2); }
};

PairMoments compute_moments(const PairCounts& counts);

struct AnalysisOptions {
  int resamples = 5000;
  std::uint64_t seed = 0;
  int min_coincidences = 5;
};

struct G2Estimate {
  double value = 0.0;
  double err = 0.0;          ///< 1 sigma from the shot-level bootstrap
  double coincidences = 0.0;
};

/// Joint estimates for one window pair with a shared bootstrap, so the
/// covariance between the cross- and autocorrelations is available.
struct WindowPairStats {
  G2Estimate cross, auto1, auto2;
  double r = 0.0;
  double r_err = 0.0;
  bool r_defined = false;
  std::array<std::array<double, 3>, 3> cov{};  // (cross, auto1, auto2)
  long valid_resamples = 0;
  long degenerate_resamples = 0;
};

WindowPairStats window_pair_stats(const PairCounts& counts, const AnalysisOptions& opts);

/// Eq.-level g2 for two windows. Throws InsufficientCountsError when either
/// window has zero mean counts.
G2Estimate g2_windows(const EventIndex& index, WindowSpec w1, WindowSpec w2,
                      const AnalysisOptions& opts = {});

/// R = g12^2 / (g11 * g22) with first-order error propagation through the
/// supplied covariance. Throws std::domain_error when an autocorrelation is
/// not positive (R undefined).
std::pair<double, double> cs_parameter(const G2Estimate& g12, const G2Estimate& g11,
                                       const G2Estimate& g22,
                                       const std::array<std::array<double, 3>, 3>& cov);

struct CorrelationMap {
  std::vector<double> t1_grid_us;
  std::vector<double> t2_grid_us;
  double tau_us = 0.0;
  // Row-major [i * t2_grid.size() + j].
  std::vector<double> g2, g2_err, r, r_err, coincidences;
  std::vector<std::uint8_t> insufficient;

  std::size_t idx(std::size_t i, std::size_t j) const { return i * t2_grid_us.size() + j; }
};

/// Fills the full map; cells without enough coincidences (or with
/// undefined R) are flagged instead of fabricated. Deterministic for any
/// worker count.
CorrelationMap correlation_map(const EventIndex& index, const std::vector<double>& t1_grid_us,
                               const std::vector<double>& t2_grid_us, double tau_us,
                               const AnalysisOptions& opts, int workers = 1);

struct PValueReport {
  double r = 0.0;
  double r_err = 0.0;
  double p_value = 1.0;           ///< one-sided P(R <= 1) under the bootstrap
  double ci_lo = 0.0, ci_hi = 0.0;  ///< 95 % percentile interval for R
  long valid_resamples = 0;
  long degenerate_resamples = 0;
};

/// Shot-level nonparametric bootstrap of the Cauchy-Schwarz parameter.
/// Requires n_resamples >= 1000; errors out when more than 20 % of the
/// resamples are degenerate.
PValueReport bootstrap_pvalue(const EventIndex& index, WindowSpec w1, WindowSpec w2,
                              int n_resamples, const AnalysisOptions& opts = {});

struct SectionPoint {
  double t_r_us = 0.0;
  double r = 0.0;
  double r_err = 0.0;
  bool insufficient = true;
};

/// R as a function of the read-window position with the write window held
/// fixed.
std::vector<SectionPoint> optimize_read_window(const EventIndex& index, WindowSpec w_fixed,
                                               const std::vector<double>& t_r_scan_us,
                                               double tau_us, const AnalysisOptions& opts,
                                               int workers = 1);

}  // namespace herald
