#include "phonon_herald/correlation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <thread>
#include <tuple>
#include <unordered_map>

#include "phonon_herald/rng.hpp"

namespace herald {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void run_parallel(long n_items, int workers, const std::function<void(long)>& fn) {
  if (workers < 1) {
    workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  }
  if (workers == 1 || n_items <= 1) {
    for (long i = 0; i < n_items; ++i) fn(i);
    return;
  }
  std::atomic<long> next{0};
  auto work = [&]() {
    while (true) {
      const long i = next.fetch_add(1);
      if (i >= n_items) return;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  const int n = std::min<long>(workers, n_items);
  pool.reserve(n);
  for (int i = 0; i < n; ++i) pool.emplace_back(work);
  for (auto& t : pool) t.join();
}

}  // namespace

EventIndex::EventIndex(const std::vector<ShotRecord>& shots) {
  std::size_t total = 0;
  for (const auto& s : shots) total += s.timestamps_us.size();
  std::vector<std::pair<double, std::int32_t>> events;
  events.reserve(total);
  for (std::size_t i = 0; i < shots.size(); ++i) {
    for (const double t : shots[i].timestamps_us) {
      events.emplace_back(t, static_cast<std::int32_t>(i));
    }
  }
  std::sort(events.begin(), events.end());
  times_us_.reserve(total);
  shots_.reserve(total);
  for (const auto& [t, s] : events) {
    times_us_.push_back(t);
    shots_.push_back(s);
  }
  n_shots_ = static_cast<long>(shots.size());
}

std::pair<std::size_t, std::size_t> EventIndex::range(double lo_us, double hi_us) const {
  const auto first = std::lower_bound(times_us_.begin(), times_us_.end(), lo_us);
  const auto last = std::lower_bound(first, times_us_.end(), hi_us);
  return {static_cast<std::size_t>(first - times_us_.begin()),
          static_cast<std::size_t>(last - times_us_.begin())};
}

PairCounts PairCounts::from_index(const EventIndex& index, WindowSpec w1, WindowSpec w2) {
  struct Tally {
    std::int32_t n1 = 0, n2 = 0, no = 0;
  };
  std::unordered_map<std::int32_t, Tally> per_shot;
  auto accumulate = [&](double lo, double hi, std::int32_t Tally::*field) {
    if (!(lo < hi)) return;
    const auto [first, last] = index.range(lo, hi);
    for (std::size_t i = first; i < last; ++i) {
      per_shot[index.shot_at(i)].*field += 1;
    }
  };
  accumulate(w1.lo(), w1.hi(), &Tally::n1);
  accumulate(w2.lo(), w2.hi(), &Tally::n2);
  accumulate(std::max(w1.lo(), w2.lo()), std::min(w1.hi(), w2.hi()), &Tally::no);

  std::map<std::tuple<std::int32_t, std::int32_t, std::int32_t>, long> agg;
  for (const auto& [shot, tally] : per_shot) {
    ++agg[{tally.n1 - tally.no, tally.no, tally.n2 - tally.no}];
  }
  PairCounts out;
  out.n_shots = index.n_shots();
  long touched = 0;
  for (const auto& [key, count] : agg) {
    out.types.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), count});
    touched += count;
  }
  out.zero_shots = out.n_shots - touched;
  return out;
}

PairCounts PairCounts::from_joint_counts(const std::vector<std::pair<int, int>>& counts,
                                         long n_shots) {
  std::map<std::tuple<std::int32_t, std::int32_t, std::int32_t>, long> agg;
  long touched = 0;
  for (const auto& [n1, n2] : counts) {
    if (n1 == 0 && n2 == 0) continue;
    ++agg[{n1, 0, n2}];
    ++touched;
  }
  PairCounts out;
  out.n_shots = n_shots;
  out.zero_shots = n_shots - touched;
  for (const auto& [key, count] : agg) {
    out.types.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), count});
  }
  return out;
}

namespace {

PairMoments moments_from_weights(const PairCounts& counts, const std::vector<long>& weights,
                                 long n_shots) {
  PairMoments m;
  double sum1 = 0, sum2 = 0, cross = 0, auto1 = 0, auto2 = 0;
  for (std::size_t k = 0; k < counts.types.size(); ++k) {
    const auto& t = counts.types[k];
    const auto w = static_cast<double>(weights[k]);
    const double n1 = t.a + t.o;
    const double n2 = t.o + t.b;
    sum1 += w * n1;
    sum2 += w * n2;
    cross += w * (static_cast<double>(t.o) * (t.o - 1) + static_cast<double>(t.o) * t.b +
                  static_cast<double>(t.a) * t.o + static_cast<double>(t.a) * t.b);
    auto1 += w * n1 * (n1 - 1);
    auto2 += w * n2 * (n2 - 1);
  }
  const auto n = static_cast<double>(n_shots);
  m.mean1 = sum1 / n;
  m.mean2 = sum2 / n;
  m.cross = cross / n;
  m.auto1 = auto1 / n;
  m.auto2 = auto2 / n;
  m.coincidence_sum = cross;
  return m;
}

}  // namespace

PairMoments compute_moments(const PairCounts& counts) {
  std::vector<long> weights(counts.types.size());
  for (std::size_t k = 0; k < counts.types.size(); ++k) weights[k] = counts.types[k].count;
  return moments_from_weights(counts, weights, counts.n_shots);
}

namespace {

// One multinomial resample of the shot composition (zero class plus each
// tuple type), drawn with the conditional-binomial chain.
void resample_weights(const PairCounts& counts, RngStream& rng, std::vector<long>& weights) {
  const long n = counts.n_shots;
  long remaining = n;
  double p_remaining = 1.0;
  // Zero class first: it usually holds most of the mass.
  {
    const double p = static_cast<double>(counts.zero_shots) / n;
    const long draw =
        p_remaining > 0.0 ? rng.binomial(remaining, std::min(1.0, p / p_remaining)) : 0;
    remaining -= draw;
    p_remaining -= p;
  }
  for (std::size_t k = 0; k < counts.types.size(); ++k) {
    if (remaining <= 0) {
      weights[k] = 0;
      continue;
    }
    if (k + 1 == counts.types.size()) {
      weights[k] = remaining;
      remaining = 0;
      continue;
    }
    const double p = static_cast<double>(counts.types[k].count) / n;
    const double cond = p_remaining > 1e-15 ? std::min(1.0, p / p_remaining) : 1.0;
    const long draw = rng.binomial(remaining, cond);
    weights[k] = draw;
    remaining -= draw;
    p_remaining -= p;
  }
}

struct BootstrapAccumulator {
  // Running moments of (g2_cross, g2_auto1, g2_auto2) over valid resamples
  // plus all R values for percentiles.
  double sum[3] = {0, 0, 0};
  double sum2[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
  std::vector<double> r_values;
  long valid = 0;
  long degenerate = 0;

  void add(const PairMoments& m) {
    if (!m.cross_defined()) {
      ++degenerate;
      return;
    }
    const double g[3] = {m.g2_cross(), m.g2_auto1(), m.g2_auto2()};
    if (!(g[1] > 0.0) || !(g[2] > 0.0)) {
      ++degenerate;
      return;
    }
    for (int i = 0; i < 3; ++i) {
      sum[i] += g[i];
      for (int j = 0; j < 3; ++j) sum2[i][j] += g[i] * g[j];
    }
    r_values.push_back(g[0] * g[0] / (g[1] * g[2]));
    ++valid;
  }
};

}  // namespace

WindowPairStats window_pair_stats(const PairCounts& counts, const AnalysisOptions& opts) {
  WindowPairStats stats;
  const PairMoments point = compute_moments(counts);
  stats.cross.coincidences = point.coincidence_sum;
  if (point.cross_defined()) {
    stats.cross.value = point.g2_cross();
    stats.auto1.value = point.g2_auto1();
    stats.auto2.value = point.g2_auto2();
    if (stats.auto1.value > 0.0 && stats.auto2.value > 0.0) {
      stats.r = stats.cross.value * stats.cross.value /
                (stats.auto1.value * stats.auto2.value);
      stats.r_defined = true;
    }
  } else {
    stats.cross.value = stats.auto1.value = stats.auto2.value = kNaN;
  }

  RngStream rng(opts.seed);
  BootstrapAccumulator acc;
  std::vector<long> weights(counts.types.size());
  std::vector<double> r_sum;
  for (int rep = 0; rep < opts.resamples; ++rep) {
    resample_weights(counts, rng, weights);
    acc.add(moments_from_weights(counts, weights, counts.n_shots));
  }
  stats.valid_resamples = acc.valid;
  stats.degenerate_resamples = acc.degenerate;
  if (acc.valid >= 2) {
    const auto n = static_cast<double>(acc.valid);
    double mean[3];
    for (int i = 0; i < 3; ++i) mean[i] = acc.sum[i] / n;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        stats.cov[i][j] = (acc.sum2[i][j] - n * mean[i] * mean[j]) / (n - 1.0);
      }
    }
    stats.cross.err = std::sqrt(std::max(0.0, stats.cov[0][0]));
    stats.auto1.err = std::sqrt(std::max(0.0, stats.cov[1][1]));
    stats.auto2.err = std::sqrt(std::max(0.0, stats.cov[2][2]));
    double r_mean = 0.0;
    for (const double r : acc.r_values) r_mean += r;
    r_mean /= n;
    double r_var = 0.0;
    for (const double r : acc.r_values) r_var += (r - r_mean) * (r - r_mean);
    stats.r_err = std::sqrt(r_var / (n - 1.0));
  } else {
    stats.r_err = kNaN;
  }
  return stats;
}

G2Estimate g2_windows(const EventIndex& index, WindowSpec w1, WindowSpec w2,
                      const AnalysisOptions& opts) {
  const PairCounts counts = PairCounts::from_index(index, w1, w2);
  const PairMoments point = compute_moments(counts);
  if (!point.cross_defined()) {
    throw InsufficientCountsError("g2_windows: zero mean counts in a window", w1, w2);
  }
  const WindowPairStats stats = window_pair_stats(counts, opts);
  return stats.cross;
}

std::pair<double, double> cs_parameter(const G2Estimate& g12, const G2Estimate& g11,
                                       const G2Estimate& g22,
                                       const std::array<std::array<double, 3>, 3>& cov) {
  if (!(g11.value > 0.0) || !(g22.value > 0.0)) {
    throw std::domain_error("cs_parameter: non-positive autocorrelation, R undefined");
  }
  const double r = g12.value * g12.value / (g11.value * g22.value);
  const double grad[3] = {2.0 * r / g12.value, -r / g11.value, -r / g22.value};
  double var = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) var += grad[i] * cov[i][j] * grad[j];
  }
  return {r, std::sqrt(std::max(0.0, var))};
}

CorrelationMap correlation_map(const EventIndex& index, const std::vector<double>& t1_grid_us,
                               const std::vector<double>& t2_grid_us, double tau_us,
                               const AnalysisOptions& opts, int workers) {
  if (index.n_shots() == 0) {
    throw std::invalid_argument("correlation_map: empty shot set");
  }
  if (!(tau_us > 0.0)) {
    throw std::invalid_argument("correlation_map: tau must be positive");
  }
  CorrelationMap map;
  map.t1_grid_us = t1_grid_us;
  map.t2_grid_us = t2_grid_us;
  map.tau_us = tau_us;
  const std::size_t n1 = t1_grid_us.size();
  const std::size_t n2 = t2_grid_us.size();
  map.g2.assign(n1 * n2, kNaN);
  map.g2_err.assign(n1 * n2, kNaN);
  map.r.assign(n1 * n2, kNaN);
  map.r_err.assign(n1 * n2, kNaN);
  map.coincidences.assign(n1 * n2, 0.0);
  map.insufficient.assign(n1 * n2, 1);

  const bool symmetric = t1_grid_us == t2_grid_us;
  run_parallel(static_cast<long>(n1 * n2), workers, [&](long cell) {
    const std::size_t i = static_cast<std::size_t>(cell) / n2;
    const std::size_t j = static_cast<std::size_t>(cell) % n2;
    if (symmetric && j < i) return;  // mirrored below
    const WindowSpec w1{t1_grid_us[i], tau_us};
    const WindowSpec w2{t2_grid_us[j], tau_us};
    const PairCounts counts = PairCounts::from_index(index, w1, w2);
    AnalysisOptions cell_opts = opts;
    // Cell-local stream; depends only on (seed, unordered cell id) so the
    // map is identical for any worker count and symmetric cells share a
    // stream.
    const std::uint64_t cell_id =
        symmetric ? static_cast<std::uint64_t>(std::min(i, j)) * n2 + std::max(i, j)
                  : static_cast<std::uint64_t>(cell);
    RngStream seed_stream = RngStream::derive(opts.seed, cell_id, 2);
    cell_opts.seed = seed_stream.raw();
    const WindowPairStats stats = window_pair_stats(counts, cell_opts);
    const std::size_t at = map.idx(i, j);
    map.coincidences[at] = stats.cross.coincidences;
    if (std::isfinite(stats.cross.value)) {
      map.g2[at] = stats.cross.value;
      map.g2_err[at] = stats.cross.err;
    }
    if (stats.r_defined) {
      map.r[at] = stats.r;
      map.r_err[at] = stats.r_err;
    }
    map.insufficient[at] = (!stats.r_defined || !std::isfinite(stats.cross.value) ||
                            stats.cross.coincidences < opts.min_coincidences)
                               ? 1
                               : 0;
  });
  if (symmetric) {
    for (std::size_t i = 0; i < n1; ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        const std::size_t src = map.idx(j, i);
        const std::size_t dst = map.idx(i, j);
        map.g2[dst] = map.g2[src];
        map.g2_err[dst] = map.g2_err[src];
        map.r[dst] = map.r[src];
        map.r_err[dst] = map.r_err[src];
        map.coincidences[dst] = map.coincidences[src];
        map.insufficient[dst] = map.insufficient[src];
      }
    }
  }
  return map;
}

PValueReport bootstrap_pvalue(const EventIndex& index, WindowSpec w1, WindowSpec w2,
                              int n_resamples, const AnalysisOptions& opts) {
  if (n_resamples < 1000) {
    throw std::invalid_argument("bootstrap_pvalue: need at least 1000 resamples");
  }
  const PairCounts counts = PairCounts::from_index(index, w1, w2);
  const PairMoments point = compute_moments(counts);
  if (!point.cross_defined()) {
    throw InsufficientCountsError("bootstrap_pvalue: zero mean counts in a window", w1, w2);
  }
  AnalysisOptions local = opts;
  local.resamples = n_resamples;
  const WindowPairStats stats = window_pair_stats(counts, local);
  if (!stats.r_defined) {
    throw std::domain_error("bootstrap_pvalue: R undefined at the point estimate");
  }
  if (stats.degenerate_resamples * 5 > n_resamples) {
    throw std::runtime_error(
        "bootstrap_pvalue: more than 20% of resamples degenerate (" +
        std::to_string(stats.degenerate_resamples) + "/" + std::to_string(n_resamples) + ")");
  }

  // Re-run the resampling to collect the R distribution with the same
  // stream as window_pair_stats, so the report matches the stats exactly.
  RngStream rng(local.seed);
  std::vector<long> weights(counts.types.size());
  std::vector<double> r_values;
  r_values.reserve(static_cast<std::size_t>(n_resamples));
  long below = 0;
  for (int rep = 0; rep < n_resamples; ++rep) {
    resample_weights(counts, rng, weights);
    const PairMoments m = moments_from_weights(counts, weights, counts.n_shots);
    if (!m.cross_defined() || !(m.auto1 > 0.0) || !(m.auto2 > 0.0)) continue;
    const double g12 = m.g2_cross();
    const double r = g12 * g12 / (m.g2_auto1() * m.g2_auto2());
    r_values.push_back(r);
    if (r <= 1.0) ++below;
  }
  std::sort(r_values.begin(), r_values.end());
  PValueReport report;
  report.r = stats.r;
  report.r_err = stats.r_err;
  report.valid_resamples = static_cast<long>(r_values.size());
  report.degenerate_resamples = n_resamples - report.valid_resamples;
  report.p_value = r_values.empty()
                       ? 1.0
                       : static_cast<double>(below) / static_cast<double>(r_values.size());
  if (!r_values.empty()) {
    auto pct = [&](double q) {
      const double pos = q * (r_values.size() - 1);
      const auto lo = static_cast<std::size_t>(pos);
      const std::size_t hi = std::min(lo + 1, r_values.size() - 1);
      const double frac = pos - lo;
      return r_values[lo] * (1.0 - frac) + r_values[hi] * frac;
    };
    report.ci_lo = pct(0.025);
    report.ci_hi = pct(0.975);
  }
  return report;
}

std::vector<SectionPoint> optimize_read_window(const EventIndex& index, WindowSpec w_fixed,
                                               const std::vector<double>& t_r_scan_us,
                                               double tau_us, const AnalysisOptions& opts,
                                               int workers) {
  std::vector<SectionPoint> section(t_r_scan_us.size());
  run_parallel(static_cast<long>(t_r_scan_us.size()), workers, [&](long k) {
    const auto i = static_cast<std::size_t>(k);
    SectionPoint& pt = section[i];
    pt.t_r_us = t_r_scan_us[i];
    const WindowSpec w2{t_r_scan_us[i], tau_us};
    const PairCounts counts = PairCounts::from_index(index, w_fixed, w2);
    AnalysisOptions local = opts;
    RngStream seed_stream = RngStream::derive(opts.seed, i, 3);
    local.seed = seed_stream.raw();
    const WindowPairStats stats = window_pair_stats(counts, local);
    if (stats.r_defined && std::isfinite(stats.cross.value) &&
        stats.cross.coincidences >= opts.min_coincidences) {
      pt.r = stats.r;
      pt.r_err = stats.r_err;
      pt.insufficient = false;
    } else {
      pt.r = kNaN;
      pt.r_err = kNaN;
      pt.insufficient = true;
    }
  });
  return section;
}

}  // namespace herald
