#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "phonon_herald/dynamics.hpp"
#include "phonon_herald/shot_io.hpp"

namespace herald {

struct Interval {
  double start_us = 0.0;
  double end_us = 0.0;
  double length_us() const { return end_us - start_us; }
  bool contains(double t_us) const { return t_us >= start_us && t_us < end_us; }
};

/// Everything a campaign needs. mu_w is the mean photon-phonon pair number
/// created per shot (A+ * T_w for a drive-consistent campaign); eta_w and
/// eta_r are end-to-end detection efficiencies of the write and read
/// channels (cavity extraction, filters, fibers, detector).
struct CampaignConfig {
  SystemParams params = SystemParams::preset();
  PulseSchedule schedule = PulseSchedule::preset();
  PowerScale scale;
  FilterCascade cascade = FilterCascade::preset();

  double mu_w = 0.0;
  double eta_w = 0.0;
  double eta_r = 0.0;
  double n_residual = 0.0;     ///< post-cooling occupation entering the read
  double thermal_admix = 0.0;  ///< read-channel bath admixture, nominally 1/C_q
  double dark_rate_hz = 0.0;
  double storage_delay_us = 0.0;
  int temporal_modes = 1;  ///< effective mode count; >1 reduces bunching
  long n_shots = 0;
  std::uint64_t master_seed = 0;
  double dt_us = 0.1;
  double duty_cycle = 0.05;  ///< shot/idle duty; idle time is not simulated

  /// Overrides for the pair-photon placement windows; default to the write
  /// and read stages of the schedule.
  std::optional<Interval> write_window_us;
  std::optional<Interval> read_window_us;
  /// Override for the readout envelope rate; default Gamma_opt of the read
  /// stage drive.
  std::optional<double> readout_rate_hz;

  void validate() const;
};

/// Timestamp quantum of the shot-file format (0.1 us).
inline constexpr double kTimestampQuantumUs = 0.1;

/// Per-campaign precomputation plus the per-shot sampler. Thread-safe:
/// simulate_shot carries no mutable state and derives its randomness from
/// (master_seed, shot_index).
class ShotGenerator {
 public:
  explicit ShotGenerator(const CampaignConfig& config);

  ShotRecord simulate_shot(long shot_index) const;

  // Deterministic pieces, exposed for diagnostics and tests.
  const OccupationTrace& occupation() const { return occupation_; }
  const RateTraces& background_rates() const { return background_; }
  /// Detected background intensity (counts/s) including dark counts.
  const std::vector<double>& detected_background_hz() const { return lambda_; }
  Interval write_window() const { return write_window_; }
  Interval read_window() const { return read_window_; }
  double survival_probability() const { return p_surv_; }
  double additions_mean() const { return additions_mean_; }
  double readout_rate() const { return readout_rate_; }

 private:
  CampaignConfig config_;
  OccupationTrace occupation_;
  RateTraces background_;        // pair-overlay-subtracted, filter-convolved
  std::vector<double> lambda_;   // detected background rate per grid point
  double lambda_max_ = 0.0;
  Interval write_window_;
  Interval read_window_;
  double readout_rate_ = 0.0;
  double p_surv_ = 1.0;
  double additions_mean_ = 0.0;
};

struct CampaignSummary {
  long n_shots = 0;
  long total_counts = 0;
  long write_window_counts = 0;
  long read_window_counts = 0;
  long elsewhere_counts = 0;
  long coincidences = 0;  ///< shots with counts in both pair windows
  double expected_coincidences = 0.0;
  double write_window_rate_hz = 0.0;
  double read_window_rate_hz = 0.0;
  double shot_length_us = 0.0;
  double duty_cycle = 0.0;
  double implied_wall_clock_s = 0.0;
  std::uint64_t master_seed = 0;
};

/// Probability that one shot produces at least one detected pair photon in
/// each of the write and read windows, from the pair process alone
/// (background excluded). Closed-form enumeration over the generative
/// model; the summary prints it next to the observed coincidence count.
double expected_pair_coincidence_probability(const CampaignConfig& config);

/// Streams all shots in index order to `out_path`, preceded by the header
/// line. Output bytes depend only on (config, config_hash) - never on the
/// worker count. Cleans up the partial file on I/O failure.
CampaignSummary run_campaign(const CampaignConfig& config, const std::filesystem::path& out_path,
                             int workers, const std::string& config_hash);

}  // namespace herald
