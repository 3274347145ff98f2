#pragma once

#include <filesystem>
#include <string>

#include "phonon_herald/simulator.hpp"

namespace herald {

/// Analysis settings. Negative / zero sentinels mean "derive from the
/// campaign" (see resolve()).
struct AnalysisConfig {
  double tau_us = 0.0;            ///< 0 = write-envelope FWHM after filtering
  double map_t_min_us = -1.0;     ///< <0 = write window start - tau
  double map_t_max_us = -1.0;     ///< <0 = shot length
  double map_step_us = 0.0;       ///< 0 = tau/4
  double write_center_us = -1.0;  ///< <0 = write window center + filter delay
  double read_scan_min_us = -1.0; ///< <0 = read window start
  double read_scan_max_us = -1.0; ///< <0 = read window end + filter settling
  int resamples = 5000;
  int map_resamples = 1000;
  int min_coincidences = 5;
};

/// Fully describes one reproducible run: physics, schedule, power scale,
/// filter, campaign statistics, analysis settings, output location.
struct RunConfig {
  CampaignConfig campaign;
  AnalysisConfig analysis;
  std::string out_dir = "out";
  int workers = 0;  ///< 0 = hardware concurrency

  bool mu_w_auto = true;           ///< mu_w = A+ * T_w from the write stage
  bool thermal_admix_auto = true;  ///< thermal_admix = 1/C_q from the read stage

  /// Named starting points:
  ///  - "paper": canonical parameters with the published pulse timing
  ///    (cool 150-650 us, write 750-850 us, read from 950 us).
  ///  - "low-gain": same physics with a compact campaign schedule and the
  ///    noise calibration used by the nonclassicality demonstration.
  ///  - "high-gain": ~10 pairs per shot; strong but classical correlations.
  static RunConfig preset(const std::string& name);

  /// Parses the key-value config grammar (see README) on top of the given
  /// base preset; `preset = <name>` inside the text switches the base.
  static RunConfig from_text(const std::string& text);
  static RunConfig from_file(const std::filesystem::path& path);

  /// Fills every derived ("auto") value so the configuration is fully
  /// concrete, then validates. Must be called before use.
  void resolve();

  /// Canonical resolved serialization; hashed into config_hash and embedded
  /// verbatim in output headers.
  std::string canonical_text() const;
  std::string config_hash() const;
};

/// FWHM (us) of the pair-photon envelope: the write-window box convolved
/// with the cascade response.
double write_envelope_fwhm_us(const CampaignConfig& campaign);

}  // namespace herald
