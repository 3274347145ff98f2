#pragma once

#include <filesystem>
#include <iosfwd>

#include "phonon_herald/config.hpp"
#include "phonon_herald/correlation.hpp"

namespace herald {

/// Writes occupation.csv, rates_raw.csv and rates_filtered.csv under
/// config.out_dir.
void cmd_rates(const RunConfig& config, std::ostream& log);

/// Runs the campaign into shots.ndjson and writes simulate_summary.json.
/// Returns the summary.
CampaignSummary cmd_simulate(const RunConfig& config, std::ostream& log);

struct AnalyzeResult {
  WindowSpec write_window;
  WindowSpec read_window;
  bool optimum_found = false;
  WindowPairStats optimum;
  PValueReport p_value;
};

/// Full analysis of a shot file: correlation map (map.csv), read-position
/// section (section.csv) and analysis_summary.json.
AnalyzeResult cmd_analyze(const RunConfig& config, const std::filesystem::path& shot_file,
                          std::ostream& log);

/// Fits the power-scale coefficients to an observed total-rate CSV
/// (columns `time_us,gamma_total_hz`, or the 4-column rate trace format).
/// Writes power_scale.json and fit_overlay.csv.
FitReport cmd_fit(const RunConfig& config, const std::filesystem::path& observed_csv,
                  std::ostream& log);

/// Emits the cascade responses: impulse_response.csv (t_us,xi) and
/// suppression.csv (offset_hz,suppression_db).
void cmd_filter(const RunConfig& config, std::ostream& log);

}  // namespace herald
