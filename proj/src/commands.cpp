#include "phonon_herald/commands.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "phonon_herald/constants.hpp"

namespace herald {
namespace {

using ordered_json = nlohmann::ordered_json;

std::filesystem::path ensure_out_dir(const RunConfig& config) {
  const std::filesystem::path dir(config.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec && !std::filesystem::is_directory(dir)) {
    throw std::runtime_error("cannot create output directory " + dir.string());
  }
  return dir;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const RunConfig& config,
            const std::string& columns)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw std::runtime_error("cannot open " + path.string());
    // Resolved config rides along as comments for provenance.
    std::istringstream cfg(config.canonical_text());
    std::string line;
    while (std::getline(cfg, line)) out_ << "# " << line << "\n";
    out_ << "# config_hash = " << config.config_hash() << "\n";
    out_ << columns << "\n";
  }

  void row(std::initializer_list<double> values) {
    bool first = true;
    for (const double v : values) {
      if (!first) out_ << ',';
      out_ << format_double(v);
      first = false;
    }
    out_ << '\n';
  }

  void raw_row(const std::string& text) { out_ << text << '\n'; }

  void close() {
    out_.close();
    if (!out_) throw std::runtime_error("write error on " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

void write_json(const std::filesystem::path& path, const ordered_json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("write error on " + path.string());
}

ordered_json provenance(const RunConfig& config) {
  ordered_json j;
  j["config_hash"] = config.config_hash();
  j["master_seed"] = config.campaign.master_seed;
  j["config"] = config.canonical_text();
  return j;
}

double parse_double_or_throw(const std::string& cell, const std::string& file, long line_no) {
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end == cell.c_str()) {
    throw std::runtime_error(file + " line " + std::to_string(line_no) +
                             ": bad numeric field '" + cell + "'");
  }
  return v;
}

std::string join_cells(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  return out;
}

}  // namespace

void cmd_rates(const RunConfig& config, std::ostream& log) {
  const auto dir = ensure_out_dir(config);
  const CampaignConfig& c = config.campaign;
  const OccupationTrace occ =
      evolve_occupation(c.params, c.schedule, c.scale, {c.dt_us, std::nullopt});
  const RateTraces raw = photon_rate_traces(occ, c.params, c.schedule, c.scale);
  ConvolutionReport conv_report;
  const RateTraces filtered = convolve_rate_traces(c.cascade, raw, &conv_report);

  CsvWriter occ_csv(dir / "occupation.csv", config, "time_us,n_bar");
  for (std::size_t i = 0; i < occ.times_us.size(); ++i) {
    occ_csv.row({occ.times_us[i], occ.n_bar[i]});
  }
  occ_csv.close();

  auto write_rates = [&](const std::filesystem::path& path, const RateTraces& t) {
    CsvWriter csv(path, config, "time_us,gamma_s_hz,gamma_as_hz,gamma_total_hz");
    for (std::size_t i = 0; i < t.times_us.size(); ++i) {
      csv.row({t.times_us[i], t.gamma_s[i], t.gamma_as[i], t.gamma_s[i] + t.gamma_as[i]});
    }
    csv.close();
  };
  write_rates(dir / "rates_raw.csv", raw);
  write_rates(dir / "rates_filtered.csv", filtered);

  log << "rates: wrote occupation.csv, rates_raw.csv, rates_filtered.csv to " << dir.string()
      << " (filter kernel mass " << format_double(conv_report.kernel_mass) << ")\n";
}

CampaignSummary cmd_simulate(const RunConfig& config, std::ostream& log) {
  const auto dir = ensure_out_dir(config);
  const auto shots_path = dir / "shots.ndjson";
  const CampaignSummary summary =
      run_campaign(config.campaign, shots_path, config.workers, config.config_hash());

  ordered_json j;
  j["format"] = "phonon-herald/simulate-summary/v1";
  j["provenance"] = provenance(config);
  j["n_shots"] = summary.n_shots;
  j["total_counts"] = summary.total_counts;
  j["write_window_counts"] = summary.write_window_counts;
  j["read_window_counts"] = summary.read_window_counts;
  j["elsewhere_counts"] = summary.elsewhere_counts;
  j["write_window_rate_hz"] = summary.write_window_rate_hz;
  j["read_window_rate_hz"] = summary.read_window_rate_hz;
  j["coincidences"] = summary.coincidences;
  j["expected_coincidences"] = summary.expected_coincidences;
  j["shot_length_us"] = summary.shot_length_us;
  j["duty_cycle"] = summary.duty_cycle;
  j["implied_wall_clock_s"] = summary.implied_wall_clock_s;
  write_json(dir / "simulate_summary.json", j);

  log << "simulate: " << summary.n_shots << " shots, " << summary.total_counts
      << " counts, " << summary.coincidences << " write-read coincidences (expected "
      << format_double(summary.expected_coincidences) << ")\n";
  return summary;
}

AnalyzeResult cmd_analyze(const RunConfig& config, const std::filesystem::path& shot_file,
                          std::ostream& log) {
  const auto dir = ensure_out_dir(config);
  const ShotFile file = read_shot_file(shot_file);
  const EventIndex index(file.shots);
  const AnalysisConfig& a = config.analysis;

  AnalyzeResult result;
  result.write_window = {a.write_center_us, a.tau_us};

  // Read-position section with the write window fixed.
  std::vector<double> scan;
  for (double t = a.read_scan_min_us; t <= a.read_scan_max_us + 1e-9; t += a.tau_us / 4.0) {
    scan.push_back(t);
  }
  AnalysisOptions section_opts{a.resamples, config.campaign.master_seed, a.min_coincidences};
  const std::vector<SectionPoint> section =
      optimize_read_window(index, result.write_window, scan, a.tau_us, section_opts,
                           config.workers);

  CsvWriter section_csv(dir / "section.csv", config, "tr_us,R,R_err,flag");
  double best_r = -1.0;
  for (const auto& pt : section) {
    if (!pt.insufficient && pt.r > best_r) {
      best_r = pt.r;
      result.read_window = {pt.t_r_us, a.tau_us};
      result.optimum_found = true;
    }
    std::vector<std::string> cells{format_double(pt.t_r_us)};
    if (pt.insufficient) {
      cells.insert(cells.end(), {"", "", "insufficient"});
    } else {
      cells.insert(cells.end(),
                   {format_double(pt.r), format_double(pt.r_err), "ok"});
    }
    section_csv.raw_row(join_cells(cells));
  }
  section_csv.close();

  if (result.optimum_found) {
    const PairCounts counts =
        PairCounts::from_index(index, result.write_window, result.read_window);
    result.optimum = window_pair_stats(counts, section_opts);
    result.p_value = bootstrap_pvalue(index, result.write_window, result.read_window,
                                      std::max(1000, a.resamples), section_opts);
  }

  // Full correlation map.
  std::vector<double> grid;
  for (double t = a.map_t_min_us; t <= a.map_t_max_us + 1e-9; t += a.map_step_us) {
    grid.push_back(t);
  }
  AnalysisOptions map_opts{a.map_resamples, config.campaign.master_seed, a.min_coincidences};
  const CorrelationMap map =
      correlation_map(index, grid, grid, a.tau_us, map_opts, config.workers);

  CsvWriter map_csv(dir / "map.csv", config,
                    "t1_us,t2_us,g2,g2_err,R,R_err,coincidences,flag");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const std::size_t at = map.idx(i, j);
      std::vector<std::string> cells{format_double(grid[i]), format_double(grid[j])};
      if (std::isfinite(map.g2[at])) {
        cells.push_back(format_double(map.g2[at]));
        cells.push_back(format_double(map.g2_err[at]));
      } else {
        cells.insert(cells.end(), {"", ""});
      }
      if (std::isfinite(map.r[at])) {
        cells.push_back(format_double(map.r[at]));
        cells.push_back(format_double(map.r_err[at]));
      } else {
        cells.insert(cells.end(), {"", ""});
      }
      cells.push_back(format_double(map.coincidences[at]));
      cells.push_back(map.insufficient[at] ? "insufficient" : "ok");
      map_csv.raw_row(join_cells(cells));
    }
  }
  map_csv.close();

  ordered_json j;
  j["format"] = "phonon-herald/analysis-summary/v1";
  j["provenance"] = provenance(config);
  j["input_file"] = shot_file.string();
  j["input_hash"] = to_hex(hash_file(shot_file));
  j["input_config_hash"] = file.header.config_hash;
  j["n_shots"] = static_cast<long>(file.shots.size());
  j["tau_us"] = a.tau_us;
  j["write_center_us"] = result.write_window.center_us;
  if (result.optimum_found) {
    j["read_center_us"] = result.read_window.center_us;
    j["g2_wr"] = result.optimum.cross.value;
    j["g2_wr_err"] = result.optimum.cross.err;
    j["g2_ww"] = result.optimum.auto1.value;
    j["g2_ww_err"] = result.optimum.auto1.err;
    j["g2_rr"] = result.optimum.auto2.value;
    j["g2_rr_err"] = result.optimum.auto2.err;
    j["coincidences"] = result.optimum.cross.coincidences;
    j["R"] = result.p_value.r;
    j["R_err"] = result.p_value.r_err;
    j["R_ci95"] = {result.p_value.ci_lo, result.p_value.ci_hi};
    j["p_value"] = result.p_value.p_value;
    j["p_resamples"] = result.p_value.valid_resamples + result.p_value.degenerate_resamples;
    j["p_degenerate_resamples"] = result.p_value.degenerate_resamples;
  } else {
    j["read_center_us"] = nullptr;
    j["note"] = "no read position with sufficient coincidences";
  }
  write_json(dir / "analysis_summary.json", j);

  if (result.optimum_found) {
    log << "analyze: R = " << format_double(result.p_value.r) << " +- "
        << format_double(result.p_value.r_err)
        << ", p(R<=1) = " << format_double(result.p_value.p_value) << " at t_r = "
        << format_double(result.read_window.center_us) << " us\n";
  } else {
    log << "analyze: no read position with sufficient coincidences\n";
  }
  return result;
}

FitReport cmd_fit(const RunConfig& config, const std::filesystem::path& observed_csv,
                  std::ostream& log) {
  const auto dir = ensure_out_dir(config);
  std::ifstream in(observed_csv);
  if (!in) throw std::runtime_error("cannot open " + observed_csv.string());
  std::vector<double> times, totals;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (line.find("time_us") != std::string::npos) continue;  // column header
    std::istringstream fields(line);
    std::vector<double> vals;
    std::string cell;
    while (std::getline(fields, cell, ',')) {
      vals.push_back(parse_double_or_throw(cell, observed_csv.string(), line_no));
    }
    if (vals.size() != 2 && vals.size() != 4) {
      throw std::runtime_error(observed_csv.string() + " line " + std::to_string(line_no) +
                               ": expected 2 or 4 columns");
    }
    times.push_back(vals[0]);
    totals.push_back(vals.back());
  }

  const CampaignConfig& c = config.campaign;
  FitOptions opts;
  opts.dt_us = c.dt_us;
  opts.cascade = c.cascade;
  const FitReport report = fit_power_scale(times, totals, c.params, c.schedule, opts);

  ordered_json j;
  j["format"] = "phonon-herald/power-scale/v1";
  j["provenance"] = provenance(config);
  j["input_file"] = observed_csv.string();
  j["input_hash"] = to_hex(hash_file(observed_csv));
  j["coeff_w"] = report.scale.coeff_w;
  j["coeff_r"] = report.scale.coeff_r;
  j["residual_norm_hz"] = report.residual_norm;
  j["iterations"] = report.iterations;
  j["converged"] = report.converged;
  ordered_json stages = ordered_json::array();
  for (const auto& st : report.stages) {
    stages.push_back({{"start_us", st.start_us},
                      {"end_us", st.end_us},
                      {"observed_mean_hz", st.observed_mean_hz},
                      {"model_mean_hz", st.model_mean_hz}});
  }
  j["stages"] = stages;
  write_json(dir / "power_scale.json", j);

  // Overlay for plotting: observed next to the fitted model.
  const OccupationTrace occ =
      evolve_occupation(c.params, c.schedule, report.scale, {c.dt_us, std::nullopt});
  const RateTraces model = convolve_rate_traces(
      c.cascade, photon_rate_traces(occ, c.params, c.schedule, report.scale));
  CsvWriter overlay(dir / "fit_overlay.csv", config, "time_us,observed_hz,model_hz");
  for (std::size_t i = 0; i < times.size(); ++i) {
    const auto idx = static_cast<std::size_t>(std::llround(times[i] / c.dt_us));
    const double m = idx < model.times_us.size()
                         ? model.gamma_s[idx] + model.gamma_as[idx]
                         : 0.0;
    overlay.row({times[i], totals[i], m});
  }
  overlay.close();

  log << "fit: coeff_w = " << format_double(report.scale.coeff_w)
      << ", coeff_r = " << format_double(report.scale.coeff_r) << ", residual norm "
      << format_double(report.residual_norm) << " Hz in " << report.iterations
      << " iterations\n";
  return report;
}

void cmd_filter(const RunConfig& config, std::ostream& log) {
  const auto dir = ensure_out_dir(config);
  const FilterCascade& cascade = config.campaign.cascade;
  cascade.validate();

  const double horizon_us = units::s_to_us(25.0 / cascade.kappa_f);
  const double dt_us = horizon_us / 2500.0;
  CsvWriter xi_csv(dir / "impulse_response.csv", config, "t_us,xi");
  for (double t = 0.0; t <= horizon_us; t += dt_us) {
    xi_csv.row({t, impulse_response(cascade, units::us(t))});
  }
  xi_csv.close();

  CsvWriter supp_csv(dir / "suppression.csv", config, "offset_hz,suppression_db");
  for (double f = 0.0; f <= 2.0e6 + 1.0; f += 1.0e4) {
    supp_csv.row({f, frequency_suppression_db(cascade, units::hz(f))});
  }
  supp_csv.close();

  const double at_sideband = frequency_suppression_db(cascade, units::mhz(1.4));
  log << "filter: peak delay " << format_double(units::s_to_us(cascade.peak_delay_s()))
      << " us, suppression at 1.4 MHz = " << format_double(at_sideband) << " dB (FWHM convention)\n";
}

}  // namespace herald
