#include "phonon_herald/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "phonon_herald/constants.hpp"

namespace herald {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& value, const std::string& key) {
  const std::string v = trim(value);
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size() || v.empty() || !std::isfinite(out)) {
    throw std::invalid_argument("config: bad number '" + value + "' for key " + key);
  }
  return out;
}

long parse_long(const std::string& value, const std::string& key) {
  const double d = parse_number(value, key);
  if (d != std::floor(d)) {
    throw std::invalid_argument("config: key " + key + " must be an integer");
  }
  return static_cast<long>(d);
}

bool is_auto(const std::string& value) { return trim(value) == "auto"; }

}  // namespace

RunConfig RunConfig::preset(const std::string& name) {
  RunConfig cfg;
  CampaignConfig& c = cfg.campaign;
  c.params = SystemParams::preset();
  c.cascade = FilterCascade::preset();

  // Power scale targets: C_q = 10 read cooling, A+ * T_w = 0.1 write pairs
  // (T_w = 100 us in every preset schedule).
  const double gamma_th = c.params.gamma_th();
  const double per_photon = 4.0 * c.params.g0 * c.params.g0 / c.params.kappa;
  c.scale.coeff_r = 10.0 * gamma_th / per_photon;
  c.scale.coeff_w = (0.1 / units::us(100.0)) / per_photon;

  c.eta_w = 0.05;
  c.eta_r = 0.05;
  c.n_residual = 0.25;
  c.storage_delay_us = 5.0;
  c.temporal_modes = 1;
  c.dark_rate_hz = 0.0;
  c.master_seed = 1;
  c.dt_us = 0.1;
  c.duty_cycle = 0.05;

  if (name == "paper") {
    c.schedule = PulseSchedule::preset();
    c.n_shots = 100000;
  } else if (name == "low-gain" || name == "high-gain") {
    // Compact campaign timing: short storage and a readout cut off after
    // Gamma_opt * T_r = 3, which keeps the thermal steady-state flux out
    // of the read analysis window.
    c.schedule.shot_length_us = 900.0;
    c.schedule.idle_read_fraction = 0.005;
    c.schedule.stages = {
        {150.0, 650.0, 0.0, 1.0},
        {660.0, 760.0, 1.0, 0.0},
        {770.0, 802.0, 0.0, 1.0},
    };
    cfg.analysis.tau_us = 40.0;
    if (name == "low-gain") {
      c.n_shots = 600000;
    } else {
      c.schedule.stages[1].write_power = 20.0;  // A+ * T_w = 2
      c.mu_w = 10.0;
      cfg.mu_w_auto = false;
      c.n_residual = 4.0;  // strong-drive technical heating of the read channel
      c.n_shots = 200000;
    }
  } else {
    throw std::invalid_argument("unknown preset '" + name + "'");
  }
  return cfg;
}

RunConfig RunConfig::from_text(const std::string& text) {
  // First pass: find the base preset.
  std::string preset_name = "paper";
  {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      const std::string t = trim(line);
      if (t.rfind("preset", 0) == 0) {
        const auto eq = t.find('=');
        if (eq != std::string::npos) preset_name = trim(t.substr(eq + 1));
      }
    }
  }
  RunConfig cfg = preset(preset_name);
  CampaignConfig& c = cfg.campaign;

  std::istringstream in(text);
  std::string line;
  std::string section;
  bool stages_reset = false;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    const auto hash = t.find('#');
    if (hash != std::string::npos) t = trim(t.substr(0, hash));
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') {
        throw std::invalid_argument("config line " + std::to_string(line_no) +
                                    ": malformed section header");
      }
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    const std::string qual = section.empty() ? key : section + "." + key;

    if (qual == "preset") continue;  // handled in the first pass

    if (qual == "system.kappa_mhz") c.params.kappa = units::mhz(parse_number(value, qual));
    else if (qual == "system.omega_m_mhz") c.params.omega_m = units::mhz(parse_number(value, qual));
    else if (qual == "system.g0_hz") c.params.g0 = units::hz(parse_number(value, qual));
    else if (qual == "system.gamma_m_hz") c.params.gamma_m = units::hz(parse_number(value, qual));
    else if (qual == "system.n_th") c.params.n_th = parse_number(value, qual);
    else if (qual == "system.t_env_k") c.params.t_env = parse_number(value, qual);
    else if (qual == "schedule.shot_length_us") c.schedule.shot_length_us = parse_number(value, qual);
    else if (qual == "schedule.idle_read_fraction") c.schedule.idle_read_fraction = parse_number(value, qual);
    else if (qual == "schedule.stage") {
      if (!stages_reset) {
        c.schedule.stages.clear();
        stages_reset = true;
      }
      std::istringstream fields(value);
      PulseStage st;
      if (!(fields >> st.start_us >> st.end_us >> st.write_power >> st.read_power)) {
        throw std::invalid_argument("config line " + std::to_string(line_no) +
                                    ": stage needs 'start end write_power read_power'");
      }
      c.schedule.stages.push_back(st);
    } else if (qual == "power_scale.coeff_w") c.scale.coeff_w = parse_number(value, qual);
    else if (qual == "power_scale.coeff_r") c.scale.coeff_r = parse_number(value, qual);
    else if (qual == "filter.kappa_f_khz") c.cascade.kappa_f = units::khz(parse_number(value, qual));
    else if (qual == "filter.n_stages") c.cascade.n_stages = static_cast<int>(parse_long(value, qual));
    else if (qual == "filter.transmission") c.cascade.transmission = parse_number(value, qual);
    else if (qual == "campaign.mu_w") {
      if (is_auto(value)) cfg.mu_w_auto = true;
      else { c.mu_w = parse_number(value, qual); cfg.mu_w_auto = false; }
    } else if (qual == "campaign.eta_w") c.eta_w = parse_number(value, qual);
    else if (qual == "campaign.eta_r") c.eta_r = parse_number(value, qual);
    else if (qual == "campaign.n_residual") c.n_residual = parse_number(value, qual);
    else if (qual == "campaign.thermal_admix") {
      if (is_auto(value)) cfg.thermal_admix_auto = true;
      else { c.thermal_admix = parse_number(value, qual); cfg.thermal_admix_auto = false; }
    } else if (qual == "campaign.dark_rate_hz") c.dark_rate_hz = parse_number(value, qual);
    else if (qual == "campaign.storage_delay_us") c.storage_delay_us = parse_number(value, qual);
    else if (qual == "campaign.temporal_modes") c.temporal_modes = static_cast<int>(parse_long(value, qual));
    else if (qual == "campaign.n_shots") c.n_shots = parse_long(value, qual);
    else if (qual == "campaign.duty_cycle") c.duty_cycle = parse_number(value, qual);
    else if (qual == "campaign.write_window_us") {
      std::istringstream fields(value);
      Interval w;
      if (!(fields >> w.start_us >> w.end_us)) {
        throw std::invalid_argument("config line " + std::to_string(line_no) +
                                    ": window needs 'start end'");
      }
      c.write_window_us = w;
    } else if (qual == "campaign.read_window_us") {
      std::istringstream fields(value);
      Interval w;
      if (!(fields >> w.start_us >> w.end_us)) {
        throw std::invalid_argument("config line " + std::to_string(line_no) +
                                    ": window needs 'start end'");
      }
      c.read_window_us = w;
    } else if (qual == "analysis.tau_us") {
      cfg.analysis.tau_us = is_auto(value) ? 0.0 : parse_number(value, qual);
    } else if (qual == "analysis.map_t_min_us") {
      cfg.analysis.map_t_min_us = is_auto(value) ? -1.0 : parse_number(value, qual);
    } else if (qual == "analysis.map_t_max_us") {
      cfg.analysis.map_t_max_us = is_auto(value) ? -1.0 : parse_number(value, qual);
    } else if (qual == "analysis.map_step_us") {
      cfg.analysis.map_step_us = is_auto(value) ? 0.0 : parse_number(value, qual);
    } else if (qual == "analysis.write_center_us") {
      cfg.analysis.write_center_us = is_auto(value) ? -1.0 : parse_number(value, qual);
    } else if (qual == "analysis.read_scan_min_us") {
      cfg.analysis.read_scan_min_us = is_auto(value) ? -1.0 : parse_number(value, qual);
    } else if (qual == "analysis.read_scan_max_us") {
      cfg.analysis.read_scan_max_us = is_auto(value) ? -1.0 : parse_number(value, qual);
    } else if (qual == "analysis.resamples") cfg.analysis.resamples = static_cast<int>(parse_long(value, qual));
    else if (qual == "analysis.map_resamples") cfg.analysis.map_resamples = static_cast<int>(parse_long(value, qual));
    else if (qual == "analysis.min_coincidences") cfg.analysis.min_coincidences = static_cast<int>(parse_long(value, qual));
    else if (qual == "run.dt_us") c.dt_us = parse_number(value, qual);
    else if (qual == "run.master_seed") c.master_seed = static_cast<std::uint64_t>(parse_long(value, qual));
    else if (qual == "run.out_dir") cfg.out_dir = value;
    else if (qual == "run.workers") cfg.workers = static_cast<int>(parse_long(value, qual));
    else {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": unknown key '" + qual + "'");
    }
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_text(buffer.str());
}

double write_envelope_fwhm_us(const CampaignConfig& campaign) {
  Interval w;
  if (campaign.write_window_us) {
    w = *campaign.write_window_us;
  } else if (const PulseStage* st = campaign.schedule.write_stage()) {
    w = {st->start_us, st->end_us};
  } else {
    throw std::invalid_argument("write_envelope_fwhm_us: no write window");
  }
  // Envelope of the box [w.start, w.end) through the cascade is
  // CDF(t - start) - CDF(t - end); scan it on the campaign grid.
  const double dt = campaign.dt_us;
  const double horizon =
      campaign.schedule.shot_length_us +
      units::s_to_us(30.0 / campaign.cascade.kappa_f);
  std::vector<double> env;
  env.reserve(static_cast<std::size_t>(horizon / dt) + 1);
  double peak = 0.0;
  for (double t = 0.0; t <= horizon; t += dt) {
    const double v =
        impulse_response_cdf(campaign.cascade, units::us(t - w.start_us)) -
        impulse_response_cdf(campaign.cascade, units::us(t - w.end_us));
    env.push_back(v);
    peak = std::max(peak, v);
  }
  if (peak <= 0.0) throw std::runtime_error("write_envelope_fwhm_us: empty envelope");
  const double half = 0.5 * peak;
  std::size_t first = 0;
  while (first < env.size() && env[first] < half) ++first;
  std::size_t last = env.size() - 1;
  while (last > first && env[last] < half) --last;
  return (last - first) * dt;
}

void RunConfig::resolve() {
  CampaignConfig& c = campaign;
  if (thermal_admix_auto) {
    c.thermal_admix = 0.0;
    const PulseStage* r = c.schedule.read_stage();
    double readout = c.readout_rate_hz.value_or(
        r ? optically_broadened_rate(c.params, c.scale.coeff_r * r->read_power) : 0.0);
    const double gamma_th = c.params.gamma_th();
    if (readout > 0.0 && gamma_th > 0.0) {
      c.thermal_admix = thermal_admixture(quantum_cooperativity(readout, gamma_th));
    }
  }
  if (mu_w_auto) {
    c.mu_w = 0.0;
    if (const PulseStage* w = c.schedule.write_stage()) {
      const ScatteringRates sr = scattering_rates(
          c.params, {c.params.omega_m, c.scale.coeff_w * w->write_power});
      c.mu_w = sr.a_plus * units::us(w->end_us - w->start_us);
    }
  }
  c.validate();

  AnalysisConfig& a = analysis;
  const bool has_write = c.write_window_us || c.schedule.write_stage();
  if (a.tau_us <= 0.0 && has_write) a.tau_us = write_envelope_fwhm_us(c);
  if (a.tau_us <= 0.0) {
    throw std::invalid_argument("config: analysis.tau_us cannot be derived (no write window)");
  }
  const double delay_us = units::s_to_us(c.cascade.mean_delay_s());
  Interval w{0.0, 0.0}, r{0.0, 0.0};
  if (c.write_window_us) w = *c.write_window_us;
  else if (const PulseStage* st = c.schedule.write_stage()) w = {st->start_us, st->end_us};
  if (c.read_window_us) r = *c.read_window_us;
  else if (const PulseStage* st = c.schedule.read_stage()) r = {st->start_us, st->end_us};

  if (a.write_center_us < 0.0) {
    a.write_center_us = 0.5 * (w.start_us + w.end_us) + delay_us;
  }
  if (a.read_scan_min_us < 0.0) a.read_scan_min_us = r.start_us;
  if (a.read_scan_max_us < 0.0) {
    a.read_scan_max_us = std::min(c.schedule.shot_length_us, r.end_us + 2.0 * delay_us);
  }
  if (a.map_t_min_us < 0.0) a.map_t_min_us = std::max(0.0, w.start_us - a.tau_us);
  if (a.map_t_max_us < 0.0) a.map_t_max_us = c.schedule.shot_length_us;
  if (a.map_step_us <= 0.0) a.map_step_us = a.tau_us / 4.0;
  if (a.resamples < 2 || a.map_resamples < 2) {
    throw std::invalid_argument("config: resample counts must be >= 2");
  }
  if (a.min_coincidences < 0) {
    throw std::invalid_argument("config: min_coincidences must be >= 0");
  }
}

std::string RunConfig::canonical_text() const {
  const CampaignConfig& c = campaign;
  std::string s;
  auto put = [&](const std::string& key, const std::string& value) {
    s += key;
    s += " = ";
    s += value;
    s += '\n';
  };
  auto num = [&](const std::string& key, double v) { put(key, format_double(v)); };
  s += "[system]\n";
  num("kappa_mhz", c.params.kappa / units::mhz(1.0));
  num("omega_m_mhz", c.params.omega_m / units::mhz(1.0));
  num("g0_hz", c.params.g0 / units::hz(1.0));
  num("gamma_m_hz", c.params.gamma_m / units::hz(1.0));
  num("n_th", c.params.n_th);
  if (c.params.t_env) num("t_env_k", *c.params.t_env);
  s += "[schedule]\n";
  num("shot_length_us", c.schedule.shot_length_us);
  num("idle_read_fraction", c.schedule.idle_read_fraction);
  for (const auto& st : c.schedule.stages) {
    put("stage", format_double(st.start_us) + " " + format_double(st.end_us) + " " +
                     format_double(st.write_power) + " " + format_double(st.read_power));
  }
  s += "[power_scale]\n";
  num("coeff_w", c.scale.coeff_w);
  num("coeff_r", c.scale.coeff_r);
  s += "[filter]\n";
  num("kappa_f_khz", c.cascade.kappa_f / units::khz(1.0));
  put("n_stages", std::to_string(c.cascade.n_stages));
  num("transmission", c.cascade.transmission);
  s += "[campaign]\n";
  num("mu_w", c.mu_w);
  num("eta_w", c.eta_w);
  num("eta_r", c.eta_r);
  num("n_residual", c.n_residual);
  num("thermal_admix", c.thermal_admix);
  num("dark_rate_hz", c.dark_rate_hz);
  num("storage_delay_us", c.storage_delay_us);
  put("temporal_modes", std::to_string(c.temporal_modes));
  put("n_shots", std::to_string(c.n_shots));
  num("duty_cycle", c.duty_cycle);
  if (c.write_window_us) {
    put("write_window_us", format_double(c.write_window_us->start_us) + " " +
                               format_double(c.write_window_us->end_us));
  }
  if (c.read_window_us) {
    put("read_window_us", format_double(c.read_window_us->start_us) + " " +
                              format_double(c.read_window_us->end_us));
  }
  s += "[analysis]\n";
  num("tau_us", analysis.tau_us);
  num("map_t_min_us", analysis.map_t_min_us);
  num("map_t_max_us", analysis.map_t_max_us);
  num("map_step_us", analysis.map_step_us);
  num("write_center_us", analysis.write_center_us);
  num("read_scan_min_us", analysis.read_scan_min_us);
  num("read_scan_max_us", analysis.read_scan_max_us);
  put("resamples", std::to_string(analysis.resamples));
  put("map_resamples", std::to_string(analysis.map_resamples));
  put("min_coincidences", std::to_string(analysis.min_coincidences));
  s += "[run]\n";
  num("dt_us", c.dt_us);
  put("master_seed", std::to_string(c.master_seed));
  return s;
}

std::string RunConfig::config_hash() const { return to_hex(fnv1a64(canonical_text())); }

}  // namespace herald
