#include "phonon_herald/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "phonon_herald/constants.hpp"

namespace herald {
namespace {

// Right side of the occupation rate equation, precombined into
// dn/dt = source - decay * n.
struct OdeCoeffs {
  double source = 0.0;
  double decay = 0.0;
};

OdeCoeffs coeffs_at(const SystemParams& params, const PulseSchedule& schedule,
                    const PowerScale& scale, double t_us) {
  const ScatteringRates r = drive_rates_at(params, schedule, scale, t_us);
  return {r.a_plus + params.n_th * params.gamma_m,
          r.a_minus - r.a_plus + params.gamma_m};
}

double peak_total_rate(const SystemParams& params, const PulseSchedule& schedule,
                       const PowerScale& scale) {
  // Rates are constant within a stage, so probing one point per stage plus
  // one idle point covers the whole shot.
  double peak = 0.0;
  auto probe = [&](double t_us) {
    const ScatteringRates r = drive_rates_at(params, schedule, scale, t_us);
    peak = std::max(peak, r.a_plus + r.a_minus);
  };
  for (const auto& st : schedule.stages) probe(0.5 * (st.start_us + st.end_us));
  probe(schedule.shot_length_us);  // idle level (outside all stages)
  return peak + params.gamma_m * (2.0 * params.n_th + 1.0);
}

}  // namespace

ScatteringRates drive_rates_at(const SystemParams& params, const PulseSchedule& schedule,
                               const PowerScale& scale, double t_us) {
  const auto powers = schedule.powers_at(t_us);
  const DriveTone write{params.omega_m, scale.coeff_w * powers.write};
  const DriveTone read{-params.omega_m, scale.coeff_r * powers.read};
  return scattering_rates(params, write) + scattering_rates(params, read);
}

OccupationTrace evolve_occupation(const SystemParams& params, const PulseSchedule& schedule,
                                  const PowerScale& scale, const EvolveOptions& opts) {
  params.validate();
  schedule.validate();
  if (!(opts.dt_us > 0.0)) {
    throw std::invalid_argument("evolve_occupation: dt must be positive");
  }
  const double dt_s = units::us(opts.dt_us);
  const double peak = peak_total_rate(params, schedule, scale);
  if (dt_s * peak >= 0.1) {
    const double suggested_us = units::s_to_us(0.05 / peak);
    throw StepTooLargeError(
        "evolve_occupation: step too large for the peak rates; suggested dt about " +
        std::to_string(suggested_us) + " us",
        suggested_us);
  }
  const auto n_steps =
      static_cast<std::size_t>(std::llround(schedule.shot_length_us / opts.dt_us));
  if (std::abs(n_steps * opts.dt_us - schedule.shot_length_us) >
      1e-9 * schedule.shot_length_us) {
    throw std::invalid_argument("evolve_occupation: dt must divide shot_length");
  }

  OccupationTrace trace;
  trace.dt_us = opts.dt_us;
  trace.times_us.resize(n_steps + 1);
  trace.n_bar.resize(n_steps + 1);

  double n = 0.0;
  if (opts.initial_occupation) {
    n = *opts.initial_occupation;
    if (n < 0.0) {
      throw std::invalid_argument("evolve_occupation: initial occupation must be >= 0");
    }
  } else {
    // Steady state under the idle read drive, write off.
    PulseSchedule idle = schedule;
    idle.stages.clear();
    const OdeCoeffs c = coeffs_at(params, idle, scale, 0.0);
    if (!(c.decay > 0.0)) {
      throw ParametricInstabilityError(
          "evolve_occupation: idle drive has no stable steady state");
    }
    n = c.source / c.decay;
  }

  trace.times_us[0] = 0.0;
  trace.n_bar[0] = n;
  for (std::size_t i = 0; i < n_steps; ++i) {
    const double t_us = i * opts.dt_us;
    const OdeCoeffs c0 = coeffs_at(params, schedule, scale, t_us);
    const OdeCoeffs ch = coeffs_at(params, schedule, scale, t_us + 0.5 * opts.dt_us);
    const OdeCoeffs c1 = coeffs_at(params, schedule, scale, t_us + opts.dt_us);
    const double k1 = c0.source - c0.decay * n;
    const double k2 = ch.source - ch.decay * (n + 0.5 * dt_s * k1);
    const double k3 = ch.source - ch.decay * (n + 0.5 * dt_s * k2);
    const double k4 = c1.source - c1.decay * (n + dt_s * k3);
    n += dt_s / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (n < 0.0) {
      if (n < -1e-12) ++trace.clamp_warnings;
      n = 0.0;
    }
    trace.times_us[i + 1] = (i + 1) * opts.dt_us;
    trace.n_bar[i + 1] = n;
  }
  return trace;
}

RateTraces photon_rate_traces(const OccupationTrace& occupation, const SystemParams& params,
                              const PulseSchedule& schedule, const PowerScale& scale) {
  if (occupation.times_us.size() != occupation.n_bar.size() || occupation.times_us.empty()) {
    throw std::invalid_argument("photon_rate_traces: malformed occupation trace");
  }
  if (occupation.times_us.front() != 0.0 ||
      std::abs(occupation.times_us.back() - schedule.shot_length_us) >
          1e-6 * schedule.shot_length_us) {
    throw std::invalid_argument("photon_rate_traces: occupation grid does not cover the schedule");
  }
  RateTraces out;
  out.dt_us = occupation.dt_us;
  out.times_us = occupation.times_us;
  out.gamma_s.resize(occupation.n_bar.size());
  out.gamma_as.resize(occupation.n_bar.size());
  for (std::size_t i = 0; i < occupation.n_bar.size(); ++i) {
    const auto powers = schedule.powers_at(occupation.times_us[i]);
    const DriveTone write{params.omega_m, scale.coeff_w * powers.write};
    const DriveTone read{-params.omega_m, scale.coeff_r * powers.read};
    const double n = occupation.n_bar[i];
    out.gamma_s[i] = scattering_rates(params, write).a_plus * (n + 1.0);
    out.gamma_as[i] = scattering_rates(params, read).a_minus * n;
  }
  return out;
}

RateTraces convolve_rate_traces(const FilterCascade& cascade, const RateTraces& traces,
                                ConvolutionReport* report) {
  RateTraces out;
  out.dt_us = traces.dt_us;
  out.times_us = traces.times_us;
  out.gamma_s = convolve_with_response(cascade, traces.gamma_s, traces.dt_us, report);
  out.gamma_as = convolve_with_response(cascade, traces.gamma_as, traces.dt_us);
  return out;
}

namespace {

struct FitModel {
  const SystemParams& params;
  const PulseSchedule& schedule;
  const FitOptions& opts;
  const std::vector<double>& times_us;

  std::vector<double> operator()(const PowerScale& scale) const {
    const OccupationTrace occ =
        evolve_occupation(params, schedule, scale, {opts.dt_us, std::nullopt});
    const RateTraces raw = photon_rate_traces(occ, params, schedule, scale);
    const RateTraces conv = convolve_rate_traces(opts.cascade, raw);
    std::vector<double> model(times_us.size());
    for (std::size_t i = 0; i < times_us.size(); ++i) {
      const auto idx = static_cast<std::size_t>(std::llround(times_us[i] / opts.dt_us));
      if (idx >= conv.times_us.size() ||
          std::abs(conv.times_us[idx] - times_us[i]) > 1e-6) {
        throw FitError("fit_power_scale: observed grid does not align with the model grid");
      }
      model[i] = conv.gamma_s[idx] + conv.gamma_as[idx];
    }
    return model;
  }
};

double residual_norm_sq(const std::vector<double>& model, const std::vector<double>& obs) {
  double s = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const double d = model[i] - obs[i];
    s += d * d;
  }
  return s;
}

// Largest coefficient that keeps the integrator guard satisfied, per drive.
double guard_bound(const SystemParams& params, double detuning, double dt_us) {
  const ScatteringRates unit = scattering_rates(params, {detuning, 1.0});
  const double budget =
      0.09 / units::us(dt_us) - params.gamma_m * (2.0 * params.n_th + 1.0);
  return budget / (unit.a_plus + unit.a_minus);
}

}  // namespace

FitReport fit_power_scale(const std::vector<double>& times_us,
                          const std::vector<double>& observed_total_hz,
                          const SystemParams& params, const PulseSchedule& schedule,
                          const FitOptions& opts) {
  if (times_us.size() != observed_total_hz.size() || times_us.size() < 4) {
    throw FitError("fit_power_scale: need matching time/rate arrays with >= 4 samples");
  }
  const double total = std::accumulate(observed_total_hz.begin(), observed_total_hz.end(), 0.0);
  if (!(total > 0.0)) {
    throw FitError("fit_power_scale: observed rates are all zero, nothing to fit");
  }
  const double cw_max = guard_bound(params, params.omega_m, opts.dt_us);
  const double cr_max = guard_bound(params, -params.omega_m, opts.dt_us);

  const FitModel model{params, schedule, opts, times_us};

  PowerScale theta = opts.initial;
  if (theta.coeff_w <= 0.0 && theta.coeff_r <= 0.0) {
    // Starting point: bisect coeff_r on the mean rate over the tail of the
    // first read-only stage (where the trace has settled and coeff_w is
    // irrelevant), then scale coeff_w from the residual counts in the
    // write stage.
    const PulseStage* cool = nullptr;
    for (const auto& st : schedule.stages) {
      if (st.read_power > 0.0 && st.write_power == 0.0) {
        cool = &st;
        break;
      }
    }
    const PulseStage* write = schedule.write_stage();
    if (!cool) throw FitError("fit_power_scale: schedule has no read-only stage to anchor coeff_r");
    auto mean_obs = [&](double lo, double hi) {
      double s = 0.0;
      long n = 0;
      for (std::size_t i = 0; i < times_us.size(); ++i) {
        if (times_us[i] >= lo && times_us[i] < hi) {
          s += observed_total_hz[i];
          ++n;
        }
      }
      return n ? s / n : 0.0;
    };
    const double lo = cool->start_us + 0.8 * (cool->end_us - cool->start_us);
    const double target = mean_obs(lo, cool->end_us);
    auto settled_rate = [&](double cr) {
      const ScatteringRates r =
          scattering_rates(params, {-params.omega_m, cr * cool->read_power});
      // Anti-Stokes flux in the cooled steady state.
      return r.a_minus * steady_state_occupation(r, params);
    };
    double lg_lo = -6.0, lg_hi = std::log10(cr_max * 0.9);
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lg_lo + lg_hi);
      (settled_rate(std::pow(10.0, mid)) < target ? lg_lo : lg_hi) = mid;
    }
    theta.coeff_r = std::pow(10.0, 0.5 * (lg_lo + lg_hi));
    theta.coeff_w = 0.0;
    if (write) {
      const double obs_w =
          mean_obs(write->start_us, write->end_us + units::s_to_us(2.0 * opts.cascade.mean_delay_s()));
      const ScatteringRates unit =
          scattering_rates(params, {params.omega_m, write->write_power});
      if (unit.a_plus > 0.0 && obs_w > 0.0) {
        theta.coeff_w = std::min(obs_w / unit.a_plus, cw_max * 0.9);
      }
    }
  }
  theta.coeff_w = std::clamp(theta.coeff_w, 0.0, cw_max * 0.99);
  theta.coeff_r = std::clamp(theta.coeff_r, 0.0, cr_max * 0.99);

  std::vector<double> m = model(theta);
  double rn = residual_norm_sq(m, observed_total_hz);
  double lambda = 0.0;
  bool converged = false;
  int iter = 0;
  for (; iter < opts.max_iterations && !converged; ++iter) {
    // Forward-difference Jacobian in the two coefficients.
    const double hw = std::max(1e-6 * std::abs(theta.coeff_w), 1e-9 * cw_max);
    const double hr = std::max(1e-6 * std::abs(theta.coeff_r), 1e-9 * cr_max);
    const std::vector<double> mw =
        model({std::min(theta.coeff_w + hw, cw_max), theta.coeff_r});
    const std::vector<double> mr =
        model({theta.coeff_w, std::min(theta.coeff_r + hr, cr_max)});
    double jtj00 = 0, jtj01 = 0, jtj11 = 0, jtr0 = 0, jtr1 = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double j0 = (mw[i] - m[i]) / hw;
      const double j1 = (mr[i] - m[i]) / hr;
      const double r = m[i] - observed_total_hz[i];
      jtj00 += j0 * j0;
      jtj01 += j0 * j1;
      jtj11 += j1 * j1;
      jtr0 += j0 * r;
      jtr1 += j1 * r;
    }
    bool improved = false;
    for (int attempt = 0; attempt < 16 && !improved; ++attempt) {
      const double a = jtj00 * (1.0 + lambda);
      const double d = jtj11 * (1.0 + lambda);
      const double det = a * d - jtj01 * jtj01;
      if (det == 0.0 || !std::isfinite(det)) {
        throw FitError("fit_power_scale: singular normal equations (degenerate data?)");
      }
      const double dw = -(d * jtr0 - jtj01 * jtr1) / det;
      const double dr = -(a * jtr1 - jtj01 * jtr0) / det;
      PowerScale trial{std::clamp(theta.coeff_w + dw, 0.0, cw_max * 0.99),
                       std::clamp(theta.coeff_r + dr, 0.0, cr_max * 0.99)};
      const std::vector<double> mt = model(trial);
      const double rt = residual_norm_sq(mt, observed_total_hz);
      if (rt <= rn) {
        const double rel_change = (rn - rt) / std::max(rn, 1e-300);
        const double step = std::hypot(dw / std::max(theta.coeff_w, 1.0),
                                       dr / std::max(theta.coeff_r, 1.0));
        theta = trial;
        m = mt;
        rn = rt;
        lambda = lambda > 0.0 ? lambda * 0.1 : 0.0;
        improved = true;
        if (rel_change < opts.rel_tol || step < opts.rel_tol) converged = true;
      } else {
        lambda = lambda > 0.0 ? lambda * 10.0 : 1e-4;
      }
    }
    if (!improved) {
      converged = true;  // damping exhausted at a local minimum
    }
  }
  if (!converged) {
    throw FitError("fit_power_scale: no convergence after " +
                   std::to_string(opts.max_iterations) +
                   " iterations, residual norm " + std::to_string(std::sqrt(rn)));
  }

  FitReport report;
  report.scale = theta;
  report.residual_norm = std::sqrt(rn);
  report.iterations = iter;
  report.converged = converged;
  for (const auto& st : schedule.stages) {
    StageComparison cmp;
    cmp.start_us = st.start_us;
    cmp.end_us = st.end_us;
    double so = 0, sm = 0;
    long n = 0;
    for (std::size_t i = 0; i < times_us.size(); ++i) {
      if (times_us[i] >= st.start_us && times_us[i] < st.end_us) {
        so += observed_total_hz[i];
        sm += m[i];
        ++n;
      }
    }
    if (n) {
      cmp.observed_mean_hz = so / n;
      cmp.model_mean_hz = sm / n;
    }
    report.stages.push_back(cmp);
  }
  return report;
}

}  // namespace herald
