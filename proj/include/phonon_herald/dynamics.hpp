#pragma once

#include <optional>
#include <string>
#include <vector>

#include "phonon_herald/filter.hpp"
#include "phonon_herald/physics.hpp"
#include "phonon_herald/schedule.hpp"

namespace herald {

/// Conversion from schedule power units to intracavity photon number for
/// the write and read drives. Left free by the rate model and fitted to
/// observed rates; fixing them fixes g = g0 * sqrt(n_cav).
struct PowerScale {
  double coeff_w = 0.0;
  double coeff_r = 0.0;
};

/// Mean phonon occupation on a uniform grid.
struct OccupationTrace {
  std::vector<double> times_us;
  std::vector<double> n_bar;
  double dt_us = 0.0;
  int clamp_warnings = 0;  ///< steps that undershot below -1e-12 and were clamped
};

/// Stokes / anti-Stokes photon rates (1/s) on a uniform grid.
struct RateTraces {
  std::vector<double> times_us;
  std::vector<double> gamma_s;
  std::vector<double> gamma_as;
  double dt_us = 0.0;
};

class StepTooLargeError : public std::runtime_error {
 public:
  StepTooLargeError(const std::string& msg, double suggested_dt_us)
      : std::runtime_error(msg), suggested_dt_us(suggested_dt_us) {}
  double suggested_dt_us;
};

struct EvolveOptions {
  double dt_us = 0.1;
  /// Override for n_bar(0); by default the steady state under the idle
  /// read drive.
  std::optional<double> initial_occupation;
};

/// Summed Stokes/anti-Stokes rates from both drives at time t.
/// The write drive sits at Delta = +Omega_m, the read drive at -Omega_m,
/// and the two are treated as independent.
ScatteringRates drive_rates_at(const SystemParams& params, const PulseSchedule& schedule,
                               const PowerScale& scale, double t_us);

/// Integrates d n_bar/dt = (n_bar+1)(A+ + n_th Gamma_m)
///                        - n_bar (A- + (n_th+1) Gamma_m)
/// with classical fixed-step RK4 over the full shot. Stage switching is
/// instantaneous; convergence order requires stage edges on the grid.
/// Throws StepTooLargeError when dt * (A+ + A- + Gamma_m (2 n_th + 1))
/// reaches 0.1 at peak drive.
OccupationTrace evolve_occupation(const SystemParams& params, const PulseSchedule& schedule,
                                  const PowerScale& scale, const EvolveOptions& opts = {});

/// Gamma_S(t) = A+^write(t) (n_bar+1) and Gamma_AS(t) = A-^read(t) n_bar:
/// only the filter-passed sidebands (Stokes from the write drive,
/// anti-Stokes from the read drive) are emitted.
RateTraces photon_rate_traces(const OccupationTrace& occupation, const SystemParams& params,
                              const PulseSchedule& schedule, const PowerScale& scale);

/// Both rate components passed through the filter cascade.
RateTraces convolve_rate_traces(const FilterCascade& cascade, const RateTraces& traces,
                                ConvolutionReport* report = nullptr);

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FitOptions {
  int max_iterations = 200;
  double rel_tol = 1e-8;
  double dt_us = 0.1;
  FilterCascade cascade = FilterCascade::preset();
  PowerScale initial;  ///< zero means "derive a starting point from the data"
};

struct StageComparison {
  double start_us = 0.0;
  double end_us = 0.0;
  double observed_mean_hz = 0.0;
  double model_mean_hz = 0.0;
};

struct FitReport {
  PowerScale scale;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<StageComparison> stages;
};

/// Least-squares fit of (coeff_w, coeff_r) so that the filter-convolved
/// total rate Gamma_S + Gamma_AS matches the observed trace. Observed
/// samples must sit on a uniform grid covering the schedule.
/// Gauss-Newton with a numerical Jacobian and Levenberg damping fallback.
FitReport fit_power_scale(const std::vector<double>& times_us,
                          const std::vector<double>& observed_total_hz,
                          const SystemParams& params, const PulseSchedule& schedule,
                          const FitOptions& opts = {});

}  // namespace herald
