#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "phonon_herald/constants.hpp"
#include "phonon_herald/dynamics.hpp"
#include "phonon_herald/rng.hpp"

using namespace herald;

namespace {

PulseSchedule constant_schedule(double shot_length_us, double write_power, double read_power) {
  PulseSchedule s;
  s.shot_length_us = shot_length_us;
  s.idle_read_fraction = 0.0;
  s.stages = {{0.0, shot_length_us, write_power, read_power}};
  return s;
}

PulseSchedule empty_schedule(double shot_length_us) {
  PulseSchedule s;
  s.shot_length_us = shot_length_us;
  s.idle_read_fraction = 0.0;
  return s;
}

// Slow relaxation parameters keep the guard happy at coarse steps.
SystemParams relaxation_params() {
  SystemParams p = SystemParams::preset();
  p.gamma_m = 2.0e3;
  p.n_th = 0.5;
  return p;
}

}  // namespace

TEST_CASE("constant drives converge to the closed-form steady state") {
  RngStream rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    SystemParams p = SystemParams::preset();
    p.n_th = rng.uniform(10.0, 1e5);
    p.gamma_m = rng.uniform(0.01, 10.0);
    const double read_n = rng.uniform(1e4, 3e5);
    const double write_n = read_n * rng.uniform(0.0, 0.2);  // keeps A- dominant
    const PowerScale scale{write_n, read_n};

    const ScatteringRates total = scattering_rates(p, {p.omega_m, write_n}) +
                                  scattering_rates(p, {-p.omega_m, read_n});
    const double expected = steady_state_occupation(total, p);

    const double relax = total.a_minus - total.a_plus + p.gamma_m;
    const double horizon_us = std::ceil(units::s_to_us(25.0 / relax) / 10.0) * 10.0;
    const OccupationTrace trace =
        evolve_occupation(p, constant_schedule(horizon_us, 1.0, 1.0), scale, {0.1});
    CHECK(trace.n_bar.back() == doctest::Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("free relaxation follows the analytic exponential within 1e-4") {
  const SystemParams p = relaxation_params();
  const double n0 = 50.0;
  EvolveOptions opts;
  opts.dt_us = 0.1;
  opts.initial_occupation = n0;
  const OccupationTrace trace =
      evolve_occupation(p, empty_schedule(2500.0), {}, opts);  // gamma_m * T = 5
  double worst = 0.0;
  for (std::size_t i = 0; i < trace.times_us.size(); ++i) {
    const double exact =
        oracles::free_relaxation(n0, p.n_th, p.gamma_m, units::us(trace.times_us[i]));
    worst = std::max(worst, std::abs(trace.n_bar[i] - exact) / exact);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("step halving shows fourth-order convergence") {
  const SystemParams p = relaxation_params();
  const double n0 = 50.0;
  auto max_error = [&](double dt_us) {
    EvolveOptions opts;
    opts.dt_us = dt_us;
    opts.initial_occupation = n0;
    const OccupationTrace trace = evolve_occupation(p, empty_schedule(2500.0), {}, opts);
    double worst = 0.0;
    for (std::size_t i = 0; i < trace.times_us.size(); ++i) {
      const double exact =
          oracles::free_relaxation(n0, p.n_th, p.gamma_m, units::us(trace.times_us[i]));
      worst = std::max(worst, std::abs(trace.n_bar[i] - exact));
    }
    return worst;
  };
  const double coarse = max_error(12.5);
  const double fine = max_error(6.25);
  CHECK(coarse > 1e-12);  // comfortably above rounding noise
  const double order = std::log2(coarse / fine);
  CHECK(order >= 3.8);
  CHECK(coarse / fine >= 8.0);
}

TEST_CASE("canonical schedule: pre-cooled start near 20, cooled floor at or below 0.25") {
  const SystemParams p = SystemParams::preset();
  const PulseSchedule schedule = PulseSchedule::preset();
  // Canonical drive scale: C_q = 10 cooling, A+ T_w = 0.1 write pairs.
  const double per_photon = 4.0 * p.g0 * p.g0 / p.kappa;
  const PowerScale scale{(0.1 / units::us(100.0)) / per_photon,
                         10.0 * p.gamma_th() / per_photon};

  const OccupationTrace trace = evolve_occupation(p, schedule, scale, {0.1});
  CHECK(trace.n_bar.front() > 15.0);
  CHECK(trace.n_bar.front() < 25.0);

  const auto cool_end = static_cast<std::size_t>(650.0 / 0.1);
  const double cooled = trace.n_bar[cool_end];
  CHECK(cooled <= 0.25);

  const ScatteringRates r = scattering_rates(p, {-p.omega_m, scale.coeff_r});
  const double backaction = r.a_plus / (r.a_minus - r.a_plus);
  const double gamma_opt = optically_broadened_rate(p, scale.coeff_r);
  CHECK(cooled >= 0.5 * (backaction + p.gamma_th() / gamma_opt));

  CHECK(trace.clamp_warnings == 0);
  for (const double n : trace.n_bar) CHECK(n >= 0.0);
}

TEST_CASE("guard rejects oversized steps and suggests a usable one") {
  const SystemParams p = SystemParams::preset();
  const PowerScale scale{0.0, 3.0e5};
  try {
    evolve_occupation(p, constant_schedule(1000.0, 0.0, 1.0), scale, {5.0});
    FAIL("expected StepTooLargeError");
  } catch (const StepTooLargeError& e) {
    CHECK(e.suggested_dt_us > 0.0);
    CHECK(e.suggested_dt_us < 5.0);
    CHECK_NOTHROW(evolve_occupation(p, constant_schedule(1000.0, 0.0, 1.0), scale,
                                    {std::floor(e.suggested_dt_us * 1e4) / 1e4}));
  }
}

TEST_CASE("occupation stays non-negative from any admissible start") {
  RngStream rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    SystemParams p = SystemParams::preset();
    p.n_th = rng.uniform(0.0, 10.0);
    p.gamma_m = rng.uniform(1.0, 100.0);
    EvolveOptions opts;
    opts.dt_us = 0.1;
    opts.initial_occupation = rng.uniform(0.0, 100.0);
    const PowerScale scale{0.0, rng.uniform(0.0, 3e5)};
    const OccupationTrace trace =
        evolve_occupation(p, constant_schedule(200.0, 0.0, 1.0), scale, opts);
    for (const double n : trace.n_bar) REQUIRE(n >= 0.0);
  }
}

TEST_CASE("long zero-drive trace averages to the bath occupation") {
  SystemParams p = relaxation_params();
  EvolveOptions opts;
  opts.dt_us = 1.0;
  opts.initial_occupation = p.n_th;  // start in equilibrium
  const OccupationTrace trace = evolve_occupation(p, empty_schedule(10000.0), {}, opts);
  double avg = 0.0;
  for (const double n : trace.n_bar) avg += n;
  avg /= static_cast<double>(trace.n_bar.size());
  CHECK(avg == doctest::Approx(p.n_th).epsilon(1e-9));
}

TEST_CASE("photon rates: spontaneous floor, zero drive, resonant factor") {
  const SystemParams p = SystemParams::preset();
  const PulseSchedule schedule = PulseSchedule::preset();
  const PowerScale scale{3000.0, 3.0e5};
  const double dt = 0.1;

  // Zero occupation: anti-Stokes vanishes, Stokes keeps the +1 floor.
  OccupationTrace zero;
  zero.dt_us = dt;
  const auto n_pts = static_cast<std::size_t>(schedule.shot_length_us / dt) + 1;
  zero.times_us.resize(n_pts);
  zero.n_bar.assign(n_pts, 0.0);
  for (std::size_t i = 0; i < n_pts; ++i) zero.times_us[i] = i * dt;

  const RateTraces rates = photon_rate_traces(zero, p, schedule, scale);
  const double a_plus_write = scattering_rates(p, {p.omega_m, scale.coeff_w}).a_plus;
  bool saw_write = false;
  for (std::size_t i = 0; i < n_pts; ++i) {
    CHECK(rates.gamma_as[i] == 0.0);
    const auto powers = schedule.powers_at(zero.times_us[i]);
    if (powers.write > 0.0) {
      saw_write = true;
      // Lorentzian factor at Delta = +Omega_m is exactly 4/kappa.
      CHECK(rates.gamma_s[i] == doctest::Approx(a_plus_write).epsilon(1e-12));
    } else {
      CHECK(rates.gamma_s[i] == 0.0);
    }
  }
  CHECK(saw_write);

  // Write power off: Stokes identically zero.
  const RateTraces no_write =
      photon_rate_traces(zero, p, schedule, PowerScale{0.0, 3.0e5});
  for (const double v : no_write.gamma_s) CHECK(v == 0.0);

  // Mismatched grid rejected.
  OccupationTrace truncated = zero;
  truncated.times_us.resize(100);
  truncated.n_bar.resize(100);
  CHECK_THROWS_AS(photon_rate_traces(truncated, p, schedule, scale), std::invalid_argument);
}

TEST_CASE("anti-Stokes rate is linear and Stokes affine in the occupation") {
  const SystemParams p = SystemParams::preset();
  const PulseSchedule schedule = constant_schedule(100.0, 1.0, 1.0);
  const PowerScale scale{2000.0, 1e5};
  const double dt = 0.1;
  const auto n_pts = static_cast<std::size_t>(schedule.shot_length_us / dt) + 1;

  auto flat = [&](double level) {
    OccupationTrace t;
    t.dt_us = dt;
    t.times_us.resize(n_pts);
    t.n_bar.assign(n_pts, level);
    for (std::size_t i = 0; i < n_pts; ++i) t.times_us[i] = i * dt;
    return t;
  };
  const RateTraces r1 = photon_rate_traces(flat(1.0), p, schedule, scale);
  const RateTraces r2 = photon_rate_traces(flat(2.0), p, schedule, scale);
  const RateTraces r0 = photon_rate_traces(flat(0.0), p, schedule, scale);
  CHECK(r2.gamma_as[10] == doctest::Approx(2.0 * r1.gamma_as[10]).epsilon(1e-12));
  CHECK(r2.gamma_s[10] - r0.gamma_s[10] ==
        doctest::Approx(2.0 * (r1.gamma_s[10] - r0.gamma_s[10])).epsilon(1e-9));
}

TEST_CASE("power-scale fit recovers known coefficients from noiseless data") {
  const SystemParams p = SystemParams::preset();
  const PulseSchedule schedule = PulseSchedule::preset();
  const double per_photon = 4.0 * p.g0 * p.g0 / p.kappa;
  const PowerScale truth{(0.1 / units::us(100.0)) / per_photon,
                         10.0 * p.gamma_th() / per_photon};

  const OccupationTrace occ = evolve_occupation(p, schedule, truth, {0.1});
  const RateTraces conv = convolve_rate_traces(
      FilterCascade::preset(), photon_rate_traces(occ, p, schedule, truth));

  std::vector<double> times, totals;
  for (std::size_t i = 0; i < conv.times_us.size(); i += 10) {  // 1 us bins
    times.push_back(conv.times_us[i]);
    totals.push_back(conv.gamma_s[i] + conv.gamma_as[i]);
  }
  const FitReport report = fit_power_scale(times, totals, p, schedule, {});
  CHECK(report.converged);
  CHECK(report.scale.coeff_w == doctest::Approx(truth.coeff_w).epsilon(0.01));
  CHECK(report.scale.coeff_r == doctest::Approx(truth.coeff_r).epsilon(0.01));
  CHECK(report.stages.size() == schedule.stages.size());
}

TEST_CASE("power-scale fit tolerates Poisson noise at 1e4 peak counts per bin") {
  const SystemParams p = SystemParams::preset();
  const PulseSchedule schedule = PulseSchedule::preset();
  const double per_photon = 4.0 * p.g0 * p.g0 / p.kappa;
  const PowerScale truth{(0.1 / units::us(100.0)) / per_photon,
                         10.0 * p.gamma_th() / per_photon};

  const OccupationTrace occ = evolve_occupation(p, schedule, truth, {0.1});
  const RateTraces conv = convolve_rate_traces(
      FilterCascade::preset(), photon_rate_traces(occ, p, schedule, truth));

  // Scale chosen so the peak bin expectation exceeds 1e4 counts.
  double peak = 0.0;
  for (std::size_t i = 0; i < conv.times_us.size(); ++i) {
    peak = std::max(peak, conv.gamma_s[i] + conv.gamma_as[i]);
  }
  const double bin_s = units::us(1.0);
  const double exposure = 1.2e4 / (peak * bin_s);

  RngStream rng(31);
  std::vector<double> times, totals;
  for (std::size_t i = 0; i < conv.times_us.size(); i += 10) {
    const double rate = conv.gamma_s[i] + conv.gamma_as[i];
    const double counts = static_cast<double>(rng.poisson(rate * bin_s * exposure));
    times.push_back(conv.times_us[i]);
    totals.push_back(counts / (bin_s * exposure));
  }
  const FitReport report = fit_power_scale(times, totals, p, schedule, {});
  CHECK(report.converged);
  CHECK(report.scale.coeff_w == doctest::Approx(truth.coeff_w).epsilon(0.05));
  CHECK(report.scale.coeff_r == doctest::Approx(truth.coeff_r).epsilon(0.05));
}

TEST_CASE("degenerate fit input errors out") {
  const SystemParams p = SystemParams::preset();
  const PulseSchedule schedule = PulseSchedule::preset();
  std::vector<double> times, totals;
  for (int i = 0; i < 1000; ++i) {
    times.push_back(i * 1.0);
    totals.push_back(0.0);
  }
  CHECK_THROWS_AS(fit_power_scale(times, totals, p, schedule, {}), FitError);
}
