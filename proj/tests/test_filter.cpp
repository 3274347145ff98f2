#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "phonon_herald/constants.hpp"
#include "phonon_herald/filter.hpp"

using namespace herald;

namespace {
FilterCascade cascade() { return FilterCascade::preset(); }
}  // namespace

TEST_CASE("impulse response matches the four-stage closed form") {
  const FilterCascade c = cascade();
  for (const double t_us : {0.5, 3.0, 10.0, 21.2, 60.0}) {
    const double t = units::us(t_us);
    const double kf = c.kappa_f;
    const double closed =
        std::exp(-kf * t) * kf * kf * kf * kf * t * t * t / 6.0;
    CHECK(impulse_response(c, t) == doctest::Approx(closed).epsilon(1e-12));
  }
  CHECK(impulse_response(c, -1e-9) == 0.0);
  CHECK(impulse_response(c, 0.0) == 0.0);
}

TEST_CASE("impulse response normalizes to one") {
  const FilterCascade c = cascade();
  const double integral = oracles::simpson(
      [&](double t) { return impulse_response(c, t); }, 0.0, 40.0 / c.kappa_f, 40000);
  CHECK(std::abs(integral - 1.0) < 1e-6);
  // Series CDF agrees with the density integral.
  CHECK(impulse_response_cdf(c, 40.0 / c.kappa_f) == doctest::Approx(integral).epsilon(1e-9));
}

TEST_CASE("impulse response peaks at (N-1)/kappa_f") {
  const FilterCascade c = cascade();
  const double dt = units::us(0.05);
  double best_t = 0.0, best_v = -1.0;
  for (double t = 0.0; t < 40.0 / c.kappa_f; t += dt) {
    const double v = impulse_response(c, t);
    if (v > best_v) {
      best_v = v;
      best_t = t;
    }
  }
  CHECK(std::abs(best_t - 3.0 / c.kappa_f) <= dt);
  CHECK(c.peak_delay_s() == doctest::Approx(3.0 / c.kappa_f));
}

TEST_CASE("general stage count: N-fold self-convolution of one pole") {
  const FilterCascade one{cascade().kappa_f, 1, 1.0};
  const FilterCascade three{cascade().kappa_f, 3, 1.0};
  const FilterCascade four{cascade().kappa_f, 4, 1.0};
  CHECK(impulse_response(one, 0.0) == doctest::Approx(one.kappa_f));
  // xi_4 = xi_3 (*) xi_1 by direct quadrature at a few points.
  for (const double t_us : {5.0, 15.9, 30.0}) {
    const double t = units::us(t_us);
    const double conv = oracles::simpson(
        [&](double s) { return impulse_response(three, s) * impulse_response(one, t - s); },
        0.0, t, 4000);
    CHECK(impulse_response(four, t) == doctest::Approx(conv).epsilon(1e-6));
  }
}

TEST_CASE("convolution preserves a constant trace and total counts") {
  const FilterCascade c = cascade();
  const double dt_us = 0.5;
  const std::size_t n = 4000;

  std::vector<double> constant(n, 123.0);
  ConvolutionReport report;
  const std::vector<double> out = convolve_with_response(c, constant, dt_us, &report);
  CHECK(report.tail_mass < 1e-6);
  // After the ~10/kappa_f transient the output sits at the input level.
  const auto settle = static_cast<std::size_t>(units::s_to_us(12.0 / c.kappa_f) / dt_us);
  for (std::size_t i = settle; i < n; ++i) {
    CHECK(out[i] == doctest::Approx(123.0).epsilon(1e-4));
  }

  // Unit spike: total counts preserved and the peak sits at the response
  // peak.
  std::vector<double> spike(n, 0.0);
  spike[100] = 1.0 / units::us(dt_us);  // one count as a density
  const std::vector<double> spread = convolve_with_response(c, spike, dt_us);
  double total = 0.0;
  for (const double v : spread) total += v * units::us(dt_us);
  CHECK(std::abs(total - 1.0) < 1e-4);
  std::size_t peak_at = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (spread[i] > spread[peak_at]) peak_at = i;
  }
  const double peak_delay_us = (peak_at - 100) * dt_us;
  CHECK(std::abs(units::us(peak_delay_us) - 3.0 / c.kappa_f) <= 1.5 * units::us(dt_us));
}

TEST_CASE("square pulse: steepest rise lags the edge by the response peak") {
  const FilterCascade c = cascade();
  const double dt_us = 0.2;
  const std::size_t n = 3000;
  std::vector<double> pulse(n, 0.0);
  const std::size_t on = 500;
  for (std::size_t i = on; i < n; ++i) pulse[i] = 1.0;  // step edge at `on`
  const std::vector<double> out = convolve_with_response(c, pulse, dt_us);
  std::size_t steepest = 1;
  double best = -1.0;
  for (std::size_t i = 1; i < n; ++i) {
    const double d = out[i] - out[i - 1];
    if (d > best) {
      best = d;
      steepest = i;
    }
  }
  const double lag_s = units::us((steepest - on) * dt_us);
  CHECK(std::abs(lag_s - 3.0 / c.kappa_f) <= 2.0 * units::us(dt_us));
  CHECK(units::s_to_us(3.0 / c.kappa_f) == doctest::Approx(15.9).epsilon(0.01));
}

TEST_CASE("too coarse a grid is rejected") {
  const FilterCascade c = cascade();
  std::vector<double> values(100, 1.0);
  CHECK_THROWS_AS(convolve_with_response(c, values, 2.0), std::invalid_argument);
}

TEST_CASE("frequency suppression: half-power point, additivity, monotonicity") {
  const FilterCascade c = cascade();
  CHECK(frequency_suppression_db(c, 0.0) == 0.0);

  const double pole = c.kappa_f;  // pole-rate convention
  const double per_stage =
      frequency_suppression_db(c, pole, SuppressionConvention::pole_rate) / c.n_stages;
  CHECK(per_stage == doctest::Approx(10.0 * std::log10(2.0)).epsilon(1e-12));

  FilterCascade one = c;
  one.n_stages = 1;
  for (const double f_mhz : {0.1, 0.5, 1.4}) {
    const double offset = units::mhz(f_mhz);
    CHECK(frequency_suppression_db(c, offset) ==
          doctest::Approx(4.0 * frequency_suppression_db(one, offset)).epsilon(1e-12));
  }
  double prev = -1.0;
  for (double f = 0.0; f <= 2.0e6; f += 5.0e4) {
    const double s = frequency_suppression_db(c, units::hz(f));
    CHECK(s > prev);
    prev = s;
  }
}

TEST_CASE("pump rejection at the mechanical sideband exceeds 155 dB") {
  const FilterCascade c = cascade();
  const double db = frequency_suppression_db(c, units::mhz(1.4), SuppressionConvention::fwhm);
  CHECK(db >= 155.0);
  // 4 * 10*log10(1 + (2*1.4e6/3e4)^2)
  CHECK(db == doctest::Approx(157.7).epsilon(0.001));
  // The pole-rate reading of the same linewidth gives ~12 dB less.
  const double db_pole =
      frequency_suppression_db(c, units::mhz(1.4), SuppressionConvention::pole_rate);
  CHECK(db_pole < db);
  CHECK(db - db_pole == doctest::Approx(40.0 * std::log10(2.0)).epsilon(0.01));
}

TEST_CASE("delay sampler matches the Erlang moments and stays causal") {
  const FilterCascade c = cascade();
  RngStream rng(20250810);
  const int n = 1000000;
  double sum = 0.0, sum2 = 0.0;
  double min_v = 1.0;
  for (int i = 0; i < n; ++i) {
    const double d = sample_delay(c, rng);
    min_v = std::min(min_v, d);
    sum += d;
    sum2 += d * d;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(min_v >= 0.0);
  CHECK(mean == doctest::Approx(4.0 / c.kappa_f).epsilon(0.005));
  CHECK(var == doctest::Approx(4.0 / (c.kappa_f * c.kappa_f)).epsilon(0.02));
}

TEST_CASE("delay sample histogram tracks the impulse response within 3 sigma") {
  const FilterCascade c = cascade();
  RngStream rng(99);
  const int n = 1000000;
  const int bins = 100;
  const double hi = 15.0 / c.kappa_f;  // covers all but ~1e-4 of the mass
  std::vector<long> hist(bins, 0);
  long beyond = 0;
  for (int i = 0; i < n; ++i) {
    const double d = sample_delay(c, rng);
    const auto b = static_cast<long>(d / hi * bins);
    if (b < bins) {
      ++hist[b];
    } else {
      ++beyond;
    }
  }
  int outliers = 0;
  for (int b = 0; b < bins; ++b) {
    const double p = oracles::erlang_cdf(4, c.kappa_f, (b + 1) * hi / bins) -
                     oracles::erlang_cdf(4, c.kappa_f, b * hi / bins);
    const double expected = n * p;
    const double sigma = std::sqrt(expected);
    if (std::abs(hist[b] - expected) > 3.0 * sigma) ++outliers;
  }
  CHECK(outliers == 0);
  CHECK(beyond < n * 2e-4 * 1.5);
}

TEST_CASE("cascade validation") {
  FilterCascade c = cascade();
  CHECK_NOTHROW(c.validate());
  c.n_stages = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = cascade();
  c.transmission = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = cascade();
  c.kappa_f = -1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}
