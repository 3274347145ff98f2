#include "phonon_herald/filter.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "phonon_herald/constants.hpp"

namespace herald {

void FilterCascade::validate() const {
  if (!(kappa_f > 0.0)) {
    throw std::invalid_argument("FilterCascade: kappa_f must be positive");
  }
  if (n_stages < 1) {
    throw std::invalid_argument("FilterCascade: n_stages must be >= 1");
  }
  if (!(transmission > 0.0) || transmission > 1.0) {
    throw std::invalid_argument("FilterCascade: transmission must be in (0, 1]");
  }
}

FilterCascade FilterCascade::preset() {
  FilterCascade c;
  c.kappa_f = units::khz(30.0);
  c.n_stages = 4;
  c.transmission = 0.30;
  return c;
}

double impulse_response(const FilterCascade& cascade, double t_s) {
  if (t_s < 0.0) return 0.0;
  const int n = cascade.n_stages;
  const double x = cascade.kappa_f * t_s;
  // kappa_f^n t^(n-1) e^(-kappa_f t) / (n-1)! evaluated in log space to
  // stay finite for large n*log(x).
  if (x == 0.0) return n == 1 ? cascade.kappa_f : 0.0;
  double log_fact = 0.0;
  for (int k = 2; k < n; ++k) log_fact += std::log(static_cast<double>(k));
  return cascade.kappa_f * std::exp((n - 1) * std::log(x) - x - log_fact);
}

double impulse_response_cdf(const FilterCascade& cascade, double t_s) {
  if (t_s <= 0.0) return 0.0;
  const double x = cascade.kappa_f * t_s;
  // 1 - e^{-x} sum_{k<n} x^k/k!
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < cascade.n_stages; ++k) {
    term *= x / k;
    sum += term;
  }
  return 1.0 - std::exp(-x) * sum;
}

std::vector<double> convolve_with_response(const FilterCascade& cascade,
                                           const std::vector<double>& values,
                                           double dt_us,
                                           ConvolutionReport* report) {
  cascade.validate();
  const double dt_s = units::us(dt_us);
  const double max_step = 0.2 / cascade.kappa_f;
  if (dt_s > max_step) {
    throw std::invalid_argument(
        "convolve_with_response: grid step " + std::to_string(dt_us) +
        " us too coarse; need <= " + std::to_string(units::s_to_us(max_step)) + " us");
  }
  // Kernel bins are exact CDF differences; extend until the remaining tail
  // mass is below 1e-6.
  std::vector<double> kernel;
  double covered = 0.0;
  for (std::size_t j = 0;; ++j) {
    const double hi = impulse_response_cdf(cascade, (j + 1) * dt_s);
    kernel.push_back(hi - covered);
    covered = hi;
    if (1.0 - covered < 1e-6) break;
    if (j > values.size() + static_cast<std::size_t>(200.0 / (cascade.kappa_f * dt_s)) + 4096) {
      break;  // kernel already far longer than the trace
    }
  }
  if (report) {
    report->kernel_mass = covered;
    report->tail_mass = 1.0 - covered;
  }
  std::vector<double> out(values.size(), 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t jmax = std::min(kernel.size() - 1, i);
    double acc = 0.0;
    for (std::size_t j = 0; j <= jmax; ++j) acc += kernel[j] * values[i - j];
    out[i] = acc;
  }
  return out;
}

double frequency_suppression_db(const FilterCascade& cascade, double offset_rad_s,
                                SuppressionConvention convention) {
  if (offset_rad_s < 0.0) {
    throw std::invalid_argument("frequency_suppression_db: offset must be >= 0");
  }
  const double pole = convention == SuppressionConvention::fwhm
                          ? cascade.kappa_f / 2.0
                          : cascade.kappa_f;
  const double r = offset_rad_s / pole;
  return cascade.n_stages * 10.0 * std::log10(1.0 + r * r);
}

double sample_delay(const FilterCascade& cascade, RngStream& rng) {
  return rng.erlang(cascade.n_stages, cascade.kappa_f);
}

}  // namespace herald
