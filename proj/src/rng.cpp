#include "phonon_herald/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace herald {
namespace {

// Exact inversion for integer distributions with a log-pmf available in
// stable form: walk outward from the mode, alternating sides, until the
// accumulated mass exceeds u. Cost is O(sigma) rather than O(mean), and
// there is no small-probability underflow because the walk starts at the
// largest pmf value.
template <typename LogPmf>
std::int64_t inversion_from_mode(double u, std::int64_t mode, std::int64_t lo,
                                 std::int64_t hi, LogPmf&& log_pmf) {
  double cum = std::exp(log_pmf(mode));
  if (u < cum) return mode;
  std::int64_t down = mode - 1;
  std::int64_t up = mode + 1;
  while (down >= lo || up <= hi) {
    if (up <= hi) {
      cum += std::exp(log_pmf(up));
      if (u < cum) return up;
      ++up;
    }
    if (down >= lo) {
      cum += std::exp(log_pmf(down));
      if (u < cum) return down;
      --down;
    }
  }
  return hi;  // u in the rounding tail; clamp
}

}  // namespace

double RngStream::exponential(double rate) {
  if (!(rate > 0.0)) {
    throw std::invalid_argument("exponential: rate must be positive");
  }
  return -std::log1p(-uniform()) / rate;
}

double RngStream::truncated_exponential(double rate, double span) {
  if (!(span > 0.0)) {
    throw std::invalid_argument("truncated_exponential: span must be positive");
  }
  const double x = rate * span;
  if (!(rate > 0.0) || x < 1e-12) return uniform(0.0, span);
  // Inverse CDF of the exponential conditioned on [0, span).
  const double u = uniform();
  return -std::log1p(-u * (-std::expm1(-x))) / rate;
}

double RngStream::erlang(int k, double rate) {
  double sum = 0.0;
  for (int i = 0; i < k; ++i) sum += exponential(rate);
  return sum;
}

std::int64_t RngStream::bose_einstein(double mean) {
  if (mean < 0.0) {
    throw std::invalid_argument("bose_einstein: mean must be >= 0");
  }
  if (mean == 0.0) return 0;
  // P(m) = s^m (1-s), s = mean/(1+mean); closed-form inverse CDF.
  const double log_s = std::log(mean / (1.0 + mean));
  const double u = uniform();
  const double m = std::floor(std::log1p(-u) / log_s);
  return m < 0.0 ? 0 : static_cast<std::int64_t>(m);
}

std::int64_t RngStream::binomial(std::int64_t n, double p) {
  if (n < 0 || p < 0.0 || p > 1.0) {
    throw std::invalid_argument("binomial: need n >= 0 and p in [0,1]");
  }
  if (n == 0 || p == 0.0) return 0;
  if (p == 1.0) return n;
  if (n <= 64) {
    std::int64_t k = 0;
    for (std::int64_t i = 0; i < n; ++i) k += bernoulli(p) ? 1 : 0;
    return k;
  }
  const double log_p = std::log(p);
  const double log_q = std::log1p(-p);
  const double log_nf = std::lgamma(static_cast<double>(n) + 1.0);
  auto log_pmf = [&](std::int64_t k) {
    const double kd = static_cast<double>(k);
    return log_nf - std::lgamma(kd + 1.0) -
           std::lgamma(static_cast<double>(n - k) + 1.0) + kd * log_p +
           (static_cast<double>(n) - kd) * log_q;
  };
  const auto mode = static_cast<std::int64_t>(
      std::floor((static_cast<double>(n) + 1.0) * p));
  return inversion_from_mode(uniform(), std::min(mode, n), 0, n, log_pmf);
}

std::int64_t RngStream::poisson(double mean) {
  if (mean < 0.0) {
    throw std::invalid_argument("poisson: mean must be >= 0");
  }
  if (mean == 0.0) return 0;
  if (mean <= 30.0) return poisson_knuth(mean);
  const double log_mean = std::log(mean);
  auto log_pmf = [&](std::int64_t k) {
    const double kd = static_cast<double>(k);
    return kd * log_mean - mean - std::lgamma(kd + 1.0);
  };
  const auto mode = static_cast<std::int64_t>(std::floor(mean));
  const auto hi = static_cast<std::int64_t>(mean + 40.0 * std::sqrt(mean)) + 64;
  return inversion_from_mode(uniform(), mode, 0, hi, log_pmf);
}

std::int64_t RngStream::poisson_knuth(double mean) {
  const double limit = std::exp(-mean);
  double prod = uniform();
  std::int64_t k = 0;
  while (prod > limit) {
    prod *= uniform();
    ++k;
  }
  return k;
}

}  // namespace herald
