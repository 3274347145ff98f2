#pragma once

#include <vector>

#include "phonon_herald/rng.hpp"

namespace herald {

/// Cascade of identical series filter cavities. The time-domain response of
/// N stages with per-stage rate kappa_f is the Erlang density
/// kappa_f^N t^(N-1) exp(-kappa_f t) / (N-1)!, which for N = 4 is
/// xi(t) = (1/6) exp(-kappa_f t) kappa_f^4 t^3 theta(t).
struct FilterCascade {
  double kappa_f = 0.0;     ///< per-stage rate in xi(t) (rad/s)
  int n_stages = 4;
  double transmission = 0.30;  ///< end-to-end signal efficiency, budget only

  void validate() const;

  /// Mean group delay of the cascade, N/kappa_f (seconds).
  double mean_delay_s() const { return n_stages / kappa_f; }

  /// Peak of the impulse response, (N-1)/kappa_f (seconds).
  double peak_delay_s() const { return (n_stages - 1) / kappa_f; }

  /// 30 kHz per-stage linewidth, four stages, 30 % transmission.
  static FilterCascade preset();
};

/// Normalized temporal impulse response (1/s); zero for t < 0.
double impulse_response(const FilterCascade& cascade, double t_s);

/// CDF of the impulse response; used by tests and by the bin-integrated
/// convolution kernel.
double impulse_response_cdf(const FilterCascade& cascade, double t_s);

/// Convolution bookkeeping: the discrete kernel mass (1 minus the truncated
/// tail) and the truncated tail mass itself.
struct ConvolutionReport {
  double kernel_mass = 0.0;
  double tail_mass = 0.0;
};

/// Causal convolution of a uniformly sampled trace with the cascade
/// response. The kernel uses exact per-bin integrals of xi, so a constant
/// input reproduces itself and counts are conserved up to the reported
/// truncation tail. The kernel is truncated where its remaining mass drops
/// below 1e-6 of the total.
///
/// Throws std::invalid_argument when the grid step exceeds 0.2/kappa_f.
std::vector<double> convolve_with_response(const FilterCascade& cascade,
                                           const std::vector<double>& values,
                                           double dt_us,
                                           ConvolutionReport* report = nullptr);

/// How the quoted per-stage linewidth maps onto the Lorentzian pole:
/// `pole_rate` treats kappa_f as the pole itself (as in the time-domain
/// response), `fwhm` treats it as a full width at half maximum (pole at
/// kappa_f/2). The two conventions in the source material differ; both are
/// supported and `fwhm` is the default for rejection estimates.
enum class SuppressionConvention { pole_rate, fwhm };

/// Power suppression in dB at a given angular frequency offset:
/// n_stages * 10*log10(1 + (offset/pole)^2).
double frequency_suppression_db(
    const FilterCascade& cascade, double offset_rad_s,
    SuppressionConvention convention = SuppressionConvention::fwhm);

/// One photon's transit delay through the cascade: Erlang(N, kappa_f) draw
/// in seconds. Mean N/kappa_f, variance N/kappa_f^2.
double sample_delay(const FilterCascade& cascade, RngStream& rng);

}  // namespace herald
