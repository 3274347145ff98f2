#pragma once

#include <optional>
#include <stdexcept>

namespace herald {

/// Physical parameters of the optomechanical system. All frequencies and
/// decay rates are angular (rad/s).
struct SystemParams {
  double kappa = 0.0;    ///< optical linewidth kappa
  double omega_m = 0.0;  ///< mechanical frequency Omega_m
  double g0 = 0.0;       ///< single-photon optomechanical coupling
  double gamma_m = 0.0;  ///< mechanical decay Gamma_m
  double n_th = 0.0;     ///< mean thermal bath occupation
  std::optional<double> t_env;  ///< environment temperature (K), if known

  /// Throws std::invalid_argument on violated invariants. When t_env is
  /// set, n_th must equal k_B*T/(hbar*Omega_m) to 1e-9 relative.
  void validate() const;

  /// Diagnostic only; the rate formulas are valid at any detuning.
  bool sideband_resolved() const { return omega_m > kappa; }

  /// Thermal decoherence rate Gamma_th = Gamma_m * n_th (rad/s).
  double gamma_th() const { return gamma_m * n_th; }

  /// Canonical configuration used throughout the docs and tests:
  /// kappa = 2pi*0.8 MHz, Omega_m = 2pi*1.4 MHz, Gamma_th = 2pi*1.5 kHz,
  /// n_th = 2e5 (so Gamma_m = Gamma_th/n_th), g0 = 2pi*100 Hz nominal.
  /// Observables depend on g0 only through g0^2*n_cav, which the power
  /// scale calibrates, so the nominal g0 is a bookkeeping choice.
  static SystemParams preset();
};

/// One coherent drive: detuning from optical resonance and the intracavity
/// photon number it sustains.
struct DriveTone {
  double detuning = 0.0;  ///< Delta (rad/s)
  double n_cav = 0.0;     ///< intracavity drive photon number, >= 0
};

/// Stokes (a_plus, phonon-creating) and anti-Stokes (a_minus,
/// phonon-annihilating) scattering rates in 1/s.
struct ScatteringRates {
  double a_plus = 0.0;
  double a_minus = 0.0;

  ScatteringRates operator+(const ScatteringRates& o) const {
    return {a_plus + o.a_plus, a_minus + o.a_minus};
  }
};

/// Raised when the net relaxation rate A- - A+ + Gamma_m is not positive
/// and no steady state exists.
class ParametricInstabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Aoh = g0^2 n_cav kappa / ((Delta -+ Omega_m)^2 + kappa^2/4).
/// Linear in n_cav; A+(Delta) = A-(-Delta).
ScatteringRates scattering_rates(const SystemParams& params, const DriveTone& drive);

/// k_B T / (hbar Omega_m). Throws std::domain_error for T <= 0.
double thermal_occupation(double t_env_kelvin, double omega_m);

/// Fixed point (A+ + n_th Gamma_m) / (A- - A+ + Gamma_m) of the occupation
/// rate equation. Throws ParametricInstabilityError when the denominator
/// is not positive.
double steady_state_occupation(const ScatteringRates& rates, const SystemParams& params);

/// Gamma_opt = 4 g0^2 n_cav / kappa. Equals A-(-Omega_m) exactly.
double optically_broadened_rate(const SystemParams& params, double n_cav);

/// g_w = 2 g0^2 n_cav / kappa. The identity 2*g_w = A+(+Omega_m) holds
/// exactly.
double write_gain(const SystemParams& params, double n_cav);

/// C_q = Gamma_opt / Gamma_th. Throws std::domain_error for
/// gamma_th <= 0.
double quantum_cooperativity(double gamma_opt, double gamma_th);

/// Thermal admixture 1/C_q picked up by the read channel.
double thermal_admixture(double c_q);

}  // namespace herald
