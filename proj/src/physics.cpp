#include "phonon_herald/physics.hpp"

#include <cmath>
#include <string>

#include "phonon_herald/constants.hpp"

namespace herald {

void SystemParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string("SystemParams: ") + name +
                                  " must be a positive finite rate");
    }
  };
  positive(kappa, "kappa");
  positive(omega_m, "omega_m");
  positive(g0, "g0");
  positive(gamma_m, "gamma_m");
  if (!(n_th >= 0.0) || !std::isfinite(n_th)) {
    throw std::invalid_argument("SystemParams: n_th must be non-negative");
  }
  if (t_env) {
    const double derived = thermal_occupation(*t_env, omega_m);
    if (std::abs(derived - n_th) > 1e-9 * derived) {
      throw std::invalid_argument(
          "SystemParams: n_th inconsistent with t_env (expected k_B T / hbar Omega_m)");
    }
  }
}

SystemParams SystemParams::preset() {
  SystemParams p;
  p.kappa = units::mhz(0.8);
  p.omega_m = units::mhz(1.4);
  p.g0 = units::hz(100.0);
  p.n_th = 2.0e5;
  p.gamma_m = units::khz(1.5) / p.n_th;  // Gamma_th = 2pi*1.5 kHz
  return p;
}

ScatteringRates scattering_rates(const SystemParams& params, const DriveTone& drive) {
  if (drive.n_cav < 0.0) {
    throw std::invalid_argument("scattering_rates: n_cav must be >= 0");
  }
  // Written as (4 g0^2 n / kappa) / (1 + (2(Delta -+ Omega)/kappa)^2) so
  // the on-resonance values coincide bit-for-bit with
  // optically_broadened_rate and 2 * write_gain.
  const double base = 4.0 * params.g0 * params.g0 * drive.n_cav / params.kappa;
  const double xp = 2.0 * (drive.detuning - params.omega_m) / params.kappa;
  const double xm = 2.0 * (drive.detuning + params.omega_m) / params.kappa;
  return {base / (1.0 + xp * xp), base / (1.0 + xm * xm)};
}

double thermal_occupation(double t_env_kelvin, double omega_m) {
  if (!(t_env_kelvin > 0.0)) {
    throw std::domain_error("thermal_occupation: temperature must be positive");
  }
  return constants::k_boltzmann * t_env_kelvin / (constants::hbar * omega_m);
}

double steady_state_occupation(const ScatteringRates& rates, const SystemParams& params) {
  const double denom = rates.a_minus - rates.a_plus + params.gamma_m;
  if (!(denom > 0.0)) {
    throw ParametricInstabilityError(
        "steady_state_occupation: A- - A+ + Gamma_m <= 0, no stable occupation");
  }
  return (rates.a_plus + params.n_th * params.gamma_m) / denom;
}

double optically_broadened_rate(const SystemParams& params, double n_cav) {
  if (n_cav < 0.0) {
    throw std::invalid_argument("optically_broadened_rate: n_cav must be >= 0");
  }
  return 4.0 * params.g0 * params.g0 * n_cav / params.kappa;
}

double write_gain(const SystemParams& params, double n_cav) {
  if (n_cav < 0.0) {
    throw std::invalid_argument("write_gain: n_cav must be >= 0");
  }
  return 2.0 * params.g0 * params.g0 * n_cav / params.kappa;
}

double quantum_cooperativity(double gamma_opt, double gamma_th) {
  if (!(gamma_th > 0.0)) {
    throw std::domain_error("quantum_cooperativity: gamma_th must be positive");
  }
  return gamma_opt / gamma_th;
}

double thermal_admixture(double c_q) {
  if (!(c_q > 0.0)) {
    throw std::domain_error("thermal_admixture: C_q must be positive");
  }
  return 1.0 / c_q;
}

}  // namespace herald
