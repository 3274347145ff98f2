#pragma once

#include <optional>
#include <vector>

namespace herald {

/// One drive stage. Powers are in arbitrary lab units; the PowerScale
/// coefficients convert them to intracavity photon numbers. Stages are
/// half-open intervals [start_us, end_us).
struct PulseStage {
  double start_us = 0.0;
  double end_us = 0.0;
  double write_power = 0.0;  ///< blue-detuned drive (Delta = +Omega_m)
  double read_power = 0.0;   ///< red-detuned drive (Delta = -Omega_m)
};

/// Piecewise drive powers over one shot. Outside any stage the read drive
/// sits at the idle level (idle_read_fraction of the largest stage read
/// power), matching the pre-cooling light that stays on between pulses.
struct PulseSchedule {
  std::vector<PulseStage> stages;
  double shot_length_us = 0.0;
  double idle_read_fraction = 0.0;

  void validate() const;

  struct Powers {
    double write = 0.0;
    double read = 0.0;
  };
  Powers powers_at(double t_us) const;

  double reference_read_power() const;
  double idle_read_power() const {
    return idle_read_fraction * reference_read_power();
  }

  /// First stage with write power, if any.
  const PulseStage* write_stage() const;
  /// First stage with read power starting at or after the write stage end
  /// (or the last read stage when there is no write stage).
  const PulseStage* read_stage() const;

  /// Cool 150-650 us, write 750-850 us, read 950-1003.1 us (read length
  /// set so Gamma_opt * T_r = 5 on the canonical parameters), 1050 us
  /// shots, idle read level 0.5 %.
  static PulseSchedule preset();
};

}  // namespace herald
