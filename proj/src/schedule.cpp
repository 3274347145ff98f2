#include "phonon_herald/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace herald {

void PulseSchedule::validate() const {
  if (!(shot_length_us > 0.0)) {
    throw std::invalid_argument("PulseSchedule: shot_length must be positive");
  }
  if (idle_read_fraction < 0.0 || idle_read_fraction > 1.0) {
    throw std::invalid_argument("PulseSchedule: idle_read_fraction must be in [0,1]");
  }
  double prev_end = 0.0;
  for (const auto& st : stages) {
    if (!(st.start_us < st.end_us)) {
      throw std::invalid_argument("PulseSchedule: stage must have start < end");
    }
    if (st.start_us < prev_end) {
      throw std::invalid_argument("PulseSchedule: stages must be sorted and non-overlapping");
    }
    if (st.start_us < 0.0 || st.end_us > shot_length_us) {
      throw std::invalid_argument("PulseSchedule: stage outside [0, shot_length]");
    }
    if (st.write_power < 0.0 || st.read_power < 0.0) {
      throw std::invalid_argument("PulseSchedule: powers must be >= 0");
    }
    prev_end = st.end_us;
  }
}

PulseSchedule::Powers PulseSchedule::powers_at(double t_us) const {
  for (const auto& st : stages) {
    if (t_us >= st.start_us && t_us < st.end_us) {
      return {st.write_power, st.read_power};
    }
  }
  return {0.0, idle_read_power()};
}

double PulseSchedule::reference_read_power() const {
  double ref = 0.0;
  for (const auto& st : stages) ref = std::max(ref, st.read_power);
  return ref;
}

const PulseStage* PulseSchedule::write_stage() const {
  for (const auto& st : stages) {
    if (st.write_power > 0.0) return &st;
  }
  return nullptr;
}

const PulseStage* PulseSchedule::read_stage() const {
  const PulseStage* w = write_stage();
  const PulseStage* last_read = nullptr;
  for (const auto& st : stages) {
    if (st.read_power <= 0.0) continue;
    if (w && st.start_us >= w->end_us) return &st;
    last_read = &st;
  }
  return w ? nullptr : last_read;
}

PulseSchedule PulseSchedule::preset() {
  PulseSchedule s;
  s.shot_length_us = 1050.0;
  s.idle_read_fraction = 0.005;
  s.stages = {
      {150.0, 650.0, 0.0, 1.0},   // cool
      {750.0, 850.0, 1.0, 0.0},   // write
      {950.0, 1003.1, 0.0, 1.0},  // read
  };
  return s;
}

}  // namespace herald
