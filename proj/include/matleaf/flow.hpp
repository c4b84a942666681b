#pragma once

namespace matleaf {

/// Classical fixed-step 4th-order Runge-Kutta step for an autonomous field.
template <class State, class Field>
State rk4_step(const State& y, double h, Field&& field) {
  const State k1 = field(y);
  const State k2 = field(State(y + (h / 2.0) * k1));
  const State k3 = field(State(y + (h / 2.0) * k2));
  const State k4 = field(State(y + h * k3));
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace matleaf
