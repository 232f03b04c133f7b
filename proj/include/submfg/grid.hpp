#pragma once

// Uniform time grid on [0, T] together with the quadrature weights of the
// measure used for path-space norms: unit masses at both endpoints plus
// Lebesgue measure in between (trapezoid rule on the grid).  The weights sum
// to 2 + T exactly, so constant paths integrate without error.

#include <stdexcept>
#include <vector>

namespace submfg {

struct TimeGrid {
  double horizon = 1.0;
  int n_steps = 1;  // number of increments; grid has n_steps + 1 points

  TimeGrid() = default;
  TimeGrid(double T, int N) : horizon(T), n_steps(N) {
    if (!(T > 0.0)) throw std::invalid_argument("TimeGrid: horizon must be positive");
    if (N < 1) throw std::invalid_argument("TimeGrid: need at least one step");
  }

  int n_points() const { return n_steps + 1; }
  double dt() const { return horizon / n_steps; }
  double time(int k) const { return k * horizon / n_steps; }

  /// Quadrature weight of grid point k for the endpoint-mass + Lebesgue
  /// measure: 1 + dt/2 at k = 0 and k = N, dt in the interior.
  double quad_weight(int k) const {
    double d = dt();
    return (k == 0 || k == n_steps) ? 1.0 + 0.5 * d : d;
  }

  std::vector<double> quad_weights() const {
    std::vector<double> w(n_points());
    for (int k = 0; k < n_points(); ++k) w[k] = quad_weight(k);
    return w;
  }

  double total_mass() const { return 2.0 + horizon; }

  bool operator==(const TimeGrid& o) const {
    return horizon == o.horizon && n_steps == o.n_steps;
  }
};

}  // namespace submfg
