#pragma once

#include <array>
#include <vector>

#include "eicoal/common.hpp"

namespace eicoal {

// ODE solution of the exposed/infectious system at forward grid times,
// treated as piecewise constant between grid times by the likelihood.
struct DeterministicTrajectory {
  std::vector<double> times;  // forward days, ascending, times[0] == 0
  std::vector<double> e;
  std::vector<double> i;

  std::size_t size() const { return times.size(); }
  // Right-continuous lookup: value on [times[j], times[j+1]).
  double e_at(double u) const;
  double i_at(double u) const;
  double max_total() const;
};

// Entries of exp(V*dt) for V = [[-gamma, alpha], [gamma, -nu]], row-major
// {ee, ei, ie, ii}: E(dt) = ee*E0 + ei*I0, I(dt) = ie*E0 + ii*I0.
std::array<double, 4> ei_propagator(double gamma, double nu, double alpha, double dt);

// Exact solution of dE/du = alpha*I - gamma*E, dI/du = gamma*E - nu*I over
// [0, dt] with constant coefficients.
std::pair<double, double> ei_ode_step(double e0, double i0, double gamma, double nu,
                                      double alpha, double dt);

// Sequential exact stepping across a grid; alpha on [changepoints[j-1],
// changepoints[j]) is r_segments[j] * nu, with r_segments.size() ==
// changepoints.size() + 1. The grid must contain every changepoint.
DeterministicTrajectory solve_on_grid(double gamma, double nu,
                                      const std::vector<double>& r_segments,
                                      const std::vector<double>& changepoints,
                                      double e0, double i0,
                                      const std::vector<double>& grid);

}  // namespace eicoal
