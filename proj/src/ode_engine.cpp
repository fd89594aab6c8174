#include "eicoal/ode_engine.hpp"

#include <algorithm>
#include <cmath>

namespace eicoal {

double DeterministicTrajectory::e_at(double u) const {
  auto it = std::upper_bound(times.begin(), times.end(), u);
  if (it == times.begin()) return e.front();
  return e[static_cast<std::size_t>(it - times.begin()) - 1];
}

double DeterministicTrajectory::i_at(double u) const {
  auto it = std::upper_bound(times.begin(), times.end(), u);
  if (it == times.begin()) return i.front();
  return i[static_cast<std::size_t>(it - times.begin()) - 1];
}

double DeterministicTrajectory::max_total() const {
  double m = 0.0;
  for (std::size_t j = 0; j < times.size(); ++j) m = std::max(m, e[j] + i[j]);
  return m;
}

std::array<double, 4> ei_propagator(double gamma, double nu, double alpha, double dt) {
  if (!(gamma > 0.0) || !(nu > 0.0) || alpha < 0.0 || dt < 0.0)
    throw NumericalError("ei_propagator needs gamma, nu > 0, alpha >= 0, dt >= 0");
  // Eigen-structure of V: eigenvalues m +- B/2 with m = -(gamma+nu)/2 and
  // B = sqrt(4*alpha*gamma + (gamma-nu)^2).
  const double m = -0.5 * (gamma + nu);
  const double disc = 4.0 * alpha * gamma + (gamma - nu) * (gamma - nu);
  const double b = std::sqrt(disc);
  if (b < 1e-12) {
    // Confluent (Jordan) limit: exp(V*dt) = e^{m*dt} (I + dt*(V - m I)).
    const double emt = std::exp(m * dt);
    const double w11 = 0.5 * (nu - gamma);
    return {emt * (1.0 + dt * w11), emt * dt * alpha, emt * dt * gamma,
            emt * (1.0 - dt * w11)};
  }
  // Work with exp(lambda1*dt), exp(lambda2*dt) directly so that an extreme
  // growing mode overflows to inf (caught by the population cap downstream)
  // instead of producing 0*inf.
  const double ep = std::exp((m + 0.5 * b) * dt);
  const double en = std::exp((m - 0.5 * b) * dt);
  // c = (nu - gamma)/B lies in [-1, 1], so the diagonal entries are sums of
  // nonnegative terms; no cancellation for large B*dt.
  const double c = (nu - gamma) / b;
  const double ee = 0.5 * ((1.0 + c) * ep + (1.0 - c) * en);
  const double ii = 0.5 * ((1.0 - c) * ep + (1.0 + c) * en);
  const double ei = alpha * (ep - en) / b;
  const double ie = gamma * (ep - en) / b;
  return {ee, ei, ie, ii};
}

std::pair<double, double> ei_ode_step(double e0, double i0, double gamma, double nu,
                                      double alpha, double dt) {
  if (e0 < 0.0 || i0 < 0.0)
    throw NumericalError("ei_ode_step needs nonnegative initial counts");
  const auto p = ei_propagator(gamma, nu, alpha, dt);
  return {p[0] * e0 + p[1] * i0, p[2] * e0 + p[3] * i0};
}

DeterministicTrajectory solve_on_grid(double gamma, double nu,
                                      const std::vector<double>& r_segments,
                                      const std::vector<double>& changepoints,
                                      double e0, double i0,
                                      const std::vector<double>& grid) {
  if (r_segments.size() != changepoints.size() + 1)
    throw ConfigError("need one R value per segment (changepoints + 1)");
  if (grid.empty() || grid.front() != 0.0)
    throw ConfigError("grid must start at 0");
  if (!std::is_sorted(grid.begin(), grid.end()))
    throw ConfigError("grid must be sorted");
  for (double c : changepoints) {
    bool found = false;
    for (double g : grid)
      if (std::abs(g - c) <= 1e-9) {
        found = true;
        break;
      }
    if (!found) throw ConfigError("grid omits an R changepoint");
  }

  DeterministicTrajectory traj;
  traj.times = grid;
  traj.e.resize(grid.size());
  traj.i.resize(grid.size());
  traj.e[0] = e0;
  traj.i[0] = i0;
  double e = e0, i = i0;
  for (std::size_t j = 1; j < grid.size(); ++j) {
    const double mid = 0.5 * (grid[j - 1] + grid[j]);
    std::size_t seg = 0;
    while (seg < changepoints.size() && changepoints[seg] <= mid) ++seg;
    const double alpha = r_segments[seg] * nu;
    std::tie(e, i) = ei_ode_step(e, i, gamma, nu, alpha, grid[j] - grid[j - 1]);
    traj.e[j] = e;
    traj.i[j] = i;
  }
  return traj;
}

}  // namespace eicoal
