#include <doctest.h>

#include "eicoal/ode_engine.hpp"
#include "eicoal/phasetype.hpp"
#include "eicoal/rng.hpp"
#include "oracles.hpp"

using namespace eicoal;

TEST_CASE("ei_ode_step: decoupled pure decay is exact") {
  const auto [e, i] = ei_ode_step(0.0, 1.0, 0.5, 1.0 / 3.0, 0.0, 3.0);
  CHECK(e == 0.0);
  CHECK(i == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
}

TEST_CASE("ei_ode_step: dt = 0 is the exact identity") {
  const auto [e, i] = ei_ode_step(3.7, 9.1, 0.5, 0.2, 0.9, 0.0);
  CHECK(e == 3.7);
  CHECK(i == 9.1);
}

TEST_CASE("ei_ode_step: growth run matches RK4 and the reported magnitude") {
  const auto [e, i] = ei_ode_step(0.0, 1.0, 0.5, 1.0 / 3.0, 2.0 / 3.0, 35.0);
  const auto [re, ri] = oracles::rk4_ei(0.0, 1.0, 0.5, 1.0 / 3.0, 2.0 / 3.0, 35.0, 1e-3);
  CHECK(std::abs(e - re) / re < 1e-8);
  CHECK(std::abs(i - ri) / ri < 1e-8);
  CHECK(e > 100.0);
  CHECK(e < 1000.0);
  CHECK(i > 100.0);
  CHECK(i < 1000.0);
}

TEST_CASE("ei_ode_step: random parameters against RK4, including degenerate B") {
  Rng rng(7);
  for (int rep = 0; rep < 40; ++rep) {
    double gamma = rng.uniform(0.05, 1.5);
    double nu = rng.uniform(0.05, 1.5);
    double alpha = rng.uniform(0.0, 1.5);
    if (rep % 5 == 0) {
      // Near-degenerate: 4*alpha*gamma + (gamma-nu)^2 ~ 1e-14.
      nu = gamma;
      alpha = 1e-14 / (4.0 * gamma);
    }
    const double e0 = rng.uniform(0.0, 10.0);
    const double i0 = rng.uniform(0.1, 10.0);
    const double dt = rng.uniform(0.0, 12.0);
    const auto [e, i] = ei_ode_step(e0, i0, gamma, nu, alpha, dt);
    const auto [re, ri] = oracles::rk4_ei(e0, i0, gamma, nu, alpha, dt, 1e-3);
    CHECK(std::abs(e - re) <= 1e-8 * std::max(1.0, std::abs(re)));
    CHECK(std::abs(i - ri) <= 1e-8 * std::max(1.0, std::abs(ri)));
    CHECK(e >= 0.0);
    CHECK(i >= 0.0);
  }
}

TEST_CASE("ei_propagator: semigroup property") {
  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const double gamma = rng.uniform(0.05, 1.0);
    const double nu = rng.uniform(0.05, 1.0);
    const double alpha = rng.uniform(0.0, 1.0);
    const double dt1 = rng.uniform(0.0, 5.0);
    const double dt2 = rng.uniform(0.0, 5.0);
    const double e0 = rng.uniform(0.0, 5.0), i0 = rng.uniform(0.1, 5.0);
    const auto [e1, i1] = ei_ode_step(e0, i0, gamma, nu, alpha, dt1);
    const auto [e12, i12] = ei_ode_step(e1, i1, gamma, nu, alpha, dt2);
    const auto [e, i] = ei_ode_step(e0, i0, gamma, nu, alpha, dt1 + dt2);
    CHECK(e12 == doctest::Approx(e).epsilon(1e-12));
    CHECK(i12 == doctest::Approx(i).epsilon(1e-12));
  }
}

TEST_CASE("ei_propagator agrees with the dense matrix exponential") {
  Rng rng(13);
  for (int rep = 0; rep < 20; ++rep) {
    const double gamma = rng.uniform(0.05, 1.2);
    const double nu = rng.uniform(0.05, 1.2);
    const double alpha = rng.uniform(0.0, 1.2);
    const double dt = rng.uniform(0.0, 8.0);
    Eigen::MatrixXd v(2, 2);
    v << -gamma, alpha, gamma, -nu;
    const Eigen::MatrixXd ref = matexp_dense(v * dt);
    const auto p = ei_propagator(gamma, nu, alpha, dt);
    CHECK(p[0] == doctest::Approx(ref(0, 0)).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(ref(0, 1)).epsilon(1e-12));
    CHECK(p[2] == doctest::Approx(ref(1, 0)).epsilon(1e-12));
    CHECK(p[3] == doctest::Approx(ref(1, 1)).epsilon(1e-12));
  }
}

TEST_CASE("solve_on_grid: single segment equals one step") {
  const std::vector<double> grid{0.0, 2.5};
  const auto traj = solve_on_grid(0.4, 0.2, {1.8}, {}, 1.0, 2.0, grid);
  const auto [e, i] = ei_ode_step(1.0, 2.0, 0.4, 0.2, 1.8 * 0.2, 2.5);
  CHECK(traj.e[1] == doctest::Approx(e).epsilon(1e-15));
  CHECK(traj.i[1] == doctest::Approx(i).epsilon(1e-15));
}

TEST_CASE("solve_on_grid: continuity at a changepoint") {
  const std::vector<double> grid{0.0, 5.0, 10.0, 15.0, 20.0};
  const auto traj = solve_on_grid(0.25, 1.0 / 7.0, {2.2, 1.1}, {10.0}, 1.0, 1.0, grid);
  // Independent two-stage computation.
  auto [e, i] = ei_ode_step(1.0, 1.0, 0.25, 1.0 / 7.0, 2.2 / 7.0, 10.0);
  CHECK(traj.e[2] == doctest::Approx(e).epsilon(1e-12));
  CHECK(traj.i[2] == doctest::Approx(i).epsilon(1e-12));
  std::tie(e, i) = ei_ode_step(e, i, 0.25, 1.0 / 7.0, 1.1 / 7.0, 10.0);
  CHECK(traj.e[4] == doctest::Approx(e).epsilon(1e-12));
  CHECK(traj.i[4] == doctest::Approx(i).epsilon(1e-12));
}

TEST_CASE("solve_on_grid: random multi-segment run against RK4") {
  Rng rng(5);
  const double gamma = 0.3, nu = 0.25;
  std::vector<double> r;
  for (int j = 0; j < 5; ++j) r.push_back(rng.uniform(0.3, 2.5));
  const std::vector<double> cps{4.0, 8.0, 12.0, 16.0};
  std::vector<double> grid;
  for (double u = 0.0; u <= 20.0 + 1e-12; u += 1.0) grid.push_back(u);
  const auto traj = solve_on_grid(gamma, nu, r, cps, 0.8, 1.3, grid);

  double e = 0.8, i = 1.3, t = 0.0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    std::size_t seg = 0;
    while (seg < cps.size() && cps[seg] <= 0.5 * (t + grid[g])) ++seg;
    std::tie(e, i) = oracles::rk4_ei(e, i, gamma, nu, r[seg] * nu, grid[g] - t, 1e-3);
    t = grid[g];
  }
  CHECK(std::abs(traj.e.back() - e) <= 1e-8 * std::max(1.0, e));
  CHECK(std::abs(traj.i.back() - i) <= 1e-8 * std::max(1.0, i));
}

TEST_CASE("solve_on_grid: grid omitting a changepoint is a configuration error") {
  CHECK_THROWS_AS(solve_on_grid(0.3, 0.2, {2.0, 1.0}, {10.0}, 1.0, 1.0, {0.0, 20.0}),
                  ConfigError);
}

TEST_CASE("trajectory lookup is right-continuous piecewise constant") {
  DeterministicTrajectory traj;
  traj.times = {0.0, 1.0, 2.0};
  traj.e = {10.0, 20.0, 30.0};
  traj.i = {1.0, 2.0, 3.0};
  CHECK(traj.e_at(0.0) == 10.0);
  CHECK(traj.e_at(0.99) == 10.0);
  CHECK(traj.e_at(1.0) == 20.0);
  CHECK(traj.i_at(5.0) == 3.0);
  CHECK(traj.max_total() == 33.0);
}
