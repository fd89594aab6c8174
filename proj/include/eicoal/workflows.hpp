#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eicoal/coal_sim.hpp"
#include "eicoal/epi_dynamics.hpp"
#include "eicoal/inference.hpp"
#include "eicoal/metrics.hpp"

namespace eicoal {

// Hyperparameters from the simulation study and the Liberia reanalysis.
// Names: "sim-fixed", "sim-increase", "sim-control", "ebola-liberia".
PriorConfig prior_preset(const std::string& name);

// Basic reproduction number over forward time for the named scenario:
// "fixed" 2.2 throughout; "increase" 1.3 rising to 2.3 as a daily staircase
// over weeks 8-13; "control" 2.2 dropping to 1.1 at 12 weeks.
PiecewiseConstantFn scenario_r0(const std::string& name);

struct EpidemicStudyConfig {
  std::string scenario = "fixed";
  int population = 15000;
  int init_infectious = 1;
  double gamma = 0.25;        // 1/4 days
  double nu = 1.0 / 7.0;      // 1/7 days
  double t_end = 154.0;       // 22 weeks
  SamplingSpec sampling{SamplingScheme::Isochronous, 50, 153.0, 35.0};
  int max_attempts = 100;
  std::uint64_t seed = 1;
};

struct EpidemicStudyResult {
  SeirResult sim;
  SampledTree tree;
  std::vector<std::pair<int, double>> samples;
  double anchor_time = 0.0;  // most recent sampling time (backwards t = 0)
  int attempts_used = 0;
};

// Simulates the agent SEIR epidemic and draws the sample genealogy,
// re-seeding on rejection (not enough eligible infectious individuals).
EpidemicStudyResult simulate_epidemic_study(const EpidemicStudyConfig& cfg);

// True R_u on a backwards half-day-style grid anchored at `anchor`:
// R_u = R0(u) * S(u)/N evaluated at u = anchor - t_back.
TruthGrid truth_r_grid(const SeirResult& sim, const PiecewiseConstantFn& r0_forward,
                       double anchor, double step, double max_back);

// R_u posterior draws evaluated at backwards times (rows = draws).
Eigen::MatrixXd r_draws_on_grid(const PosteriorSamples& samples,
                                const std::vector<double>& times_back);

struct FidelityConfig {
  double alpha = 2.0 / 3.0;
  double nu = 1.0 / 3.0;
  double gamma = 0.5;
  double t_end = 35.0;
  int n_sampled = 5;
  int min_infectious = 5;
  int n_trajectories = 1000;
  double ode_grid_step = 0.5;
  int max_sim_attempts = 100000;
  int max_tt_attempts = 1000;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct FidelityResult {
  // One vector of backwards-ordered intercoalescent intervals per replicate.
  std::vector<std::vector<double>> empirical, tt, tt_ode;
  long long sim_attempts = 0;
  long long tt_rejections = 0;
  long long tt_ode_rejections = 0;

  // Per-interval medians for one arm (index 0 = most recent interval).
  static std::vector<double> interval_medians(const std::vector<std::vector<double>>& arm);
};

// The three-arm coalescent-fidelity experiment: true genealogies from the
// agent jump process, time-transformation genealogies against the same
// stochastic trajectories, and time-transformation genealogies against the
// ODE trajectory.
FidelityResult run_fidelity_study(const FidelityConfig& cfg);

}  // namespace eicoal
