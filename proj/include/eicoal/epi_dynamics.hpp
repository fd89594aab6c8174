#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <vector>

#include "eicoal/common.hpp"
#include "eicoal/genealogy.hpp"
#include "eicoal/piecewise.hpp"
#include "eicoal/rng.hpp"

namespace eicoal {

enum class Mark { Birth, Migration, Death };

const char* mark_name(Mark m);

struct TrajectoryEvent {
  double time = 0.0;  // forward days
  Mark mark = Mark::Birth;
  int e = 0;  // counts after the event
  int i = 0;
};

// Exact jump-process realization of the exposed/infectious counts,
// right-continuous piecewise constant.
struct PopulationTrajectory {
  int e0 = 0;
  int i0 = 0;
  double t_end = 0.0;
  std::vector<TrajectoryEvent> events;

  int e_at(double u) const;
  int i_at(double u) const;
  int final_e() const { return events.empty() ? e0 : events.back().e; }
  int final_i() const { return events.empty() ? i0 : events.back().i; }
};

struct EIParams {
  double gamma = 0.0;          // 1/days, E -> I
  double nu = 0.0;             // 1/days, I -> removed
  PiecewiseConstantFn alpha;   // per-infectious birth rate, forward time

  void validate() const;
};

PopulationTrajectory simulate_ei(const EIParams& params, int e0, int i0, double t_end,
                                 std::uint64_t seed);

constexpr double kNoTime = std::numeric_limits<double>::quiet_NaN();

struct Individual {
  int infector = -1;          // -1 for index cases
  double t_infect = kNoTime;
  double t_onset = kNoTime;   // infectious from here
  double t_removal = kNoTime;
  double t_sample = kNoTime;

  bool sampled() const { return t_sample == t_sample; }
  bool infectious_at(double u) const {
    return t_onset == t_onset && t_onset <= u && !(t_removal == t_removal && t_removal <= u);
  }
};

struct InfectionHistory {
  std::vector<Individual> individuals;  // id = index, in order of infection
};

struct EiAgentsResult {
  PopulationTrajectory trajectory;
  InfectionHistory history;
};

// Same jump process as simulate_ei but with per-individual infection
// histories: each birth picks its source uniformly among current infectious.
EiAgentsResult simulate_ei_agents(const EIParams& params, int e0, int i0, double t_end,
                                  std::uint64_t seed);

struct SeirResult {
  PopulationTrajectory trajectory;  // E and I counts
  InfectionHistory history;
  int n_pop = 0;
  int s0 = 0;
  std::vector<std::pair<double, int>> susceptible;  // (time, S after event)

  int s_at(double u) const;
};

SeirResult simulate_seir_agents(int n_pop, const PiecewiseConstantFn& beta, double gamma,
                                double nu, int init_infectious, double t_end,
                                std::uint64_t seed);

enum class SamplingScheme { Isochronous, Heterochronous };

struct SamplingSpec {
  SamplingScheme scheme = SamplingScheme::Isochronous;
  int n_samples = 0;
  double at_time = 0.0;       // last (or only) sampling date, forward days
  double window_days = 35.0;  // heterochronous: draw times in [at_time - window, at_time]
};

// Rejection signal, not a hard error: the caller re-seeds the simulation.
struct InsufficientEligible : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Draws samples uniformly from the currently infectious (eligible) pool and
// reduces the infection histories to the samples' genealogy. Descendants
// infected through a chain step that postdates an ancestor's sampling date
// are ineligible. Tip labels are individual ids. When `samples_out` is given
// it receives (id, sampling time) pairs in draw order.
SampledTree sample_and_build_tree(const InfectionHistory& history,
                                  const SamplingSpec& spec, std::uint64_t seed,
                                  std::vector<std::pair<int, double>>* samples_out = nullptr);

void write_trajectory_csv(std::ostream& os, const PopulationTrajectory& traj);
void write_history_csv(std::ostream& os, const InfectionHistory& history);

}  // namespace eicoal
