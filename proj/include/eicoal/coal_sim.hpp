#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "eicoal/epi_dynamics.hpp"
#include "eicoal/genealogy.hpp"
#include "eicoal/ode_engine.hpp"
#include "eicoal/piecewise.hpp"

namespace eicoal {

// Population and birth-rate plug-in seen backwards in time: piecewise
// constant on [0, horizon], segment j covering [segments[j].t_begin,
// segments[j+1].t_begin).
struct BackwardsPopulation {
  struct Segment {
    double t_begin = 0.0;
    double e = 0.0;
    double i = 0.0;
    double alpha = 0.0;
  };
  std::vector<Segment> segments;
  double horizon = 0.0;
};

BackwardsPopulation backwards_view(const PopulationTrajectory& traj,
                                   const PiecewiseConstantFn& alpha_forward,
                                   double horizon);
BackwardsPopulation backwards_view(const DeterministicTrajectory& traj,
                                   const PiecewiseConstantFn& alpha_forward,
                                   double horizon);

struct CoalConfig {
  int n_e = 0;  // sampled exposed lineages at present
  int n_i = 0;  // sampled infectious lineages at present
};

enum class CoalOutcome { Completed, ReachedHorizon, Rejected };

enum class CoalStepKind { Coalescence, Migration, CoalescentMigration };

struct CoalStep {
  double t = 0.0;  // backwards days
  CoalStepKind kind = CoalStepKind::Coalescence;
  int ne_after = 0;
  int ni_after = 0;
};

struct CoalSimResult {
  CoalOutcome outcome = CoalOutcome::Rejected;
  int n_e0 = 0;
  int n_i0 = 0;
  std::vector<CoalStep> steps;
  std::vector<double> coalescence_times;  // backwards, ascending

  // Sampling event at t=0 plus the coalescences, as model data.
  EventTimeline timeline() const;
};

// Backwards simulation of the sampled-lineage process by time transformation:
// the integrated total rate is inverted segment by segment against unit
// exponentials. Runs where lineage counts exceed the population plug-in are
// reported as Rejected (a signal, not an error).
CoalSimResult simulate_coalescent_tt(const CoalConfig& config,
                                     const BackwardsPopulation& pop, double gamma,
                                     std::uint64_t seed);

// Lazy jump chain conditioned on a full stochastic realization; transition
// index follows the marked-rate table (1 = birth seen as coalescence,
// 2 = birth seen as coalescent migration, 3 = birth off sample, 4 = migration
// in the sample, 5 = migration off sample, 6 = death).
struct JumpStep {
  std::size_t event_index = 0;
  int transition = 0;
  double prob = 0.0;  // probability of the branch actually taken
  int ne_after = 0;
  int ni_after = 0;
};

struct JumpChainResult {
  std::vector<JumpStep> steps;            // most recent population event first
  std::vector<double> coalescence_times;  // backwards from t_end, ascending
};

JumpChainResult jump_chain_sample(const PopulationTrajectory& realization, int n_e,
                                  int n_i, std::uint64_t seed);

// Exact rational arithmetic for probability audits of the jump chain.
struct Rational {
  long long num = 0;
  long long den = 1;

  Rational() = default;
  Rational(long long n, long long d);
  static Rational zero() { return {}; }
  static Rational one() { return {1, 1}; }

  Rational operator+(const Rational& o) const;
  Rational operator-(const Rational& o) const;
  Rational operator*(const Rational& o) const;
  bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

// Exact marginal distribution of the jump chain over a realization: for each
// population event (by index), the probability of each reading of that event
// and the state distribution after processing it, walking backwards from the
// most recent event.
struct JumpChainMarginals {
  // P(event read as transition 1 / 2 / 4), by event index.
  std::vector<std::array<Rational, 3>> mark_probs;
  // C(u) distribution immediately after processing the event, by event index.
  std::vector<std::map<std::pair<int, int>, Rational>> state_after;
};

JumpChainMarginals enumerate_jump_chain(const PopulationTrajectory& realization,
                                        int n_e, int n_i);

// Backwards-ordered gaps between successive coalescence times: interval 1 is
// present to the first coalescence.
std::vector<double> intercoalescent_intervals(const EventTimeline& timeline);

}  // namespace eicoal
