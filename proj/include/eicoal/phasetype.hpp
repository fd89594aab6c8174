#pragma once

#include <Eigen/Dense>
#include <vector>

#include "eicoal/common.hpp"
#include "eicoal/genealogy.hpp"
#include "eicoal/ode_engine.hpp"

namespace eicoal {

struct RateDomainError : NumericalError {
  using NumericalError::NumericalError;
};

// Everything needed to price one inter-event interval: population plug-in
// values (constant over the interval), rates, the active lineage count and
// the interval length.
struct IntervalContext {
  double e_pop = 0.0;  // E-tilde on the interval
  double i_pop = 0.0;  // I-tilde on the interval
  double alpha = 0.0;  // 1/days
  double gamma = 0.0;
  double nu = 0.0;
  int k = 0;           // active lineages
  double dt = 0.0;     // days
};

// Transition rates between states with k lineages, indexed by the number of
// sampled lineages in E (ne = 0..k). State ne has ne lineages in E and k-ne
// in I; ne = 0 is the all-infectious state (first row/column of A).
struct TridiagonalRates {
  int k = 0;
  std::vector<double> up;      // ne -> ne+1: (k-ne) * gamma * (E+1) / I
  std::vector<double> down;    // ne -> ne-1: ne * max(I-(k-ne), 0) * alpha / E
  std::vector<double> absorb;  // coalescence: ne * (k-ne) * alpha / E
  std::vector<double> diag;    // -(up + down + absorb)
};

TridiagonalRates build_rates(const IntervalContext& ctx);

// Dense transient matrix A ((k+1)x(k+1)), absorption matrix L ((k+1)x(k-1));
// absorption column j is the post-coalescence state with j lineages in E.
struct RateMatrixSet {
  int k = 0;
  Eigen::MatrixXd A;
  Eigen::MatrixXd L;
  // Block generator [[A, L], [0, 0]], (2k)x(2k).
  Eigen::MatrixXd assembled_generator() const;
};

RateMatrixSet build_rate_matrices(const IntervalContext& ctx);

// Scaling-and-squaring Pade approximation (degrees 3/5/7/9/13).
Eigen::MatrixXd matexp_dense(const Eigen::MatrixXd& m);

// exp(m*t)*v via an Arnoldi/Krylov projection with adaptive substepping.
Eigen::VectorXd matexp_action(const Eigen::MatrixXd& m, const Eigen::VectorXd& v,
                              double t);

// Row ne_start of exp(A*dt), computed by uniformization on the tridiagonal
// structure. values[j] * exp(log_scale) is the transition probability to
// transient state j. All entries nonnegative; values scaled so max is 1.
struct ScaledRow {
  Eigen::VectorXd values;
  double log_scale = 0.0;
};

ScaledRow transition_row(const IntervalContext& ctx, int ne_start);

// Likelihood contribution of one interval ending in the given event type.
// For a coalescent end, ne_end indexes the k-1 absorption targets (0..k-2
// lineages in E after the merge); for sampling/grid ends it is the transient
// state just before the event. Structurally impossible transitions return 0.
double interval_likelihood(int ne_start, int ne_end, const IntervalContext& ctx,
                           EventType end_type);

// Piecewise-constant reproduction number over backwards-time segments of
// width changepoint_interval days; r_segments is ordered oldest (rootward)
// first, matching the direction of the random-walk prior. Segments beyond
// what the span needs are prior-only.
struct EiModelParams {
  double gamma = 0.0;
  double nu = 0.0;
  std::vector<double> r_segments;
  double changepoint_interval = 7.0;

  int segments_needed(double span) const;
  // Index into r_segments for a backwards interval (t_lo, t_hi).
  int segment_index(double span, double t_lo, double t_hi) const;
  double alpha_on(double span, double t_lo, double t_hi) const;
};

// Per-interval context assembly shared by the likelihoods and the samplers:
// interval i runs (t_{i-1}, t_i); the population plug-in is the trajectory
// value at forward time span - t_i (the rootward end, i.e. left-continuous
// in backwards time).
IntervalContext interval_context(const EventTimeline& tl, std::size_t i,
                                 const EiModelParams& params,
                                 const DeterministicTrajectory& traj);

// Log of the augmented likelihood: product of per-interval contributions for
// the state labels n_exposed (sampled-E count after each timeline event).
// Returns -inf when any contribution is 0, when lineage counts exceed the
// population plug-in at a timeline time, or when rates are out of domain.
double augmented_loglik(const EventTimeline& tl, const std::vector<int>& n_exposed,
                        const EiModelParams& params,
                        const DeterministicTrajectory& traj);

// Likelihood with states only at coalescent/sampling events; grid-time states
// are marginalized through products of matrix exponentials across the
// changepoints inside each interval. n_exposed_events has one entry per
// non-grid event, in timeline order.
double alternative_loglik(const EventTimeline& tl,
                          const std::vector<int>& n_exposed_events,
                          const EiModelParams& params,
                          const DeterministicTrajectory& traj);

}  // namespace eicoal
