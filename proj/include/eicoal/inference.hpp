#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "eicoal/common.hpp"
#include "eicoal/genealogy.hpp"
#include "eicoal/ode_engine.hpp"
#include "eicoal/phasetype.hpp"
#include "eicoal/rng.hpp"

namespace eicoal {

struct LogNormalPrior {
  double log_mean = 0.0;
  double log_sd = 1.0;
};

struct PriorConfig {
  LogNormalPrior gamma, nu, e0, i0, r0, sigma_rw;
  double changepoint_interval = 7.0;

  void validate() const;
};

// Column layout of the mean-zero log-scale parameter vector q:
// (gamma, nu, E0, I0, R_0..R_{m-1}, sigma), R ordered oldest first.
struct ParamLayout {
  int n_segments = 0;
  int dim() const { return n_segments + 5; }
  int gamma() const { return 0; }
  int nu() const { return 1; }
  int e0() const { return 2; }
  int i0() const { return 3; }
  int r(int j) const { return 4 + j; }
  int sigma() const { return 4 + n_segments; }
};

struct NaturalParams {
  double gamma = 0.0, nu = 0.0, e0 = 0.0, i0 = 0.0, sigma = 0.0;
  std::vector<double> r;  // oldest segment first
};

// Joint Gaussian prior over q. All marginals are log-normal, so q is normal;
// the random-walk covariance between R segments is built with the walk scale
// frozen at sigma's prior median, which is what makes the joint exactly
// Gaussian and the ESS ellipse draws exact.
class GaussianPrior {
 public:
  GaussianPrior(const PriorConfig& cfg, int n_segments);

  const ParamLayout& layout() const { return layout_; }
  int dim() const { return layout_.dim(); }
  const Eigen::VectorXd& log_means() const { return mu_; }
  Eigen::MatrixXd covariance() const { return cov_; }
  double changepoint_interval() const { return cfg_.changepoint_interval; }

  double log_density(const Eigen::VectorXd& q) const;  // via the Sigma factorization
  Eigen::VectorXd sample(Rng& rng) const;              // conditional decomposition
  NaturalParams to_natural(const Eigen::VectorXd& q) const;

 private:
  PriorConfig cfg_;
  ParamLayout layout_;
  double rw_sd_ = 0.0;  // exp(mu_rw), the frozen walk scale inside Sigma
  Eigen::VectorXd mu_;
  Eigen::MatrixXd cov_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

double log_prior(const Eigen::VectorXd& q, const GaussianPrior& prior);

// Target evaluation for the slice sampler: trajectory, likelihood and the
// validity/cap indicators V and W at a proposed q.
struct TargetResult {
  bool valid = false;     // V and W both hold and the evaluation succeeded
  double loglik = 0.0;
  DeterministicTrajectory traj;
};
using TargetFn = std::function<TargetResult(const Eigen::VectorXd&)>;

struct ChainState {
  Eigen::VectorXd q;
  double loglik = 0.0;
  DeterministicTrajectory traj;
  std::vector<int> n_exposed;  // latent labels, one per timeline point
};

// One accepted elliptical-slice move: threshold from the current
// log-likelihood, proposals on the ellipse through q and a fresh prior draw,
// bracket shrinking toward the current state on rejection. Returns the number
// of proposals evaluated.
int ess_step(ChainState& state, const GaussianPrior& prior, const TargetFn& target,
             Rng& rng, int max_shrink = 1000);

// Production target: exp(q + mu) -> ODE solve on the timeline grid -> W cap
// (8e9 total) and V feasibility -> augmented log-likelihood with the given
// latent labels. `labels` is captured by pointer so the evaluator always sees
// the chain's current labels.
TargetFn make_coalescent_target(const EventTimeline& tl, const GaussianPrior& prior,
                                const std::vector<int>* labels);

// Raised by sample_latent_states when no feasible continuation exists.
struct LatentInfeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LatentDraw {
  std::vector<int> n_exposed;
  double loglik = 0.0;  // augmented log-likelihood of the drawn labels
};

// Forward sequential draw of the lineage-state labels, one timeline point at
// a time, proportional to the per-interval likelihood contributions and
// masked by the population-count feasibility V. All samples start infectious,
// so the state at t=0 is deterministic.
LatentDraw sample_latent_states(const EventTimeline& tl, const EiModelParams& params,
                                const DeterministicTrajectory& traj, Rng& rng);

struct McmcConfig {
  int iterations = 100000;
  int burn_in = -1;  // default: half of iterations
  int thinning = 10;
  std::uint64_t seed = 1;
  int max_init_tries = 1000;
  int max_shrink = 1000;
  int max_latent_retries = 100;
};

struct PosteriorSamples {
  std::vector<std::string> names;  // column names of draws
  Eigen::MatrixXd draws;           // one row per retained draw, natural scale
  std::vector<double> logliks;

  double span = 0.0;
  double changepoint_interval = 7.0;
  int n_segments = 0;
  std::uint64_t seed = 0;
  int iterations = 0, burn_in = 0, thinning = 0;
  double mean_proposals_per_step = 0.0;
  long long latent_retries = 0;

  std::size_t n_draws() const { return static_cast<std::size_t>(draws.rows()); }
  // Piecewise-constant reproduction number of one draw at a backwards time.
  double r_at(std::size_t draw, double t_back) const;
  NaturalParams natural(std::size_t draw) const;
  EiModelParams model_params(std::size_t draw) const;
};

PosteriorSamples run_mcmc(const EventTimeline& tl, const PriorConfig& prior_cfg,
                          const McmcConfig& cfg);

}  // namespace eicoal
