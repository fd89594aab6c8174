#include "eicoal/inference.hpp"

#include <algorithm>
#include <cmath>

namespace eicoal {

void PriorConfig::validate() const {
  for (const auto* p : {&gamma, &nu, &e0, &i0, &r0, &sigma_rw})
    if (!(p->log_sd > 0.0)) throw ConfigError("prior scales must be positive");
  if (!(changepoint_interval > 0.0))
    throw ConfigError("changepoint interval must be positive");
}

GaussianPrior::GaussianPrior(const PriorConfig& cfg, int n_segments) : cfg_(cfg) {
  cfg.validate();
  if (n_segments < 1) throw ConfigError("need at least one R segment");
  layout_.n_segments = n_segments;
  rw_sd_ = std::exp(cfg.sigma_rw.log_mean);
  const int d = layout_.dim();
  mu_ = Eigen::VectorXd::Zero(d);
  mu_(layout_.gamma()) = cfg.gamma.log_mean;
  mu_(layout_.nu()) = cfg.nu.log_mean;
  mu_(layout_.e0()) = cfg.e0.log_mean;
  mu_(layout_.i0()) = cfg.i0.log_mean;
  for (int j = 0; j < n_segments; ++j) mu_(layout_.r(j)) = cfg.r0.log_mean;
  mu_(layout_.sigma()) = cfg.sigma_rw.log_mean;

  cov_ = Eigen::MatrixXd::Zero(d, d);
  cov_(layout_.gamma(), layout_.gamma()) = cfg.gamma.log_sd * cfg.gamma.log_sd;
  cov_(layout_.nu(), layout_.nu()) = cfg.nu.log_sd * cfg.nu.log_sd;
  cov_(layout_.e0(), layout_.e0()) = cfg.e0.log_sd * cfg.e0.log_sd;
  cov_(layout_.i0(), layout_.i0()) = cfg.i0.log_sd * cfg.i0.log_sd;
  cov_(layout_.sigma(), layout_.sigma()) = cfg.sigma_rw.log_sd * cfg.sigma_rw.log_sd;
  const double v0 = cfg.r0.log_sd * cfg.r0.log_sd;
  const double vw = rw_sd_ * rw_sd_;
  for (int a = 0; a < n_segments; ++a)
    for (int b = 0; b < n_segments; ++b)
      cov_(layout_.r(a), layout_.r(b)) = v0 + vw * std::min(a, b);

  llt_.compute(cov_);
  if (llt_.info() != Eigen::Success)
    throw NumericalError("prior covariance is not positive definite");
}

double GaussianPrior::log_density(const Eigen::VectorXd& q) const {
  if (q.size() != dim()) throw UsageError("log_prior: dimension mismatch");
  const Eigen::VectorXd half = llt_.matrixL().solve(q);
  double log_det_half = 0.0;
  const auto& l = llt_.matrixLLT();
  for (int j = 0; j < dim(); ++j) log_det_half += std::log(l(j, j));
  return -0.5 * half.squaredNorm() - log_det_half -
         0.5 * dim() * std::log(2.0 * M_PI);
}

Eigen::VectorXd GaussianPrior::sample(Rng& rng) const {
  Eigen::VectorXd q(dim());
  q(layout_.gamma()) = cfg_.gamma.log_sd * rng.normal();
  q(layout_.nu()) = cfg_.nu.log_sd * rng.normal();
  q(layout_.e0()) = cfg_.e0.log_sd * rng.normal();
  q(layout_.i0()) = cfg_.i0.log_sd * rng.normal();
  q(layout_.r(0)) = cfg_.r0.log_sd * rng.normal();
  for (int j = 1; j < layout_.n_segments; ++j)
    q(layout_.r(j)) = q(layout_.r(j - 1)) + rw_sd_ * rng.normal();
  q(layout_.sigma()) = cfg_.sigma_rw.log_sd * rng.normal();
  return q;
}

NaturalParams GaussianPrior::to_natural(const Eigen::VectorXd& q) const {
  if (q.size() != dim()) throw UsageError("to_natural: dimension mismatch");
  NaturalParams p;
  p.gamma = std::exp(q(layout_.gamma()) + mu_(layout_.gamma()));
  p.nu = std::exp(q(layout_.nu()) + mu_(layout_.nu()));
  p.e0 = std::exp(q(layout_.e0()) + mu_(layout_.e0()));
  p.i0 = std::exp(q(layout_.i0()) + mu_(layout_.i0()));
  p.sigma = std::exp(q(layout_.sigma()) + mu_(layout_.sigma()));
  p.r.resize(static_cast<std::size_t>(layout_.n_segments));
  for (int j = 0; j < layout_.n_segments; ++j)
    p.r[static_cast<std::size_t>(j)] = std::exp(q(layout_.r(j)) + mu_(layout_.r(j)));
  return p;
}

double log_prior(const Eigen::VectorXd& q, const GaussianPrior& prior) {
  return prior.log_density(q);
}

int ess_step(ChainState& state, const GaussianPrior& prior, const TargetFn& target,
             Rng& rng, int max_shrink) {
  const Eigen::VectorXd psi = prior.sample(rng);
  const double log_y = state.loglik + std::log(rng.uniform());
  double theta = rng.uniform(0.0, 2.0 * M_PI);
  double theta_min = theta - 2.0 * M_PI;
  double theta_max = theta;
  for (int proposals = 1; proposals <= max_shrink; ++proposals) {
    const Eigen::VectorXd q_prop =
        state.q * std::cos(theta) + psi * std::sin(theta);
    const TargetResult res = target(q_prop);
    if (res.valid && res.loglik > log_y) {
      state.q = q_prop;
      state.loglik = res.loglik;
      state.traj = res.traj;
      return proposals;
    }
    if (theta < 0.0)
      theta_min = theta;
    else
      theta_max = theta;
    theta = rng.uniform(theta_min, theta_max);
  }
  throw ConvergenceError("elliptical slice bracket failed to shrink to acceptance");
}

namespace {

std::vector<double> forward_grid(const EventTimeline& tl) {
  const double span = tl.span();
  std::vector<double> grid;
  grid.reserve(tl.size());
  for (std::size_t i = tl.size(); i-- > 0;) grid.push_back(span - tl[i].time);
  return grid;
}

std::vector<double> forward_changepoints(double span, double interval, int needed) {
  // Backwards changepoints at j*interval map to forward span - j*interval.
  std::vector<double> cps;
  for (int j = needed - 1; j >= 1; --j) cps.push_back(span - j * interval);
  return cps;
}

DeterministicTrajectory solve_for(const EventTimeline& tl, const EiModelParams& params,
                                  double e0, double i0) {
  const double span = tl.span();
  const int needed = params.segments_needed(span);
  const int m = static_cast<int>(params.r_segments.size());
  if (m < needed) throw ConfigError("R vector shorter than the grid needs");
  // The figure-of-merit grid is the timeline itself (reversed); changepoints
  // are grid events, hence already present.
  std::vector<double> r_used(params.r_segments.end() - needed, params.r_segments.end());
  return solve_on_grid(params.gamma, params.nu, r_used,
                       forward_changepoints(span, params.changepoint_interval, needed),
                       e0, i0, forward_grid(tl));
}

constexpr double kPopulationCap = 8e9;

}  // namespace

namespace {

struct CoalescentTarget {
  const EventTimeline* tl;
  const GaussianPrior* prior;
  const std::vector<int>* labels;

  TargetResult operator()(const Eigen::VectorXd& q) const {
    TargetResult out;
    const NaturalParams p = prior->to_natural(q);
    EiModelParams mp;
    mp.gamma = p.gamma;
    mp.nu = p.nu;
    mp.r_segments = p.r;
    mp.changepoint_interval = prior->changepoint_interval();
    DeterministicTrajectory traj;
    try {
      traj = solve_for(*tl, mp, p.e0, p.i0);
    } catch (const NumericalError&) {
      return out;
    }
    if (!(traj.max_total() <= kPopulationCap)) return out;  // W cap (also inf/nan)
    double ll;
    try {
      ll = augmented_loglik(*tl, *labels, mp, traj);
    } catch (const NumericalError&) {
      return out;
    }
    if (!std::isfinite(ll)) return out;  // V violations land here as -inf
    out.valid = true;
    out.loglik = ll;
    out.traj = std::move(traj);
    return out;
  }
};

}  // namespace

TargetFn make_coalescent_target(const EventTimeline& tl, const GaussianPrior& prior,
                                const std::vector<int>* labels) {
  return CoalescentTarget{&tl, &prior, labels};
}

LatentDraw sample_latent_states(const EventTimeline& tl, const EiModelParams& params,
                                const DeterministicTrajectory& traj, Rng& rng) {
  tl.validate();
  const double span = tl.span();
  LatentDraw draw;
  draw.n_exposed.assign(tl.size(), 0);
  draw.loglik = 0.0;

  const auto feasible = [&](std::size_t i, int ne) {
    const double u = span - tl[i].time;
    const int ni = tl[i].k - ne;
    return ne <= traj.e_at(u) && ni <= traj.i_at(u);
  };

  // All sampled individuals are infectious, so the state at t=0 is known.
  if (!feasible(0, 0))
    throw LatentInfeasible("initial sample exceeds the population plug-in");

  std::vector<double> weights;
  for (std::size_t i = 1; i < tl.size(); ++i) {
    IntervalContext ctx;
    try {
      ctx = interval_context(tl, i, params, traj);
    } catch (const RateDomainError&) {
      throw LatentInfeasible("population plug-in not positive on an interval");
    }
    ScaledRow row;
    TridiagonalRates rates;
    try {
      rates = build_rates(ctx);
      row = transition_row(ctx, draw.n_exposed[i - 1]);
    } catch (const NumericalError&) {
      throw LatentInfeasible("interval transition not computable");
    }
    const bool coal = tl[i].type == EventType::Coalescent;
    const int hi = coal ? ctx.k - 2 : std::min(ctx.k, tl[i].k);
    weights.assign(static_cast<std::size_t>(std::max(hi + 1, 0)), 0.0);
    double total = 0.0;
    for (int ne = 0; ne <= hi; ++ne) {
      if (!feasible(i, ne)) continue;
      const double w =
          coal ? row.values(ne + 1) * rates.absorb[static_cast<std::size_t>(ne) + 1]
               : row.values(ne);
      weights[static_cast<std::size_t>(ne)] = w;
      total += w;
    }
    if (!(total > 0.0)) throw LatentInfeasible("no feasible continuation state");
    const int ne = static_cast<int>(rng.discrete(weights, total));
    draw.n_exposed[i] = ne;
    draw.loglik += std::log(weights[static_cast<std::size_t>(ne)]) + row.log_scale;
  }
  return draw;
}

double PosteriorSamples::r_at(std::size_t draw, double t_back) const {
  const double interval = changepoint_interval;
  const int needed =
      std::max(1, static_cast<int>(std::ceil(span / interval - 1e-12)));
  int back = static_cast<int>(std::floor(t_back / interval));
  back = std::clamp(back, 0, needed - 1);
  const int idx = n_segments - 1 - back;
  // R columns sit after gamma, nu, e0, i0.
  return draws(static_cast<Eigen::Index>(draw), 4 + idx);
}

NaturalParams PosteriorSamples::natural(std::size_t d) const {
  NaturalParams p;
  const auto row = draws.row(static_cast<Eigen::Index>(d));
  p.gamma = row(0);
  p.nu = row(1);
  p.e0 = row(2);
  p.i0 = row(3);
  p.r.resize(static_cast<std::size_t>(n_segments));
  for (int j = 0; j < n_segments; ++j) p.r[static_cast<std::size_t>(j)] = row(4 + j);
  p.sigma = row(4 + n_segments);
  return p;
}

EiModelParams PosteriorSamples::model_params(std::size_t d) const {
  const NaturalParams p = natural(d);
  EiModelParams mp;
  mp.gamma = p.gamma;
  mp.nu = p.nu;
  mp.r_segments = p.r;
  mp.changepoint_interval = changepoint_interval;
  return mp;
}

PosteriorSamples run_mcmc(const EventTimeline& tl, const PriorConfig& prior_cfg,
                          const McmcConfig& cfg) {
  tl.validate();
  if (tl.coalescent_count() < 1)
    throw UsageError("timeline needs at least one coalescent event");
  if (cfg.iterations < 1 || cfg.thinning < 1) throw ConfigError("bad run lengths");
  const int burn_in = cfg.burn_in >= 0 ? cfg.burn_in : cfg.iterations / 2;
  if (burn_in >= cfg.iterations) throw ConfigError("burn-in exceeds iterations");

  const double span = tl.span();
  EiModelParams probe;
  probe.changepoint_interval = prior_cfg.changepoint_interval;
  const int n_segments = probe.segments_needed(span);
  const GaussianPrior prior(prior_cfg, n_segments);

  Rng rng(cfg.seed);
  ChainState state;
  const TargetFn target = make_coalescent_target(tl, prior, &state.n_exposed);

  const auto params_of = [&](const Eigen::VectorXd& q) {
    const NaturalParams p = prior.to_natural(q);
    EiModelParams mp;
    mp.gamma = p.gamma;
    mp.nu = p.nu;
    mp.r_segments = p.r;
    mp.changepoint_interval = prior_cfg.changepoint_interval;
    return mp;
  };

  // Initialization: prior draws until the trajectory admits the data (V, W).
  bool initialized = false;
  for (int attempt = 0; attempt < cfg.max_init_tries && !initialized; ++attempt) {
    const Eigen::VectorXd q = prior.sample(rng);
    const NaturalParams p = prior.to_natural(q);
    const EiModelParams mp = params_of(q);
    DeterministicTrajectory traj;
    try {
      traj = solve_for(tl, mp, p.e0, p.i0);
    } catch (const NumericalError&) {
      continue;
    }
    if (!(traj.max_total() <= kPopulationCap)) continue;
    try {
      LatentDraw draw = sample_latent_states(tl, mp, traj, rng);
      state.q = q;
      state.loglik = draw.loglik;
      state.traj = std::move(traj);
      state.n_exposed = std::move(draw.n_exposed);
      initialized = true;
    } catch (const LatentInfeasible&) {
    }
  }
  if (!initialized)
    throw ConvergenceError(
        "failed to find a feasible initial state from the prior (" +
        std::to_string(cfg.max_init_tries) + " attempts)");

  PosteriorSamples out;
  out.span = span;
  out.changepoint_interval = prior_cfg.changepoint_interval;
  out.n_segments = n_segments;
  out.seed = cfg.seed;
  out.iterations = cfg.iterations;
  out.burn_in = burn_in;
  out.thinning = cfg.thinning;
  out.names = {"gamma", "nu", "e0", "i0"};
  for (int j = 0; j < n_segments; ++j) out.names.push_back("r" + std::to_string(j));
  out.names.push_back("sigma_rw");

  const std::size_t n_keep =
      static_cast<std::size_t>((cfg.iterations - burn_in) / cfg.thinning);
  out.draws.resize(static_cast<Eigen::Index>(n_keep), prior.dim());
  out.logliks.reserve(n_keep);

  long long total_proposals = 0;
  std::size_t kept = 0;
  for (int it = 0; it < cfg.iterations; ++it) {
    total_proposals += ess_step(state, prior, target, rng, cfg.max_shrink);

    const EiModelParams mp = params_of(state.q);
    bool redrew = false;
    for (int retry = 0; retry < cfg.max_latent_retries && !redrew; ++retry) {
      try {
        LatentDraw draw = sample_latent_states(tl, mp, state.traj, rng);
        state.n_exposed = std::move(draw.n_exposed);
        state.loglik = draw.loglik;
        redrew = true;
      } catch (const LatentInfeasible&) {
        ++out.latent_retries;
      }
    }
    if (!redrew)
      throw ConvergenceError("latent-state sampler found no feasible labels");

    // Cache audit: the stored log-likelihood must match a recomputation.
    if (rng.uniform() < 0.01) {
      const double full = augmented_loglik(tl, state.n_exposed, mp, state.traj);
      if (!(std::abs(full - state.loglik) <=
            1e-10 * std::max(1.0, std::abs(full))))
        throw InvariantError("cached log-likelihood diverged from recomputation");
    }

    if (it >= burn_in && (it - burn_in) % cfg.thinning == 0 && kept < n_keep) {
      const NaturalParams p = prior.to_natural(state.q);
      Eigen::VectorXd row(prior.dim());
      row(0) = p.gamma;
      row(1) = p.nu;
      row(2) = p.e0;
      row(3) = p.i0;
      for (int j = 0; j < n_segments; ++j) row(4 + j) = p.r[static_cast<std::size_t>(j)];
      row(4 + n_segments) = p.sigma;
      out.draws.row(static_cast<Eigen::Index>(kept)) = row;
      out.logliks.push_back(state.loglik);
      ++kept;
    }
  }
  out.draws.conservativeResize(static_cast<Eigen::Index>(kept), prior.dim());
  out.mean_proposals_per_step =
      static_cast<double>(total_proposals) / static_cast<double>(cfg.iterations);
  return out;
}

}  // namespace eicoal
