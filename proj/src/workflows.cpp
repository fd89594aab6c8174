#include "eicoal/workflows.hpp"

#include <algorithm>
#include <cmath>

#include "eicoal/parallel.hpp"

namespace eicoal {

PriorConfig prior_preset(const std::string& name) {
  PriorConfig cfg;
  cfg.e0 = {std::log(1.1), 0.05};
  cfg.i0 = {std::log(1.1), 0.05};
  cfg.changepoint_interval = 7.0;
  if (name == "sim-fixed" || name == "sim-control" || name == "sim-increase") {
    cfg.gamma = {std::log(1.0 / 4.0), 0.25};
    cfg.nu = {std::log(1.0 / 7.0), 0.25};
    cfg.sigma_rw = {std::log(0.2), 0.1};
    cfg.r0 = name == "sim-increase" ? LogNormalPrior{std::log(1.2), 0.2}
                                    : LogNormalPrior{std::log(2.0), 0.2};
    return cfg;
  }
  if (name == "ebola-liberia") {
    cfg.gamma = {std::log(1.0 / 7.0), 0.45};
    cfg.nu = {std::log(1.0 / 7.0), 0.3};
    cfg.sigma_rw = {std::log(0.05), 0.2};
    cfg.r0 = {std::log(0.7), 0.5};
    return cfg;
  }
  throw ConfigError("unknown prior preset: " + name);
}

PiecewiseConstantFn scenario_r0(const std::string& name) {
  if (name == "fixed") return PiecewiseConstantFn::constant(2.2);
  if (name == "control") return {{84.0}, {2.2, 1.1}};
  if (name == "increase") {
    // Daily staircase from 1.3 to 2.3 across weeks 8-13.
    const double start = 56.0, len = 35.0;
    PiecewiseConstantFn fn;
    fn.values.push_back(1.3);
    for (int d = 1; d <= 35; ++d) {
      fn.breaks.push_back(start + d - 1);
      fn.values.push_back(1.3 + d / len);
    }
    return fn;
  }
  throw ConfigError("unknown scenario: " + name);
}

EpidemicStudyResult simulate_epidemic_study(const EpidemicStudyConfig& cfg) {
  const PiecewiseConstantFn r0 = scenario_r0(cfg.scenario);
  PiecewiseConstantFn beta = r0;
  for (double& v : beta.values) v *= cfg.nu;

  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    const std::uint64_t sim_seed = derive_seed(cfg.seed, 2 * attempt);
    const std::uint64_t tree_seed = derive_seed(cfg.seed, 2 * attempt + 1);
    SeirResult sim = simulate_seir_agents(cfg.population, beta, cfg.gamma, cfg.nu,
                                          cfg.init_infectious, cfg.t_end, sim_seed);
    try {
      EpidemicStudyResult out;
      out.samples.clear();
      out.tree = sample_and_build_tree(sim.history, cfg.sampling, tree_seed, &out.samples);
      out.sim = std::move(sim);
      out.attempts_used = attempt + 1;
      out.anchor_time = 0.0;
      for (const auto& s : out.samples) out.anchor_time = std::max(out.anchor_time, s.second);
      return out;
    } catch (const InsufficientEligible&) {
      continue;
    }
  }
  throw RejectionBudgetError("no epidemic produced enough eligible samples (rejection budget " +
                             std::to_string(cfg.max_attempts) + ")");
}

TruthGrid truth_r_grid(const SeirResult& sim, const PiecewiseConstantFn& r0_forward,
                       double anchor, double step, double max_back) {
  if (!(step > 0.0)) throw UsageError("truth grid step must be positive");
  TruthGrid grid;
  for (double t = 0.0; t <= max_back + 1e-9; t += step) {
    const double u = anchor - t;
    if (u < 0.0) break;
    grid.times.push_back(t);
    grid.r_true.push_back(r0_forward(u) * static_cast<double>(sim.s_at(u)) /
                          static_cast<double>(sim.n_pop));
  }
  grid.validate();
  return grid;
}

Eigen::MatrixXd r_draws_on_grid(const PosteriorSamples& samples,
                                const std::vector<double>& times_back) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(samples.n_draws()),
                    static_cast<Eigen::Index>(times_back.size()));
  for (std::size_t d = 0; d < samples.n_draws(); ++d)
    for (std::size_t c = 0; c < times_back.size(); ++c)
      m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(c)) =
          samples.r_at(d, times_back[c]);
  return m;
}

std::vector<double> FidelityResult::interval_medians(
    const std::vector<std::vector<double>>& arm) {
  if (arm.empty()) return {};
  const std::size_t n_intervals = arm.front().size();
  std::vector<double> medians(n_intervals);
  std::vector<double> xs;
  for (std::size_t j = 0; j < n_intervals; ++j) {
    xs.clear();
    for (const auto& rep : arm) xs.push_back(rep.at(j));
    medians[j] = empirical_quantile(xs, 0.5);
  }
  return medians;
}

FidelityResult run_fidelity_study(const FidelityConfig& cfg) {
  if (cfg.n_sampled < 2) throw ConfigError("need at least two sampled lineages");
  EIParams params;
  params.gamma = cfg.gamma;
  params.nu = cfg.nu;
  params.alpha = PiecewiseConstantFn::constant(cfg.alpha);

  // Shared ODE plug-in for the TT-ODE arm, solved on a regular grid.
  std::vector<double> grid;
  for (double u = 0.0; u < cfg.t_end; u += cfg.ode_grid_step) grid.push_back(u);
  grid.push_back(cfg.t_end);
  const DeterministicTrajectory ode = solve_on_grid(
      cfg.gamma, cfg.nu, {cfg.alpha / cfg.nu}, {}, 0.0, 1.0, grid);
  const BackwardsPopulation ode_view = backwards_view(ode, params.alpha, cfg.t_end);

  FidelityResult res;
  res.empirical.resize(static_cast<std::size_t>(cfg.n_trajectories));
  res.tt.resize(static_cast<std::size_t>(cfg.n_trajectories));
  res.tt_ode.resize(static_cast<std::size_t>(cfg.n_trajectories));
  std::vector<long long> attempts(static_cast<std::size_t>(cfg.n_trajectories), 0);
  std::vector<long long> tt_rej(static_cast<std::size_t>(cfg.n_trajectories), 0);
  std::vector<long long> ode_rej(static_cast<std::size_t>(cfg.n_trajectories), 0);

  parallel_for(cfg.n_trajectories, cfg.threads, [&](int rep) {
    const std::size_t r = static_cast<std::size_t>(rep);
    const std::uint64_t seed_rep = derive_seed(cfg.seed, static_cast<std::uint64_t>(rep));
    const CoalConfig coal{0, cfg.n_sampled};

    // Accepted trajectory: at least min_infectious infectious at the end.
    EiAgentsResult agents;
    bool accepted = false;
    for (int a = 0; a < cfg.max_sim_attempts; ++a) {
      ++attempts[r];
      agents = simulate_ei_agents(params, 0, 1, cfg.t_end,
                                  derive_seed(seed_rep, 4ULL * a));
      if (agents.trajectory.final_i() >= cfg.min_infectious) {
        accepted = true;
        // Empirical arm: the true genealogy of sampled infectious individuals.
        SamplingSpec spec{SamplingScheme::Isochronous, cfg.n_sampled, cfg.t_end, 0.0};
        const SampledTree tree = sample_and_build_tree(
            agents.history, spec, derive_seed(seed_rep, 4ULL * a + 1));
        res.empirical[r] = intercoalescent_intervals(extract_events(tree));
        break;
      }
    }
    if (!accepted)
      throw ConvergenceError("fidelity: no accepted trajectory within the budget");

    // TT arm against the same stochastic trajectory.
    const BackwardsPopulation view =
        backwards_view(agents.trajectory, params.alpha, cfg.t_end);
    const std::uint64_t tt_seed = derive_seed(seed_rep, 2);
    bool done = false;
    for (int j = 0; j < cfg.max_tt_attempts && !done; ++j) {
      const CoalSimResult sim =
          simulate_coalescent_tt(coal, view, cfg.gamma, derive_seed(tt_seed, j));
      if (sim.outcome == CoalOutcome::Completed) {
        res.tt[r] = intercoalescent_intervals(sim.timeline());
        done = true;
      } else {
        ++tt_rej[r];
      }
    }
    if (!done) throw ConvergenceError("fidelity: TT arm exhausted its attempts");

    // TT-ODE arm against the deterministic trajectory.
    const std::uint64_t ode_seed = derive_seed(seed_rep, 3);
    done = false;
    for (int j = 0; j < cfg.max_tt_attempts && !done; ++j) {
      const CoalSimResult sim =
          simulate_coalescent_tt(coal, ode_view, cfg.gamma, derive_seed(ode_seed, j));
      if (sim.outcome == CoalOutcome::Completed) {
        res.tt_ode[r] = intercoalescent_intervals(sim.timeline());
        done = true;
      } else {
        ++ode_rej[r];
      }
    }
    if (!done) throw ConvergenceError("fidelity: TT-ODE arm exhausted its attempts");
  });

  for (int rep = 0; rep < cfg.n_trajectories; ++rep) {
    const std::size_t r = static_cast<std::size_t>(rep);
    res.sim_attempts += attempts[r];
    res.tt_rejections += tt_rej[r];
    res.tt_ode_rejections += ode_rej[r];
  }
  return res;
}

}  // namespace eicoal
