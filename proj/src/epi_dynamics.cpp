#include "eicoal/epi_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace eicoal {

const char* mark_name(Mark m) {
  switch (m) {
    case Mark::Birth: return "birth";
    case Mark::Migration: return "migration";
    case Mark::Death: return "death";
  }
  return "?";
}

int PopulationTrajectory::e_at(double u) const {
  int e = e0;
  for (const auto& ev : events) {
    if (ev.time > u) break;
    e = ev.e;
  }
  return e;
}

int PopulationTrajectory::i_at(double u) const {
  int i = i0;
  for (const auto& ev : events) {
    if (ev.time > u) break;
    i = ev.i;
  }
  return i;
}

void EIParams::validate() const {
  // gamma = 0 is allowed for degenerate simulation-only cases (pure death);
  // the likelihood machinery has its own positivity domain.
  if (gamma < 0.0 || !(nu > 0.0))
    throw ConfigError("need gamma >= 0 and nu > 0");
  alpha.validate();
  for (double v : alpha.values)
    if (v < 0.0) throw ConfigError("alpha must be nonnegative");
}

namespace {

// Shared Gillespie loop. The callback applies one event and returns the new
// (e, i); piecewise-constant alpha is handled exactly by restricting each
// exponential draw to the current constant-rate segment and redrawing at
// segment boundaries.
template <typename OnEvent>
void gillespie_ei(const EIParams& params, int e0, int i0, double t_end, Rng& rng,
                  OnEvent&& on_event) {
  params.validate();
  if (e0 < 0 || i0 < 0 || e0 + i0 < 1) throw UsageError("need at least one individual");
  if (!(t_end > 0.0)) throw UsageError("t_end must be positive");
  double t = 0.0;
  int e = e0, i = i0;
  std::size_t seg = 0;
  const auto& breaks = params.alpha.breaks;
  while (seg < breaks.size() && breaks[seg] <= t) ++seg;
  while (e + i > 0) {
    const double alpha = params.alpha.values[seg];
    const double seg_end = seg < breaks.size() ? std::min(breaks[seg], t_end) : t_end;
    const double birth = alpha * i;
    const double mig = params.gamma * e;
    const double death = params.nu * i;
    const double total = birth + mig + death;
    if (total <= 0.0) {
      if (seg_end >= t_end) break;
      t = seg_end;
      ++seg;
      continue;
    }
    const double dt = rng.exponential(total);
    if (t + dt >= seg_end) {
      if (seg_end >= t_end) break;
      t = seg_end;
      ++seg;
      continue;
    }
    t += dt;
    const double x = rng.uniform() * total;
    Mark mark;
    if (x < birth) {
      mark = Mark::Birth;
      ++e;
    } else if (x < birth + mig) {
      mark = Mark::Migration;
      --e;
      ++i;
    } else {
      mark = Mark::Death;
      --i;
    }
    on_event(t, mark, e, i);
  }
}

}  // namespace

PopulationTrajectory simulate_ei(const EIParams& params, int e0, int i0, double t_end,
                                 std::uint64_t seed) {
  PopulationTrajectory traj;
  traj.e0 = e0;
  traj.i0 = i0;
  traj.t_end = t_end;
  if (e0 + i0 == 0) return traj;  // nothing to simulate; constant at (0,0)
  Rng rng(seed);
  gillespie_ei(params, e0, i0, t_end, rng, [&](double t, Mark m, int e, int i) {
    traj.events.push_back({t, m, e, i});
  });
  return traj;
}

EiAgentsResult simulate_ei_agents(const EIParams& params, int e0, int i0, double t_end,
                                  std::uint64_t seed) {
  EiAgentsResult res;
  res.trajectory.e0 = e0;
  res.trajectory.i0 = i0;
  res.trajectory.t_end = t_end;
  std::vector<int> exposed, infectious;
  for (int j = 0; j < e0; ++j) {
    res.history.individuals.push_back({-1, 0.0, kNoTime, kNoTime, kNoTime});
    exposed.push_back(j);
  }
  for (int j = 0; j < i0; ++j) {
    res.history.individuals.push_back({-1, 0.0, 0.0, kNoTime, kNoTime});
    infectious.push_back(e0 + j);
  }
  if (e0 + i0 == 0) return res;
  Rng rng(seed);
  gillespie_ei(params, e0, i0, t_end, rng, [&](double t, Mark m, int e, int i) {
    switch (m) {
      case Mark::Birth: {
        const int src = infectious[rng.uniform_int(infectious.size())];
        const int id = static_cast<int>(res.history.individuals.size());
        res.history.individuals.push_back({src, t, kNoTime, kNoTime, kNoTime});
        exposed.push_back(id);
        break;
      }
      case Mark::Migration: {
        const std::size_t at = rng.uniform_int(exposed.size());
        const int id = exposed[at];
        exposed[at] = exposed.back();
        exposed.pop_back();
        res.history.individuals[static_cast<std::size_t>(id)].t_onset = t;
        infectious.push_back(id);
        break;
      }
      case Mark::Death: {
        const std::size_t at = rng.uniform_int(infectious.size());
        const int id = infectious[at];
        infectious[at] = infectious.back();
        infectious.pop_back();
        res.history.individuals[static_cast<std::size_t>(id)].t_removal = t;
        break;
      }
    }
    res.trajectory.events.push_back({t, m, e, i});
  });
  return res;
}

int SeirResult::s_at(double u) const {
  int s = s0;
  for (const auto& p : susceptible) {
    if (p.first > u) break;
    s = p.second;
  }
  return s;
}

SeirResult simulate_seir_agents(int n_pop, const PiecewiseConstantFn& beta, double gamma,
                                double nu, int init_infectious, double t_end,
                                std::uint64_t seed) {
  if (n_pop < 1) throw UsageError("population must be at least 1");
  if (init_infectious < 1 || init_infectious > n_pop)
    throw UsageError("initial infectious count must be in [1, N]");
  if (!(gamma > 0.0) || !(nu > 0.0)) throw ConfigError("gamma and nu must be positive");
  beta.validate();
  for (double v : beta.values)
    if (v < 0.0) throw ConfigError("beta must be nonnegative");

  SeirResult res;
  res.n_pop = n_pop;
  res.s0 = n_pop - init_infectious;
  res.trajectory.e0 = 0;
  res.trajectory.i0 = init_infectious;
  res.trajectory.t_end = t_end;

  std::vector<int> exposed, infectious;
  for (int j = 0; j < init_infectious; ++j) {
    res.history.individuals.push_back({-1, 0.0, 0.0, kNoTime, kNoTime});
    infectious.push_back(j);
  }

  Rng rng(seed);
  double t = 0.0;
  int s = res.s0;
  std::size_t seg = 0;
  while (seg < beta.breaks.size() && beta.breaks[seg] <= t) ++seg;
  while (!exposed.empty() || !infectious.empty()) {
    const double b = beta.values[seg];
    const double seg_end =
        seg < beta.breaks.size() ? std::min(beta.breaks[seg], t_end) : t_end;
    const double infect =
        b * static_cast<double>(s) * static_cast<double>(infectious.size()) / n_pop;
    const double onset = gamma * static_cast<double>(exposed.size());
    const double removal = nu * static_cast<double>(infectious.size());
    const double total = infect + onset + removal;
    if (total <= 0.0) {
      if (seg_end >= t_end) break;
      t = seg_end;
      ++seg;
      continue;
    }
    const double dt = rng.exponential(total);
    if (t + dt >= seg_end) {
      if (seg_end >= t_end) break;
      t = seg_end;
      ++seg;
      continue;
    }
    t += dt;
    const double x = rng.uniform() * total;
    if (x < infect) {
      const int src = infectious[rng.uniform_int(infectious.size())];
      const int id = static_cast<int>(res.history.individuals.size());
      res.history.individuals.push_back({src, t, kNoTime, kNoTime, kNoTime});
      exposed.push_back(id);
      --s;
      res.susceptible.emplace_back(t, s);
      res.trajectory.events.push_back(
          {t, Mark::Birth, static_cast<int>(exposed.size()),
           static_cast<int>(infectious.size())});
    } else if (x < infect + onset) {
      const std::size_t at = rng.uniform_int(exposed.size());
      const int id = exposed[at];
      exposed[at] = exposed.back();
      exposed.pop_back();
      res.history.individuals[static_cast<std::size_t>(id)].t_onset = t;
      infectious.push_back(id);
      res.trajectory.events.push_back(
          {t, Mark::Migration, static_cast<int>(exposed.size()),
           static_cast<int>(infectious.size())});
    } else {
      const std::size_t at = rng.uniform_int(infectious.size());
      const int id = infectious[at];
      infectious[at] = infectious.back();
      infectious.pop_back();
      res.history.individuals[static_cast<std::size_t>(id)].t_removal = t;
      res.trajectory.events.push_back(
          {t, Mark::Death, static_cast<int>(exposed.size()),
           static_cast<int>(infectious.size())});
    }
  }
  return res;
}

namespace {

// True if some ancestor in v's infection chain was sampled before the chain
// step leaving it, which makes v ineligible for sampling.
bool excluded_by_prior_sampling(const InfectionHistory& history, int v) {
  int c = v;
  while (true) {
    const auto& child = history.individuals[static_cast<std::size_t>(c)];
    const int p = child.infector;
    if (p < 0) return false;
    const auto& parent = history.individuals[static_cast<std::size_t>(p)];
    if (parent.sampled() && child.t_infect > parent.t_sample) return true;
    c = p;
  }
}

}  // namespace

SampledTree sample_and_build_tree(const InfectionHistory& history,
                                  const SamplingSpec& spec, std::uint64_t seed,
                                  std::vector<std::pair<int, double>>* samples_out) {
  if (spec.n_samples < 2) throw UsageError("need at least 2 samples");
  Rng rng(seed);
  InfectionHistory work = history;  // t_sample is written into a copy
  const int n_ind = static_cast<int>(work.individuals.size());

  std::vector<double> draw_times;
  if (spec.scheme == SamplingScheme::Isochronous) {
    draw_times.assign(static_cast<std::size_t>(spec.n_samples), spec.at_time);
  } else {
    for (int j = 0; j < spec.n_samples; ++j)
      draw_times.push_back(rng.uniform(spec.at_time - spec.window_days, spec.at_time));
    std::sort(draw_times.begin(), draw_times.end());
  }

  std::vector<int> sampled_ids;
  std::vector<int> eligible;
  for (double tau : draw_times) {
    eligible.clear();
    for (int v = 0; v < n_ind; ++v) {
      const auto& ind = work.individuals[static_cast<std::size_t>(v)];
      if (!ind.infectious_at(tau) || ind.sampled()) continue;
      if (excluded_by_prior_sampling(work, v)) continue;
      eligible.push_back(v);
    }
    if (eligible.empty())
      throw InsufficientEligible("no eligible infectious individual at a sampling time");
    const int v = eligible[rng.uniform_int(eligible.size())];
    work.individuals[static_cast<std::size_t>(v)].t_sample = tau;
    sampled_ids.push_back(v);
    if (samples_out) samples_out->emplace_back(v, tau);
  }

  // Reduce the transmission chains of the samples to their genealogy. Within
  // a host, the pathogen lineage branches at each onward infection that leads
  // to a sample; merging those branch points from latest to earliest gives
  // the host's local subtree, which then exits through the host's own
  // infection event.
  std::vector<char> relevant(static_cast<std::size_t>(n_ind), 0);
  for (int v : sampled_ids) {
    int c = v;
    while (c >= 0 && !relevant[static_cast<std::size_t>(c)]) {
      relevant[static_cast<std::size_t>(c)] = 1;
      c = work.individuals[static_cast<std::size_t>(c)].infector;
    }
  }
  int root_host = -1;
  for (int v = 0; v < n_ind; ++v) {
    if (!relevant[static_cast<std::size_t>(v)]) continue;
    if (work.individuals[static_cast<std::size_t>(v)].infector < 0) {
      // Samples spanning several index cases have no common ancestor; treat
      // as a rejection so callers can re-seed.
      if (root_host >= 0)
        throw InsufficientEligible("samples do not share a single index case");
      root_host = v;
    }
  }

  struct Handle {
    int node = -1;
    double time = 0.0;  // forward time of the node
  };
  struct Item {
    double attach_time;  // branch point inside the host
    Handle handle;
  };
  SampledTree tree;
  std::vector<double> node_time;
  std::vector<std::vector<Item>> items(static_cast<std::size_t>(n_ind));

  const auto make_tip = [&](int v) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.back().label = std::to_string(v);
    node_time.push_back(work.individuals[static_cast<std::size_t>(v)].t_sample);
    return id;
  };
  const auto join = [&](double t, const Handle& a, const Handle& b) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    node_time.push_back(t);
    for (const Handle& h : {a, b}) {
      tree.nodes[static_cast<std::size_t>(h.node)].parent = id;
      tree.nodes[static_cast<std::size_t>(h.node)].branch_length = h.time - t;
      tree.nodes[static_cast<std::size_t>(id)].children.push_back(h.node);
    }
    return Handle{id, t};
  };

  // Hosts in decreasing infection-time order: children before their infector.
  std::vector<int> order;
  for (int v = 0; v < n_ind; ++v)
    if (relevant[static_cast<std::size_t>(v)]) order.push_back(v);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return work.individuals[static_cast<std::size_t>(a)].t_infect >
           work.individuals[static_cast<std::size_t>(b)].t_infect;
  });

  Handle root_handle{-1, 0.0};
  for (int w : order) {
    auto& host_items = items[static_cast<std::size_t>(w)];
    const auto& ind = work.individuals[static_cast<std::size_t>(w)];
    if (ind.sampled())
      host_items.push_back({ind.t_sample, Handle{make_tip(w), ind.t_sample}});
    std::sort(host_items.begin(), host_items.end(),
              [](const Item& a, const Item& b) { return a.attach_time < b.attach_time; });
    if (host_items.empty()) throw InvariantError("relevant host without samples");
    Handle cur = host_items.back().handle;
    for (std::size_t j = host_items.size() - 1; j-- > 0;)
      cur = join(host_items[j].attach_time, cur, host_items[j].handle);
    if (ind.infector >= 0) {
      items[static_cast<std::size_t>(ind.infector)].push_back({ind.t_infect, cur});
    } else {
      root_handle = cur;
    }
  }
  if (root_handle.node < 0) throw InvariantError("genealogy reduction lost the root");
  tree.root = root_handle.node;
  tree.validate();
  return tree;
}

void write_trajectory_csv(std::ostream& os, const PopulationTrajectory& traj) {
  char buf[40];
  os << "time,e,i,mark\n";
  std::snprintf(buf, sizeof buf, "%.17g", 0.0);
  os << buf << ',' << traj.e0 << ',' << traj.i0 << ",init\n";
  for (const auto& ev : traj.events) {
    std::snprintf(buf, sizeof buf, "%.17g", ev.time);
    os << buf << ',' << ev.e << ',' << ev.i << ',' << mark_name(ev.mark) << '\n';
  }
}

void write_history_csv(std::ostream& os, const InfectionHistory& history) {
  os << "id,infector,t_infect,t_onset,t_removal,t_sample\n";
  char buf[40];
  const auto field = [&](double v) -> std::string {
    if (v != v) return "";
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  };
  for (std::size_t id = 0; id < history.individuals.size(); ++id) {
    const auto& ind = history.individuals[id];
    os << id << ',' << ind.infector << ',' << field(ind.t_infect) << ','
       << field(ind.t_onset) << ',' << field(ind.t_removal) << ','
       << field(ind.t_sample) << '\n';
  }
}

}  // namespace eicoal
