#include "eicoal/coal_sim.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace eicoal {

namespace {

BackwardsPopulation build_view(const std::vector<double>& fwd_breaks,
                               const std::vector<double>& alpha_breaks,
                               double horizon,
                               const std::function<double(double)>& e_of,
                               const std::function<double(double)>& i_of,
                               const PiecewiseConstantFn& alpha_forward) {
  std::vector<double> backs{0.0};
  for (double u : fwd_breaks)
    if (u > 0.0 && u < horizon) backs.push_back(horizon - u);
  for (double u : alpha_breaks)
    if (u > 0.0 && u < horizon) backs.push_back(horizon - u);
  std::sort(backs.begin(), backs.end());
  backs.erase(std::unique(backs.begin(), backs.end()), backs.end());

  BackwardsPopulation view;
  view.horizon = horizon;
  for (std::size_t j = 0; j < backs.size(); ++j) {
    const double b = backs[j];
    const double b_next = j + 1 < backs.size() ? backs[j + 1] : horizon;
    const double mid = 0.5 * (b + b_next);
    const double u = std::clamp(horizon - mid, 0.0, horizon);
    view.segments.push_back({b, e_of(u), i_of(u), alpha_forward(u)});
  }
  return view;
}

}  // namespace

BackwardsPopulation backwards_view(const PopulationTrajectory& traj,
                                   const PiecewiseConstantFn& alpha_forward,
                                   double horizon) {
  std::vector<double> breaks;
  for (const auto& ev : traj.events) breaks.push_back(ev.time);
  return build_view(
      breaks, alpha_forward.breaks, horizon,
      [&](double u) { return static_cast<double>(traj.e_at(u)); },
      [&](double u) { return static_cast<double>(traj.i_at(u)); }, alpha_forward);
}

BackwardsPopulation backwards_view(const DeterministicTrajectory& traj,
                                   const PiecewiseConstantFn& alpha_forward,
                                   double horizon) {
  return build_view(
      traj.times, alpha_forward.breaks, horizon,
      [&](double u) { return traj.e_at(u); }, [&](double u) { return traj.i_at(u); },
      alpha_forward);
}

EventTimeline CoalSimResult::timeline() const {
  EventTimeline tl;
  int k = n_e0 + n_i0;
  tl.events.push_back({0.0, EventType::Sampling, k, k});
  for (double t : coalescence_times) {
    k -= 1;
    tl.events.push_back({t, EventType::Coalescent, 0, k});
  }
  return tl;
}

CoalSimResult simulate_coalescent_tt(const CoalConfig& config,
                                     const BackwardsPopulation& pop, double gamma,
                                     std::uint64_t seed) {
  if (config.n_e < 0 || config.n_i < 0 || config.n_e + config.n_i < 2)
    throw UsageError("need at least two sampled lineages");
  if (pop.segments.empty() || pop.segments.front().t_begin != 0.0)
    throw UsageError("backwards population view must start at t=0");

  Rng rng(seed);
  CoalSimResult res;
  res.n_e0 = config.n_e;
  res.n_i0 = config.n_i;
  int ne = config.n_e, ni = config.n_i;
  double t = 0.0;
  std::size_t seg = 0;

  const auto feasible = [&](const BackwardsPopulation::Segment& s) {
    return ne <= s.e && ni <= s.i;
  };
  const auto seg_end = [&](std::size_t j) {
    return j + 1 < pop.segments.size() ? pop.segments[j + 1].t_begin : pop.horizon;
  };

  if (!feasible(pop.segments[seg])) {
    res.outcome = CoalOutcome::Rejected;
    return res;
  }

  while (ne + ni > 1) {
    const auto& s = pop.segments[seg];
    double r_coal = 0.0, r_mig = 0.0, r_cmig = 0.0;
    if (ne > 0 && ni > 0) r_coal = ne * ni * s.alpha / s.e;
    if (ni > 0) r_mig = ni * gamma * (s.e + 1.0) / s.i;
    if (ne > 0 && s.i > ni) r_cmig = ne * (s.i - ni) * s.alpha / s.e;
    const double total = r_coal + r_mig + r_cmig;

    const double end = seg_end(seg);
    double budget = rng.exponential(1.0);
    if (total * (end - t) < budget) {
      // No event before the segment boundary; the leftover exponential budget
      // is discarded and redrawn (memorylessness).
      t = end;
      if (t >= pop.horizon) {
        res.outcome = CoalOutcome::ReachedHorizon;
        return res;
      }
      ++seg;
      if (!feasible(pop.segments[seg])) {
        res.outcome = CoalOutcome::Rejected;
        return res;
      }
      continue;
    }
    t += budget / total;
    const double x = rng.uniform() * total;
    CoalStepKind kind;
    if (x < r_coal) {
      kind = CoalStepKind::Coalescence;
      ne -= 1;
      res.coalescence_times.push_back(t);
    } else if (x < r_coal + r_mig) {
      kind = CoalStepKind::Migration;
      ne += 1;
      ni -= 1;
    } else {
      kind = CoalStepKind::CoalescentMigration;
      ne -= 1;
      ni += 1;
    }
    res.steps.push_back({t, kind, ne, ni});
    if (!feasible(pop.segments[seg])) {
      res.outcome = CoalOutcome::Rejected;
      return res;
    }
  }
  res.outcome = CoalOutcome::Completed;
  return res;
}

JumpChainResult jump_chain_sample(const PopulationTrajectory& realization, int n_e,
                                  int n_i, std::uint64_t seed) {
  if (n_e < 0 || n_i < 0 || n_e + n_i < 1) throw UsageError("empty sample");
  if (n_e > realization.final_e() || n_i > realization.final_i())
    throw UsageError("sample exceeds the terminal population state");

  Rng rng(seed);
  JumpChainResult res;
  int ne = n_e, ni = n_i;
  for (std::size_t idx = realization.events.size(); idx-- > 0;) {
    const auto& ev = realization.events[idx];
    const double e_pop = ev.e;
    const double i_pop = ev.i;
    JumpStep step;
    step.event_index = idx;
    switch (ev.mark) {
      case Mark::Birth: {
        const double p_coal = e_pop > 0 ? (ne / e_pop) * (ni / i_pop) : 0.0;
        const double p_cmig = e_pop > 0 ? (ne / e_pop) * ((i_pop - ni) / i_pop) : 0.0;
        const double u = rng.uniform();
        if (u < p_coal) {
          step.transition = 1;
          step.prob = p_coal;
          ne -= 1;
          res.coalescence_times.push_back(realization.t_end - ev.time);
        } else if (u < p_coal + p_cmig) {
          step.transition = 2;
          step.prob = p_cmig;
          ne -= 1;
          ni += 1;
        } else {
          step.transition = 3;
          step.prob = 1.0 - (e_pop > 0 ? ne / e_pop : 0.0);
        }
        break;
      }
      case Mark::Migration: {
        const double p_mig = ni / i_pop;
        if (rng.uniform() < p_mig) {
          step.transition = 4;
          step.prob = p_mig;
          ne += 1;
          ni -= 1;
        } else {
          step.transition = 5;
          step.prob = 1.0 - p_mig;
        }
        break;
      }
      case Mark::Death: {
        step.transition = 6;
        step.prob = 1.0;
        break;
      }
    }
    step.ne_after = ne;
    step.ni_after = ni;
    res.steps.push_back(step);
  }
  std::sort(res.coalescence_times.begin(), res.coalescence_times.end());
  return res;
}

Rational::Rational(long long n, long long d) {
  if (d == 0) throw NumericalError("rational with zero denominator");
  if (d < 0) {
    n = -n;
    d = -d;
  }
  const long long g = std::gcd(n < 0 ? -n : n, d);
  num = g ? n / g : n;
  den = g ? d / g : d;
}

namespace {

Rational make_rational(__int128 n, __int128 d) {
  if (d < 0) {
    n = -n;
    d = -d;
  }
  __int128 a = n < 0 ? -n : n, b = d;
  while (b) {
    const __int128 t = a % b;
    a = b;
    b = t;
  }
  if (a) {
    n /= a;
    d /= a;
  }
  if (n > INT64_MAX || n < INT64_MIN || d > INT64_MAX)
    throw NumericalError("rational overflow");
  return Rational(static_cast<long long>(n), static_cast<long long>(d));
}

}  // namespace

Rational Rational::operator+(const Rational& o) const {
  return make_rational(static_cast<__int128>(num) * o.den +
                           static_cast<__int128>(o.num) * den,
                       static_cast<__int128>(den) * o.den);
}

Rational Rational::operator-(const Rational& o) const {
  return *this + Rational(-o.num, o.den);
}

Rational Rational::operator*(const Rational& o) const {
  return make_rational(static_cast<__int128>(num) * o.num,
                       static_cast<__int128>(den) * o.den);
}

JumpChainMarginals enumerate_jump_chain(const PopulationTrajectory& realization,
                                        int n_e, int n_i) {
  if (n_e > realization.final_e() || n_i > realization.final_i())
    throw UsageError("sample exceeds the terminal population state");
  JumpChainMarginals out;
  out.mark_probs.assign(realization.events.size(),
                        {Rational::zero(), Rational::zero(), Rational::zero()});
  out.state_after.resize(realization.events.size());

  std::map<std::pair<int, int>, Rational> dist;
  dist[{n_e, n_i}] = Rational::one();

  for (std::size_t idx = realization.events.size(); idx-- > 0;) {
    const auto& ev = realization.events[idx];
    std::map<std::pair<int, int>, Rational> next;
    const auto add = [&](int ne, int ni, const Rational& p) {
      if (p.num == 0) return;
      const auto key = std::make_pair(ne, ni);
      const auto it = next.find(key);
      if (it == next.end())
        next[key] = p;
      else
        it->second = it->second + p;
    };
    for (const auto& [state, p] : dist) {
      const auto [ne, ni] = state;
      switch (ev.mark) {
        case Mark::Birth: {
          const Rational p_coal =
              ev.e > 0 ? Rational(ne, ev.e) * Rational(ni, ev.i) : Rational::zero();
          const Rational p_cmig = ev.e > 0
                                      ? Rational(ne, ev.e) * Rational(ev.i - ni, ev.i)
                                      : Rational::zero();
          const Rational p_keep = Rational::one() - p_coal - p_cmig;
          out.mark_probs[idx][0] = out.mark_probs[idx][0] + p * p_coal;
          out.mark_probs[idx][1] = out.mark_probs[idx][1] + p * p_cmig;
          add(ne - 1, ni, p * p_coal);
          add(ne - 1, ni + 1, p * p_cmig);
          add(ne, ni, p * p_keep);
          break;
        }
        case Mark::Migration: {
          const Rational p_mig(ni, ev.i);
          const Rational p_keep = Rational::one() - p_mig;
          out.mark_probs[idx][2] = out.mark_probs[idx][2] + p * p_mig;
          add(ne + 1, ni - 1, p * p_mig);
          add(ne, ni, p * p_keep);
          break;
        }
        case Mark::Death:
          add(ne, ni, p);
          break;
      }
    }
    dist = std::move(next);
    out.state_after[idx] = dist;
  }
  return out;
}

std::vector<double> intercoalescent_intervals(const EventTimeline& timeline) {
  const auto times = timeline.coalescent_times();
  std::vector<double> gaps;
  double prev = 0.0;
  for (double t : times) {
    gaps.push_back(t - prev);
    prev = t;
  }
  return gaps;
}

}  // namespace eicoal
