#include "eicoal/phasetype.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace eicoal {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

TridiagonalRates build_rates(const IntervalContext& ctx) {
  if (ctx.k < 1) throw UsageError("need at least one active lineage");
  if (!(ctx.e_pop > 0.0) || !(ctx.i_pop > 0.0))
    throw RateDomainError("population plug-in must be positive on the interval");
  const int k = ctx.k;
  TridiagonalRates r;
  r.k = k;
  r.up.assign(static_cast<std::size_t>(k) + 1, 0.0);
  r.down.assign(static_cast<std::size_t>(k) + 1, 0.0);
  r.absorb.assign(static_cast<std::size_t>(k) + 1, 0.0);
  r.diag.assign(static_cast<std::size_t>(k) + 1, 0.0);
  const double mig = ctx.gamma * (ctx.e_pop + 1.0) / ctx.i_pop;
  const double coal = ctx.alpha / ctx.e_pop;
  for (int ne = 0; ne <= k; ++ne) {
    const int ni = k - ne;
    const std::size_t j = static_cast<std::size_t>(ne);
    r.up[j] = ni * mig;
    // Coalescent migration carries the 1(I > n_I) gate.
    r.down[j] = ctx.i_pop > ni ? ne * (ctx.i_pop - ni) * coal : 0.0;
    r.absorb[j] = static_cast<double>(ne) * ni * coal;
    r.diag[j] = -(r.up[j] + r.down[j] + r.absorb[j]);
  }
  return r;
}

RateMatrixSet build_rate_matrices(const IntervalContext& ctx) {
  const TridiagonalRates r = build_rates(ctx);
  const int k = ctx.k;
  RateMatrixSet m;
  m.k = k;
  m.A = Eigen::MatrixXd::Zero(k + 1, k + 1);
  m.L = Eigen::MatrixXd::Zero(k + 1, std::max(k - 1, 0));
  for (int ne = 0; ne <= k; ++ne) {
    const std::size_t j = static_cast<std::size_t>(ne);
    m.A(ne, ne) = r.diag[j];
    if (ne + 1 <= k) m.A(ne, ne + 1) = r.up[j];
    if (ne - 1 >= 0) m.A(ne, ne - 1) = r.down[j];
    // A merge from ne lineages in E leaves ne-1 there: absorption column ne-1.
    if (ne >= 1 && ne - 1 <= k - 2) m.L(ne, ne - 1) = r.absorb[j];
  }
  return m;
}

Eigen::MatrixXd RateMatrixSet::assembled_generator() const {
  const int n_tr = static_cast<int>(A.rows());
  const int n_ab = static_cast<int>(L.cols());
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n_tr + n_ab, n_tr + n_ab);
  q.topLeftCorner(n_tr, n_tr) = A;
  if (n_ab > 0) q.topRightCorner(n_tr, n_ab) = L;
  return q;
}

// ---------------------------------------------------------------------------
// Dense matrix exponential: scaling and squaring with diagonal Pade
// approximants of degree 3/5/7/9/13 and the usual theta thresholds.

namespace {

Eigen::MatrixXd pade_solve(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v) {
  return (v - u).partialPivLu().solve(v + u);
}

Eigen::MatrixXd pade_low(const Eigen::MatrixXd& a, const std::vector<double>& b) {
  const auto n = a.rows();
  const Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd a2 = a * a;
  std::vector<Eigen::MatrixXd> pows;  // I, A2, A4, A6, A8
  pows.push_back(ident);
  for (std::size_t p = 1; 2 * p + 1 < b.size(); ++p) pows.push_back(pows.back() * a2);
  Eigen::MatrixXd usum = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd vsum = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t p = 0; p < pows.size(); ++p) {
    usum += b[2 * p + 1] * pows[p];
    vsum += b[2 * p] * pows[p];
  }
  return pade_solve(a * usum, vsum);
}

Eigen::MatrixXd pade13(const Eigen::MatrixXd& a) {
  static const double b[14] = {64764752532480000.0, 32382376266240000.0,
                               7771770303897600.0,  1187353796428800.0,
                               129060195264000.0,   10559470521600.0,
                               670442572800.0,      33522128640.0,
                               1323241920.0,        40840800.0,
                               960960.0,            16380.0,
                               182.0,               1.0};
  const auto n = a.rows();
  const Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd a2 = a * a;
  const Eigen::MatrixXd a4 = a2 * a2;
  const Eigen::MatrixXd a6 = a2 * a4;
  const Eigen::MatrixXd u =
      a * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 +
           b[3] * a2 + b[1] * ident);
  const Eigen::MatrixXd v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) +
                            b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident;
  return pade_solve(u, v);
}

}  // namespace

Eigen::MatrixXd matexp_dense(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw UsageError("matexp_dense needs a square matrix");
  if (!m.allFinite()) throw NumericalError("matexp_dense: non-finite entries");
  const double norm = m.cwiseAbs().colwise().sum().maxCoeff();  // L1 norm
  static const std::vector<double> b3 = {120, 60, 12, 1};
  static const std::vector<double> b5 = {30240, 15120, 3360, 420, 30, 1};
  static const std::vector<double> b7 = {17297280, 8648640, 1995840, 277200,
                                         25200,    1512,    56,      1};
  static const std::vector<double> b9 = {17643225600.0, 8821612800.0, 2075673600.0,
                                         302702400.0,   30270240.0,   2162160.0,
                                         110880.0,      3960.0,       90.0,
                                         1.0};
  if (norm <= 1.495585217958292e-2) return pade_low(m, b3);
  if (norm <= 2.539398330063230e-1) return pade_low(m, b5);
  if (norm <= 9.504178996162932e-1) return pade_low(m, b7);
  if (norm <= 2.097847961257068e0) return pade_low(m, b9);
  const double theta13 = 5.371920351148152e0;
  int squarings = 0;
  Eigen::MatrixXd scaled = m;
  if (norm > theta13) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / theta13)));
    scaled *= std::ldexp(1.0, -squarings);
  }
  Eigen::MatrixXd f = pade13(scaled);
  for (int s = 0; s < squarings; ++s) f = f * f;
  return f;
}

// ---------------------------------------------------------------------------
// Krylov action with adaptive substepping. The local step is accepted on a
// generalized-residual estimate; on rejection the step is halved.

Eigen::VectorXd matexp_action(const Eigen::MatrixXd& m, const Eigen::VectorXd& v,
                              double t) {
  if (m.rows() != m.cols() || m.rows() != v.size())
    throw UsageError("matexp_action: dimension mismatch");
  if (t < 0.0) throw UsageError("matexp_action: negative time");
  if (!m.allFinite() || !v.allFinite())
    throw NumericalError("matexp_action: non-finite input");
  const auto n = m.rows();
  if (t == 0.0 || v.isZero(0.0)) return v;

  const int mk_max = static_cast<int>(std::min<Eigen::Index>(n, 30));
  const double tol = 1e-12;
  double remaining = t;
  Eigen::VectorXd w = v;
  int substeps = 0;
  while (remaining > 0.0) {
    if (++substeps > 100000)
      throw NumericalError("matexp_action: exceeded substep budget");
    const double beta = w.norm();
    if (beta == 0.0) return w;

    Eigen::MatrixXd basis(n, mk_max + 1);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(mk_max + 1, mk_max);
    basis.col(0) = w / beta;
    int mk = mk_max;
    bool happy = false;
    for (int j = 0; j < mk_max; ++j) {
      Eigen::VectorXd u = m * basis.col(j);
      for (int i = 0; i <= j; ++i) {
        h(i, j) = basis.col(i).dot(u);
        u -= h(i, j) * basis.col(i);
      }
      for (int i = 0; i <= j; ++i) {  // one re-orthogonalization pass
        const double c = basis.col(i).dot(u);
        h(i, j) += c;
        u -= c * basis.col(i);
      }
      h(j + 1, j) = u.norm();
      if (h(j + 1, j) < 1e-14 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
        mk = j + 1;
        happy = true;
        break;
      }
      basis.col(j + 1) = u / h(j + 1, j);
    }

    double tau = remaining;
    for (int halvings = 0;; ++halvings) {
      if (halvings > 80)
        throw NumericalError("matexp_action: step size underflow");
      const Eigen::MatrixXd f = matexp_dense(tau * h.topLeftCorner(mk, mk));
      const Eigen::VectorXd y = f.col(0);
      const double err =
          happy ? 0.0 : beta * h(mk, mk - 1) * std::abs(y(mk - 1)) * tau;
      if (err <= tol * std::max(beta, beta * y.norm())) {
        w = beta * (basis.leftCols(mk) * y);
        remaining -= tau;
        break;
      }
      tau *= 0.5;
    }
  }
  return w;
}

// ---------------------------------------------------------------------------
// Uniformization row propagation on the tridiagonal transient block.

namespace {

// v_in * exp(A*dt) for a nonnegative row vector v_in over the transient
// states, by uniformization: exp(A*dt) = e^{-a} sum_m a^m/m! P^m with
// P = I + A/lambda. Every term is nonnegative, so the series is cancellation
// free; substeps keep a <= 64 and each substep is rescaled by its max with
// the log scale accumulated.
ScaledRow propagate_row(const IntervalContext& ctx, const TridiagonalRates& r,
                        const Eigen::VectorXd& v_in) {
  const int k = ctx.k;
  if (ctx.dt < 0.0) throw UsageError("propagate_row: negative interval");
  ScaledRow out;
  out.values = v_in;
  out.log_scale = 0.0;
  if (ctx.dt == 0.0) return out;

  double lambda = 0.0;
  for (double d : r.diag) lambda = std::max(lambda, -d);
  if (lambda == 0.0) return out;
  if (lambda * ctx.dt > 6.4e7)
    throw NumericalError("propagate_row: rate*dt too large");

  const double a_max = 64.0;
  const int nsub = static_cast<int>(std::ceil(lambda * ctx.dt / a_max));
  const double tau = ctx.dt / nsub;
  const double a = lambda * tau;

  std::vector<double> v(static_cast<std::size_t>(k) + 1);
  for (int j = 0; j <= k; ++j) v[static_cast<std::size_t>(j)] = v_in(j);
  std::vector<double> vm(v.size()), acc(v.size()), next(v.size());

  for (int s = 0; s < nsub; ++s) {
    double weight = std::exp(-a);
    double cum = weight;
    vm = v;
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] = weight * vm[j];
    for (int term = 1; term <= 2000; ++term) {
      // vm <- vm * P (row vector times the tridiagonal matrix).
      for (int ne = 0; ne <= k; ++ne) {
        const std::size_t j = static_cast<std::size_t>(ne);
        double x = vm[j] * (1.0 + r.diag[j] / lambda);
        if (ne > 0) x += vm[j - 1] * (r.up[j - 1] / lambda);
        if (ne < k) x += vm[j + 1] * (r.down[j + 1] / lambda);
        next[j] = x;
      }
      vm.swap(next);
      weight *= a / term;
      for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += weight * vm[j];
      cum += weight;
      if (1.0 - cum <= 1e-16 && term > a) break;
    }
    double mx = 0.0;
    for (double x : acc) mx = std::max(mx, x);
    if (!(mx > 0.0)) {  // all mass vanished; report as exact zero row
      out.values.setZero();
      out.log_scale = 0.0;
      return out;
    }
    for (std::size_t j = 0; j < acc.size(); ++j) v[j] = acc[j] / mx;
    out.log_scale += std::log(mx);
  }
  for (int ne = 0; ne <= k; ++ne) out.values(ne) = v[static_cast<std::size_t>(ne)];
  return out;
}

}  // namespace

ScaledRow transition_row(const IntervalContext& ctx, int ne_start) {
  const TridiagonalRates r = build_rates(ctx);
  if (ne_start < 0 || ne_start > ctx.k)
    throw UsageError("transition_row: bad start state");
  Eigen::VectorXd basis = Eigen::VectorXd::Zero(ctx.k + 1);
  basis(ne_start) = 1.0;
  return propagate_row(ctx, r, basis);
}

double interval_likelihood(int ne_start, int ne_end, const IntervalContext& ctx,
                           EventType end_type) {
  const int k = ctx.k;
  if (ne_start < 0 || ne_start > k) throw UsageError("interval_likelihood: bad start state");
  if (end_type == EventType::Coalescent) {
    if (k < 2) throw UsageError("coalescence needs at least 2 lineages");
    if (ne_end < 0 || ne_end > k - 2)
      throw UsageError("interval_likelihood: bad absorption state");
  } else if (ne_end < 0 || ne_end > k) {
    throw UsageError("interval_likelihood: bad end state");
  }
  if (ctx.dt < 0.0) throw UsageError("interval_likelihood: negative interval");

  const RateMatrixSet rm = build_rate_matrices(ctx);
  Eigen::VectorXd row;
  if (k + 1 <= 64) {
    const Eigen::MatrixXd e = matexp_dense(rm.A * ctx.dt);
    row = e.row(ne_start).transpose();
  } else {
    Eigen::VectorXd basis = Eigen::VectorXd::Zero(k + 1);
    basis(ne_start) = 1.0;
    row = matexp_action(rm.A.transpose(), basis, ctx.dt);
  }
  double f;
  if (end_type == EventType::Coalescent)
    f = row(ne_end + 1) * rm.L(ne_end + 1, ne_end);
  else
    f = row(ne_end);
  return std::max(f, 0.0);
}

// ---------------------------------------------------------------------------
// Timeline likelihoods.

int EiModelParams::segments_needed(double span) const {
  if (changepoint_interval <= 0.0) throw ConfigError("changepoint interval must be positive");
  const int n = static_cast<int>(std::ceil(span / changepoint_interval - 1e-12));
  return std::max(n, 1);
}

int EiModelParams::segment_index(double span, double t_lo, double t_hi) const {
  const int m = static_cast<int>(r_segments.size());
  const double mid = 0.5 * (t_lo + t_hi);
  int back = static_cast<int>(std::floor(mid / changepoint_interval));
  back = std::clamp(back, 0, segments_needed(span) - 1);
  const int idx = m - 1 - back;
  if (idx < 0) throw ConfigError("R vector has fewer segments than the timeline needs");
  return idx;
}

double EiModelParams::alpha_on(double span, double t_lo, double t_hi) const {
  return r_segments[static_cast<std::size_t>(segment_index(span, t_lo, t_hi))] * nu;
}

IntervalContext interval_context(const EventTimeline& tl, std::size_t i,
                                 const EiModelParams& params,
                                 const DeterministicTrajectory& traj) {
  if (i == 0 || i >= tl.size()) throw UsageError("interval index out of range");
  const double span = tl.span();
  const double t_lo = tl[i - 1].time;
  const double t_hi = tl[i].time;
  IntervalContext ctx;
  ctx.k = tl[i - 1].k;
  ctx.dt = t_hi - t_lo;
  const double u = span - t_hi;  // rootward end of the interval, forward time
  ctx.e_pop = traj.e_at(u);
  ctx.i_pop = traj.i_at(u);
  ctx.alpha = params.alpha_on(span, t_lo, t_hi);
  ctx.gamma = params.gamma;
  ctx.nu = params.nu;
  return ctx;
}

namespace {

// V of the augmented model: sampled lineage counts may not exceed the
// population plug-in at any timeline time.
bool counts_feasible(const EventTimeline& tl, std::size_t i, int ne,
                     const DeterministicTrajectory& traj) {
  const double span = tl.span();
  const double u = span - tl[i].time;
  const int ni = tl[i].k - ne;
  return ne <= traj.e_at(u) && ni <= traj.i_at(u);
}

}  // namespace

double augmented_loglik(const EventTimeline& tl, const std::vector<int>& n_exposed,
                        const EiModelParams& params,
                        const DeterministicTrajectory& traj) {
  if (n_exposed.size() != tl.size())
    throw UsageError("state labels must match the timeline length");
  for (std::size_t i = 0; i < tl.size(); ++i)
    if (n_exposed[i] < 0 || n_exposed[i] > tl[i].k)
      throw UsageError("state label outside 0..k");

  for (std::size_t i = 0; i < tl.size(); ++i)
    if (!counts_feasible(tl, i, n_exposed[i], traj)) return kNegInf;

  double total = 0.0;
  for (std::size_t i = 1; i < tl.size(); ++i) {
    IntervalContext ctx;
    try {
      ctx = interval_context(tl, i, params, traj);
    } catch (const RateDomainError&) {
      return kNegInf;
    }
    if (!(ctx.e_pop > 0.0) || !(ctx.i_pop > 0.0)) return kNegInf;

    const int ne_prev = n_exposed[i - 1];
    const int ne_next = n_exposed[i];
    double f, log_scale;
    try {
      const ScaledRow row = transition_row(ctx, ne_prev);
      log_scale = row.log_scale;
      if (tl[i].type == EventType::Coalescent) {
        if (ne_next > ctx.k - 2) return kNegInf;
        const TridiagonalRates r = build_rates(ctx);
        f = row.values(ne_next + 1) * r.absorb[static_cast<std::size_t>(ne_next) + 1];
      } else {
        // Sampling adds infectious lineages only, so n_E cannot exceed the
        // pre-event lineage count.
        if (ne_next > ctx.k) return kNegInf;
        f = row.values(ne_next);
      }
    } catch (const NumericalError&) {
      return kNegInf;
    }
    if (!(f > 0.0)) return kNegInf;
    total += std::log(f) + log_scale;
  }
  return total;
}

double alternative_loglik(const EventTimeline& tl,
                          const std::vector<int>& n_exposed_events,
                          const EiModelParams& params,
                          const DeterministicTrajectory& traj) {
  std::size_t n_events = 0;
  for (std::size_t i = 0; i < tl.size(); ++i)
    if (tl[i].type != EventType::Grid) ++n_events;
  if (n_exposed_events.size() != n_events)
    throw UsageError("need one state label per coalescent/sampling event");

  if (tl.empty() || tl[0].type != EventType::Sampling)
    throw UsageError("timeline must start with a sampling event");

  double total = 0.0;
  std::size_t label_idx = 0;
  const int ne0 = n_exposed_events[label_idx++];
  if (ne0 < 0 || ne0 > tl[0].k) throw UsageError("state label outside 0..k");
  Eigen::VectorXd row = Eigen::VectorXd::Zero(tl[0].k + 1);
  row(ne0) = 1.0;
  double row_scale = 0.0;

  for (std::size_t i = 1; i < tl.size(); ++i) {
    IntervalContext ctx;
    TridiagonalRates rates;
    try {
      ctx = interval_context(tl, i, params, traj);
      rates = build_rates(ctx);
    } catch (const RateDomainError&) {
      return kNegInf;
    }
    try {
      const ScaledRow propagated = propagate_row(ctx, rates, row);
      row = propagated.values;
      row_scale += propagated.log_scale;
    } catch (const NumericalError&) {
      return kNegInf;
    }

    if (tl[i].type == EventType::Grid) continue;

    const int ne_next = n_exposed_events[label_idx++];
    double f;
    if (tl[i].type == EventType::Coalescent) {
      if (ne_next < 0 || ne_next > tl[i].k) throw UsageError("bad absorption label");
      if (ne_next > ctx.k - 2) return kNegInf;
      f = row(ne_next + 1) * rates.absorb[static_cast<std::size_t>(ne_next) + 1];
    } else {
      if (ne_next < 0 || ne_next > tl[i].k) throw UsageError("state label outside 0..k");
      if (ne_next > ctx.k) return kNegInf;
      f = row(ne_next);
    }
    if (!(f > 0.0)) return kNegInf;
    total += std::log(f) + row_scale;
    // Condition on the event state and continue at the new lineage count.
    row = Eigen::VectorXd::Zero(tl[i].k + 1);
    row(ne_next) = 1.0;
    row_scale = 0.0;
  }
  return total;
}

}  // namespace eicoal
