#include "eicoal/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace eicoal {

double normal_quantile(double p) {
  if (!(p > 0.0) || !(p < 1.0)) throw UsageError("normal_quantile needs p in (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // One Halley refinement against the exact CDF.
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

namespace {

// Average ranks with ties, then the fractional-offset normal transform.
std::vector<double> rank_normalize(const std::vector<double>& xs) {
  const std::size_t n = xs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
    i = j + 1;
  }
  std::vector<double> z(n);
  for (std::size_t t = 0; t < n; ++t)
    z[t] = normal_quantile((rank[t] - 0.375) / (static_cast<double>(n) + 0.25));
  return z;
}

struct SplitStats {
  double rhat = 0.0;
  double ess = 0.0;
  bool defined = false;
};

// Split-chain R-hat and effective sample size with Geyer's initial monotone
// sequence truncation.
SplitStats split_chain_stats(const std::vector<double>& xs) {
  SplitStats out;
  const std::size_t n = xs.size() / 2;
  if (n < 4) return out;
  const std::vector<std::vector<double>> chains = {
      {xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(n)},
      {xs.begin() + static_cast<std::ptrdiff_t>(n),
       xs.begin() + static_cast<std::ptrdiff_t>(2 * n)}};
  const std::size_t m = chains.size();

  std::vector<double> means(m), vars(m);
  for (std::size_t c = 0; c < m; ++c) {
    double s = 0.0;
    for (double x : chains[c]) s += x;
    means[c] = s / static_cast<double>(n);
    double v = 0.0;
    for (double x : chains[c]) v += (x - means[c]) * (x - means[c]);
    vars[c] = v / static_cast<double>(n - 1);
  }
  const double w = std::accumulate(vars.begin(), vars.end(), 0.0) / m;
  double grand = std::accumulate(means.begin(), means.end(), 0.0) / m;
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= static_cast<double>(n) / (m - 1.0);
  if (!(w > 0.0)) return out;  // constant halves
  const double var_plus = (static_cast<double>(n - 1) / n) * w + b / n;
  out.rhat = std::sqrt(var_plus / w);

  // Autocovariance per chain, averaged, combined into rho_t.
  const auto acov = [&](std::size_t c, std::size_t t) {
    double s = 0.0;
    for (std::size_t j = 0; j + t < n; ++j)
      s += (chains[c][j] - means[c]) * (chains[c][j + t] - means[c]);
    return s / static_cast<double>(n);
  };

  double tau = 1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t t = 1; t + 1 < n; t += 2) {
    double rho_a = 0.0, rho_b = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      rho_a += acov(c, t);
      rho_b += acov(c, t + 1);
    }
    rho_a = 1.0 - (w - rho_a / m) / var_plus;
    rho_b = 1.0 - (w - rho_b / m) / var_plus;
    double pair = rho_a + rho_b;
    if (pair < 0.0) break;
    pair = std::min(pair, prev_pair);  // enforce monotone non-increasing
    prev_pair = pair;
    tau += 2.0 * pair;
  }
  out.ess = static_cast<double>(m * n) / tau;
  out.defined = true;
  return out;
}

}  // namespace

ParamDiagnostics chain_diagnostics(const Eigen::VectorXd& chain,
                                   const std::string& name) {
  ParamDiagnostics out;
  out.name = name;
  const std::size_t n = static_cast<std::size_t>(chain.size());
  std::vector<double> xs(n);
  for (std::size_t j = 0; j < n; ++j) xs[j] = chain(static_cast<Eigen::Index>(j));

  const double lo = *std::min_element(xs.begin(), xs.end());
  const double hi = *std::max_element(xs.begin(), xs.end());
  if (!(hi > lo)) return out;  // constant chain: undefined-flag

  const SplitStats bulk = split_chain_stats(rank_normalize(xs));
  if (!bulk.defined) return out;
  out.bulk_ess = bulk.ess;
  out.split_rhat = bulk.rhat;

  const auto quantile_ess = [&](double p) {
    std::vector<double> sorted = xs;
    std::sort(sorted.begin(), sorted.end());
    const double q =
        sorted[static_cast<std::size_t>(std::min<double>(
            static_cast<double>(n - 1), std::floor(p * static_cast<double>(n))))];
    std::vector<double> ind(n);
    for (std::size_t j = 0; j < n; ++j) ind[j] = xs[j] <= q ? 1.0 : 0.0;
    return split_chain_stats(ind);
  };
  const SplitStats t05 = quantile_ess(0.05);
  const SplitStats t95 = quantile_ess(0.95);
  if (!t05.defined || !t95.defined) return out;
  out.tail_ess = std::min(t05.ess, t95.ess);
  out.defined = true;
  out.below_100 = out.bulk_ess < 100.0 || out.tail_ess < 100.0;
  return out;
}

std::vector<ParamDiagnostics> diagnostics(const PosteriorSamples& samples) {
  if (samples.n_draws() < 100)
    throw UsageError("diagnostics need at least 100 retained draws");
  std::vector<ParamDiagnostics> out;
  for (Eigen::Index c = 0; c < samples.draws.cols(); ++c)
    out.push_back(chain_diagnostics(samples.draws.col(c),
                                    samples.names[static_cast<std::size_t>(c)]));
  return out;
}

}  // namespace eicoal
