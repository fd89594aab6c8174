#include "eicoal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace eicoal {

void TruthGrid::validate() const {
  if (times.empty() || times.size() != r_true.size())
    throw UsageError("truth grid needs matching, nonempty time/value vectors");
  if (!std::is_sorted(times.begin(), times.end()))
    throw UsageError("truth grid times must be ascending");
  for (double v : r_true)
    if (!std::isfinite(v)) throw UsageError("truth values must be finite");
}

double TruthGrid::r_interp(double t) const {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return r_true.front();
  return r_true[static_cast<std::size_t>(it - times.begin()) - 1];
}

double empirical_quantile(std::vector<double> xs, double p) {
  if (xs.empty()) throw UsageError("quantile of an empty sample");
  if (p < 0.0 || p > 1.0) throw UsageError("quantile level outside [0,1]");
  std::sort(xs.begin(), xs.end());
  if (p <= 0.0) return xs.front();
  if (p >= 1.0) return xs.back();
  const double h = p * static_cast<double>(xs.size());  // in (0, n)
  const double ih = std::floor(h);
  if (h == ih) {
    // p*n hits an order statistic exactly: average it with the next one.
    const std::size_t j = static_cast<std::size_t>(ih);
    return j >= xs.size() ? xs.back() : 0.5 * (xs[j - 1] + xs[j]);
  }
  return xs[static_cast<std::size_t>(std::ceil(h)) - 1];
}

namespace {

void check_grid(const Eigen::MatrixXd& draws, const std::vector<double>& truth) {
  if (draws.rows() < 1 || draws.cols() < 1)
    throw UsageError("empty posterior grid");
  if (static_cast<std::size_t>(draws.cols()) != truth.size())
    throw UsageError("posterior grid and truth grid differ in length");
}

std::vector<double> column(const Eigen::MatrixXd& m, Eigen::Index c) {
  std::vector<double> xs(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    xs[static_cast<std::size_t>(r)] = m(r, c);
  return xs;
}

}  // namespace

double envelope(const Eigen::MatrixXd& draws_on_grid, const std::vector<double>& truth,
                double level) {
  check_grid(draws_on_grid, truth);
  const double tail = 0.5 * (1.0 - level);
  std::size_t covered = 0;
  for (Eigen::Index c = 0; c < draws_on_grid.cols(); ++c) {
    const auto xs = column(draws_on_grid, c);
    const double lo = empirical_quantile(xs, tail);
    const double hi = empirical_quantile(xs, 1.0 - tail);
    const double t = truth[static_cast<std::size_t>(c)];
    if (t >= lo && t <= hi) ++covered;
  }
  return static_cast<double>(covered) / static_cast<double>(draws_on_grid.cols());
}

double abs_deviation(const Eigen::MatrixXd& draws_on_grid,
                     const std::vector<double>& truth) {
  check_grid(draws_on_grid, truth);
  double total = 0.0;
  for (Eigen::Index c = 0; c < draws_on_grid.cols(); ++c) {
    const double med = empirical_quantile(column(draws_on_grid, c), 0.5);
    total += std::abs(med - truth[static_cast<std::size_t>(c)]);
  }
  return total / static_cast<double>(draws_on_grid.cols());
}

double mciw(const Eigen::MatrixXd& draws_on_grid, double level) {
  if (draws_on_grid.rows() < 1 || draws_on_grid.cols() < 1)
    throw UsageError("empty posterior grid");
  const double tail = 0.5 * (1.0 - level);
  double total = 0.0;
  for (Eigen::Index c = 0; c < draws_on_grid.cols(); ++c) {
    const auto xs = column(draws_on_grid, c);
    total += empirical_quantile(xs, 1.0 - tail) - empirical_quantile(xs, tail);
  }
  return total / static_cast<double>(draws_on_grid.cols());
}

std::vector<SummaryRow> posterior_summary(const Eigen::MatrixXd& draws_on_grid,
                                          const std::vector<double>& times) {
  if (static_cast<std::size_t>(draws_on_grid.cols()) != times.size())
    throw UsageError("summary grid mismatch");
  std::vector<SummaryRow> rows;
  for (Eigen::Index c = 0; c < draws_on_grid.cols(); ++c) {
    const auto xs = column(draws_on_grid, c);
    SummaryRow r;
    r.time = times[static_cast<std::size_t>(c)];
    r.median = empirical_quantile(xs, 0.5);
    r.lo50 = empirical_quantile(xs, 0.25);
    r.hi50 = empirical_quantile(xs, 0.75);
    r.lo80 = empirical_quantile(xs, 0.10);
    r.hi80 = empirical_quantile(xs, 0.90);
    r.lo95 = empirical_quantile(xs, 0.025);
    r.hi95 = empirical_quantile(xs, 0.975);
    rows.push_back(r);
  }
  return rows;
}

void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << "time,median,lo50,hi50,lo80,hi80,lo95,hi95\n";
  char buf[40];
  const auto put = [&](double v, char sep) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf << sep;
  };
  for (const auto& r : rows) {
    put(r.time, ',');
    put(r.median, ',');
    put(r.lo50, ',');
    put(r.hi50, ',');
    put(r.lo80, ',');
    put(r.hi80, ',');
    put(r.lo95, ',');
    put(r.hi95, '\n');
  }
}

}  // namespace eicoal
