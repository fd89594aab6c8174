#pragma once

// Test-only reference implementations, kept independent of the library code
// paths they are used to check.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

namespace oracles {

// Classic fixed-step RK4 for the two-compartment linear system
// dE/du = alpha*I - gamma*E, dI/du = gamma*E - nu*I.
inline std::pair<double, double> rk4_ei(double e0, double i0, double gamma, double nu,
                                        double alpha, double t_end, double step) {
  double e = e0, i = i0, t = 0.0;
  const auto de = [&](double ee, double ii) { return alpha * ii - gamma * ee; };
  const auto di = [&](double ee, double ii) { return gamma * ee - nu * ii; };
  while (t < t_end) {
    const double h = std::min(step, t_end - t);
    const double k1e = de(e, i), k1i = di(e, i);
    const double k2e = de(e + 0.5 * h * k1e, i + 0.5 * h * k1i);
    const double k2i = di(e + 0.5 * h * k1e, i + 0.5 * h * k1i);
    const double k3e = de(e + 0.5 * h * k2e, i + 0.5 * h * k2i);
    const double k3i = di(e + 0.5 * h * k2e, i + 0.5 * h * k2i);
    const double k4e = de(e + h * k3e, i + h * k3i);
    const double k4i = di(e + h * k3e, i + h * k3i);
    e += h / 6.0 * (k1e + 2.0 * k2e + 2.0 * k3e + k4e);
    i += h / 6.0 * (k1i + 2.0 * k2i + 2.0 * k3i + k4i);
    t += h;
  }
  return {e, i};
}

// RK4 for a row-vector linear ODE v' = v*A.
inline Eigen::RowVectorXd rk4_row(const Eigen::RowVectorXd& v0,
                                  const Eigen::MatrixXd& a, double t_end, double step) {
  Eigen::RowVectorXd v = v0;
  double t = 0.0;
  while (t < t_end) {
    const double h = std::min(step, t_end - t);
    const Eigen::RowVectorXd k1 = v * a;
    const Eigen::RowVectorXd k2 = (v + 0.5 * h * k1) * a;
    const Eigen::RowVectorXd k3 = (v + 0.5 * h * k2) * a;
    const Eigen::RowVectorXd k4 = (v + h * k3) * a;
    v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t += h;
  }
  return v;
}

// Truncated Taylor series of exp(M) with extended-precision accumulation.
inline Eigen::MatrixXd taylor_expm(const Eigen::MatrixXd& m, int terms = 200) {
  const Eigen::Index n = m.rows();
  using LongMatrix =
      Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const LongMatrix ml = m.cast<long double>();
  LongMatrix sum = LongMatrix::Identity(n, n);
  LongMatrix term = LongMatrix::Identity(n, n);
  for (int j = 1; j <= terms; ++j) {
    term = term * ml / static_cast<long double>(j);
    sum += term;
  }
  return sum.cast<double>();
}

// One-sample Kolmogorov-Smirnov statistic against a CDF.
inline double ks_statistic(std::vector<double> xs,
                           const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    const double f = cdf(xs[j]);
    d = std::max(d, std::abs(f - static_cast<double>(j) / n));
    d = std::max(d, std::abs(static_cast<double>(j + 1) / n - f));
  }
  return d;
}

// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t ia = 0, ib = 0;
  while (ia < a.size() && ib < b.size()) {
    if (a[ia] <= b[ib])
      ++ia;
    else
      ++ib;
    d = std::max(d, std::abs(static_cast<double>(ia) / a.size() -
                             static_cast<double>(ib) / b.size()));
  }
  return d;
}

inline double mean(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double variance(const std::vector<double>& xs) {
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

inline double median_of(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace oracles
