#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <vector>

#include "eicoal/common.hpp"

namespace eicoal {

// True values on a fixed grid; times in backwards days from the most recent
// tip, matching how posterior reproduction numbers are evaluated.
struct TruthGrid {
  std::vector<double> times;
  std::vector<double> r_true;

  void validate() const;
  // Piecewise-constant carry-forward at an arbitrary backwards time.
  double r_interp(double t) const;
};

// Equal-tailed empirical quantile: inverted empirical CDF with averaging at
// the discontinuities.
double empirical_quantile(std::vector<double> xs, double p);

// draws_on_grid: one row per posterior draw, one column per truth time.
double envelope(const Eigen::MatrixXd& draws_on_grid, const std::vector<double>& truth,
                double level = 0.95);
double abs_deviation(const Eigen::MatrixXd& draws_on_grid,
                     const std::vector<double>& truth);
double mciw(const Eigen::MatrixXd& draws_on_grid, double level = 0.95);

struct SummaryRow {
  double time = 0.0;
  double median = 0.0;
  double lo50 = 0.0, hi50 = 0.0;
  double lo80 = 0.0, hi80 = 0.0;
  double lo95 = 0.0, hi95 = 0.0;
};

std::vector<SummaryRow> posterior_summary(const Eigen::MatrixXd& draws_on_grid,
                                          const std::vector<double>& times);

void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows);

}  // namespace eicoal
