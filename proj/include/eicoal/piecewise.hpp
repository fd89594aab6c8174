#pragma once

#include <algorithm>
#include <vector>

#include "eicoal/common.hpp"

namespace eicoal {

// Right-continuous piecewise-constant function of time: value(t) = values[j]
// for t in [breaks[j], breaks[j+1]), constant at values.front() before the
// first break and values.back() after the last.
struct PiecewiseConstantFn {
  std::vector<double> breaks;  // ascending, size = values.size() - 1
  std::vector<double> values;  // size >= 1

  static PiecewiseConstantFn constant(double v) { return {{}, {v}}; }

  double operator()(double t) const {
    const auto it = std::upper_bound(breaks.begin(), breaks.end(), t);
    return values[static_cast<std::size_t>(it - breaks.begin())];
  }

  void validate() const {
    if (values.empty() || breaks.size() + 1 != values.size())
      throw ConfigError("piecewise function needs n+1 values for n breakpoints");
    if (!std::is_sorted(breaks.begin(), breaks.end()))
      throw ConfigError("piecewise breakpoints must be ascending");
  }
};

}  // namespace eicoal
