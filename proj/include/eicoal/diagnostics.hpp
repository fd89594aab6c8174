#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "eicoal/inference.hpp"

namespace eicoal {

struct ParamDiagnostics {
  std::string name;
  double bulk_ess = 0.0;
  double tail_ess = 0.0;
  double split_rhat = 0.0;
  bool defined = false;   // false for constant chains
  bool below_100 = false; // flagged when any ESS is under the working threshold
};

// Rank-normalized split-chain statistics for a single chain (split in two).
ParamDiagnostics chain_diagnostics(const Eigen::VectorXd& chain, const std::string& name);

// One entry per sampled scalar. Needs at least 100 retained draws.
std::vector<ParamDiagnostics> diagnostics(const PosteriorSamples& samples);

// Standard-normal quantile function (Acklam's approximation polished with one
// Halley step), used for rank normalization.
double normal_quantile(double p);

}  // namespace eicoal
